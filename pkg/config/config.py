#!/usr/bin/env python3
"""
Configuration settings for the EV incentive routing toolkit.
"""

import os

# Base directory paths
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DOCS_DIR = os.path.join(BASE_DIR, 'docs')
DATA_DIR = os.path.join(BASE_DIR, 'data')
SCENARIO_DIR = os.path.join(DATA_DIR, 'scenarios')
OUTPUT_DIR = os.path.join(DATA_DIR, 'reports')

# Load environment variables from .env
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    print("Warning: python-dotenv not found. Make sure solver settings are set in environment.")

LOG_DIR = os.getenv("EVRP_LOG_DIR", os.path.join(DATA_DIR, 'logs'))

# Ensure output directories exist
os.makedirs(OUTPUT_DIR, exist_ok=True)
os.makedirs(LOG_DIR, exist_ok=True)

# Fleet and charging defaults (full-scale experiment values)
BATTERY_CAPACITY_KWH = 90.0
FAST_CHARGE_KW = 150.0
SLOW_CHARGE_KW = 22.0
CONSUMPTION_KWH_PER_KM = 0.24
SPEED_KMH = 60.0
VEHICLE_USAGE_COST = 99.0
FULL_SLOTS = 288
FULL_SLOT_HOURS = 5.0 / 60.0

# Customer defaults
REVENUE_MEAN = 9.05
REVENUE_STD = 5.0
INCONVENIENCE_GAMMA = (0.0, 1.5)
INCONVENIENCE_CHI = (0.01, -0.01)

# Desk-scale defaults
DESK_SLOTS = 48
DESK_SLOT_HOURS = 0.5
DEFAULT_SIZES = [7, 9, 11, 13]
DEFAULT_SEEDS = [1, 2, 3, 4, 5]
DELTA_BAR_GRID = [0.5, 1.0, 1.5]
GAMMA2_GRID = [1.5, 2.5, 5.0]
BASELINE_WINDOW_WIDTH = 0.25
VALUE_OF_TIME = 10.0
INITIAL_SOC_SHARE = 0.25
AREA_KM = 60.0
FAST_STATION_SHARE = 0.5
DESK_VEHICLE_USAGE_COST = 10.0
ARRIVAL_SPREAD_HOURS = 4.0

# Solver tolerances
INTEGRALITY_TOL = 1e-6
FEASIBILITY_TOL = 1e-7
DEFAULT_MIP_GAP = 1e-6
REFACTOR_INTERVAL = 50
BLAND_THRESHOLD = 1000
MIN_TRAVEL_TIME = 1e-4

# Benders settings
LP_RELAXED_ROUNDS = 3
STRENGTHEN_TIME_SHARE = 0.1
STRENGTHEN_GAP = 1e-4
BENDERS_MAX_ITERATIONS = 200

# External solver template, e.g. "cbc {in} solve solu {out}"
SOLVER_CMD = os.getenv("EVRP_SOLVER_CMD")

DEFAULT_TIME_LIMIT = float(os.getenv("EVRP_TIME_LIMIT", "600"))
