# Config package initialization
from .config import * 