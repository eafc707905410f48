# EV incentive routing toolkit
