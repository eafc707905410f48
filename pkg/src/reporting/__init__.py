# Reporting modules 