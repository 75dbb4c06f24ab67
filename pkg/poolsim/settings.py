# Global defaults of the command-line tool (scenario parameters themselves live in `config.py`)

OUT_DIR = 'out'
OUTPUT_FORMAT = 'csv'

# Percentiles reported for each condition (field name: percent). Output tables label them `p{percent}`.
PERCENTILES: dict[str,float] = {
    'p50': 50,
    'p95': 95,
    'p99': 99,
    'p995': 99.5,
}

# Target P99 reduction of a one-pod pool, and accepted deviation, for the calibration note
CALIBRATION_TARGET = 0.85
CALIBRATION_TOLERANCE = 0.10

# Number of decimals of seconds-valued numbers in output tables
DECIMALS = 6
