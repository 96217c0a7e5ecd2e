"""
Configuration settings for the gateset characterization toolkit
Defaults mirror the reference simulated experiment
"""

# Reference Gateset (one-qubit error parameters)
DEFAULT_EPSILON = 0.06  # over-rotation fraction, angle = (1+eps)*pi/2
DEFAULT_THETA = 0.01  # rotation axis tilt above the equator (rad)
DEFAULT_P_X = 0.002  # X-basis decoherence per X90
DEFAULT_P_Z = 0.02  # Z-basis decoherence per X90
DEFAULT_R_01 = 0.08  # Pr(read 0 as 1)
DEFAULT_R_10 = 0.05  # Pr(read 1 as 0)

# Reference CZ error parameters (used when CZ characterization is enabled)
DEFAULT_CZ_ALPHA = 0.03
DEFAULT_CZ_BETA = -0.05
DEFAULT_CZ_P_IZ = 0.004
DEFAULT_CZ_P_ZI = 0.006
DEFAULT_CZ_P_ZZ = 0.002

# Circuit Families
DECOHERENCE_DEPTHS = [20, 40, 60, 80, 100, 120]  # must be even
RPE_MAX_EXPONENT = 3  # depths 1, 2, 4, 8
CZ_ENABLED = False
CZ_PHASE_MAX_EXPONENT = 4  # CZ depths 2, 4, 8, 16
CZ_DECAY_DEPTHS = [4, 8, 16, 24, 32, 48]  # CZs before the echo (same after)

# Shots Per Circuit Class
SHOTS_DECOHERENCE = 30
SHOTS_RPE = 30
SHOTS_READOUT = 300
SHOTS_CZ = 10000

# Random Streams
MASTER_SEED = 20240101

# Numerical Tolerances
UNITARITY_TOLERANCE = 1e-10
PROBABILITY_TOLERANCE = 1e-9  # clamp window outside [0, 1]
LIKELIHOOD_CLAMP = 1e-12  # p clamped to [1e-12, 1-1e-12] before logs

# Exponential Fit
FIT_MIN_DEPTHS = 4
FIT_TOLERANCE = 1e-10
FIT_MAX_ITERATIONS = 2000
FIT_IDENTIFIABILITY_FACTOR = 3.0  # span must exceed 3x the standard error of the mean signal

# Likelihood Maximization Bounds
PROBABILITY_BOUNDS = (0.0, 0.5)
ANGLE_BOUNDS = (-0.5, 0.5)
MLE_MAX_EVALUATIONS = 4000
MLE_TOLERANCE = 1e-7
MLE_SIMPLEX_STEP_ANGLE = 0.01
MLE_SIMPLEX_STEP_PROBABILITY = 0.002
MLE_SIMPLEX_STEP_FRACTION = 0.25

# Precision And Model Violation
PSTAR = 0.05  # maximum discrimination failure rate
VIOLATION_THRESHOLD = 0.05  # reject when 1/k^2 < 0.05
PROFILE_GRID_POINTS = 41
PROFILE_STDERR_MULTIPLE = 5.0
PROFILE_MIN_HALF_WIDTH = 0.01

# Output Files
OUTPUT_DIR = "results"
DATASET_FILE = "dataset.jsonl"
CIRCUITS_FILE = "circuits.json"
LOG_FILE = "characterization.log"
ERROR_LOG_FILE = "errors.log"
REPORT_SCHEMA_FILE = "report_schema.json"
