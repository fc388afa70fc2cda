"""Constants used throughout the slg_lab package."""

# Boundary discretization
DEFAULT_GRID_M = 4096
HERGLOTZ_KERNEL_SWITCH = 32.0  # kernel quadrature when m * log|w| exceeds this
HERGLOTZ_TAIL_TOL = 1e-8

# Map inversion
INVERT_MAX_ITER = 50
INVERT_TOL = 1e-13
INSIDE_TOL = 1e-9

# Growth step solver
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 10
CUSP_TOL = 1e-9
CLOCK_SKEW_LIMIT = 0.25
MAX_DT_HALVINGS = 6
SINGULARITY_WINDOW = 20
STALLED_SOURCE_TOL = 1e-14
MERGE_DISTANCE = 1e-10
AREA_REL_TOL = 1e-8

# Drivers
COINCIDENT_TOL = 1e-12
DEFAULT_DRIVER_RADIUS = 0.5

# Martingale suite
COLLISION_TOL = 1e-12
S_POINT_THRESHOLD = 1e-12
Z_SCORE_LIMIT = 3.0

# Fjord analysis
FJORD_MIN_DEPTH_WIDTHS = 5.0
FJORD_WALL_SAMPLES = 64

# Output files
MANIFEST_FILE = "manifest.json"
CONTOURS_FILE = "contours.csv"
MAP_PARAMS_FILE = "map_params.csv"
STATS_FILE = "stats.csv"
CONTOUR_HEADER = ["step", "t", "phi", "re_z", "im_z"]
MAP_PARAMS_HEADER = ["step", "t", "kind", "re_coeff", "im_coeff", "re_sing", "im_sing", "branch"]
STATS_HEADER = ["check", "identity", "driver_mode", "re_estimate", "im_estimate", "stderr", "z_score"]
FLOAT_FORMAT = ".17g"
DEFAULT_OUT_DIR = "runs"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ABORT = 3

# Logging configuration
LOG_FORMAT = "%(levelname)s:%(name)s:%(message)s"
LOG_LEVEL = "INFO"
