"""Default parameters for the comparison pipelines."""

# Structure repository
PDB_ID_PATTERN = r"^[0-9][A-Za-z0-9]{3}$"
DEFAULT_FETCH_URL = "https://files.rcsb.org/download/{id}.pdb"
DEFAULT_CACHE_DIR = "~/.cache/morphoprot"
FETCH_TIMEOUT_SECONDS = 30.0

# Method 1: stacked skeleton fractal signature
M1_SELECTOR = "all_atoms"
M1_SLICE_THICKNESS = 0.1  # normalized z units, twenty intervals over [-1, 1]
M1_RESOLUTION = 512
M1_DOT_RADIUS = 1  # isolated atoms survive as 3-pixel blobs
M1_GROWTH_SHAPE = "disk"
M1_GROWTH_STEP = 1
M1_MAX_GROWTH_ITERS = 64
M1_SKELETON_SHAPE = "square"
M1_SKELETON_SIZE = 1
M1_BOX_MAX = 128

# Method 2: six-face geodesic profile
M2_SELECTOR = "backbone_ca"
M2_RESOLUTION = 256
M2_STROKE_RADIUS = 2
M2_TRACE = True
M2_GEODESIC_SHAPE = "square"  # square-1 is 8-connectivity
M2_GEODESIC_SIZE = 1
M2_MAX_ITERS = 10_000

# Similarity verdict
RHO_THRESHOLD = 0.008
DELTA_THRESHOLD = 12

# Box counting needs at least this many scales for a slope
MIN_BOX_SCALES = 3

# Face order used in reports
FACE_NAMES = ("front", "left", "right", "top", "bottom", "back")
