# wmv-stability/wmv_stability/config.py

import numpy as np

# Enumeration settings
ENUMERATION_CAPACITY = 24  # 2**24 realizations is the exact-enumeration ceiling
BATCH_CELLS = 2 ** 22  # max (rows x realizations) cells materialised at once
VERTEX_CAPACITY = 12  # cube-vertex bounds cost 2**n vertices x 2**n realizations

# Tolerances
TIE_TOLERANCE = 1e-12  # relative, for pair-probability comparison
BREAKPOINT_TOLERANCE = 1e-12  # absolute, breakpoint deduplication
CLUSTER_TOLERANCE = 1e-12  # plateau value clustering
SHAPE_TOLERANCE = 1e-9  # exact-curve shape checks
MEAN_TOLERANCE = 1e-12  # unbiasedness precondition

# Stability settings
EXACT_SUPPORT_LIMIT = 4096  # max support product for exact expectations
MC_BLOCK_SIZE = 10_000  # samples per replicate RNG stream
DEFAULT_RUNS = 100_000
DEFAULT_DELTA = 0.05

# Figure presets
RUNNING_EXAMPLE = (0.8, 0.75, 0.7, 0.6)
FIGURE_GRID_POINTS = 201
FIG2_REST_P = 0.7
FIG2A_M_VALUES = (1, 2, 3, 4, 5, 6)
FIG2B_N = 10
FIG2B_M = 6
FIG2B_REST_VALUES = (0.5, 0.6, 0.7, 0.8, 0.9)
FIG7_DELTA_GRID = tuple(np.round(np.linspace(0.0, 0.2, 21), 10))
FIG7_N_VALUES = tuple(range(1, 11))
FIG7_IDENTICAL_P = 0.7
FIG7_TRUST_GRID = tuple(np.round(np.linspace(0.5, 0.95, 46), 10))

# Variance grid for the Monte Carlo figures (not stated in the source figures;
# 21 log-spaced values spanning the visible range)
VARIANCE_GRID = tuple(np.logspace(-4, -2, 21))

FIGURE_PRESETS = (
    'fig1a', 'fig1b',
    'fig2a', 'fig2b',
    'fig3a', 'fig3b',
    'fig4a', 'fig4b',
    'fig5a', 'fig5b',
    'fig6a', 'fig6b',
    'fig7a', 'fig7b', 'fig7c', 'fig7d',
)

# Output settings
CSV_FLOAT_FORMAT = "%.17g"
OUTPUT_FORMATS = ('csv', 'json')

# Column schemas
SWEEP_COLUMNS = ['x', 'omega']
SURFACE_COLUMNS = ['x', 'y', 'omega']
MC_COLUMNS = ['x', 'estimate', 'stderr', 'runs']
BOUND_COLUMNS = ['param', 'soo', 'bound_strong', 'bound_weak']
DENSITY_COLUMNS = ['x', 'density']

# CLI exit codes
EXIT_CODES = {
    'ok': 0,
    'validation': 1,
    'capacity': 2,
    'io': 3,
}
