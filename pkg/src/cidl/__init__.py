"""Temporal trace dictionary learning for fluorescence movies.

Learns a dictionary of temporal traces from a video cube by alternating
spatially-filtered reweighted-l1 sparse coding over pixels with a
penalized non-negative dictionary update.  Includes a synthetic movie
simulator, recovery metrics, binary tensor I/O, and a CLI.
"""

from .config import (
    KernelConfig,
    RunConfig,
    kernel_from_config,
    make_gaussian_kernel,
    parse_config,
    serialize_config,
)
from .dictupdate import (
    DictUpdateOptions,
    dict_gradient,
    dict_objective,
    rebalance_scales,
    update_dictionary,
)
from .errors import (
    CidlError,
    ConfigError,
    DimensionError,
    TensorFormatError,
    ValidationError,
)
from .learn import (
    LearnDiagnostics,
    LearnResult,
    component_energies,
    default_prune_threshold,
    init_dictionary,
    learn,
    prune_report,
)
from .metrics import MatchReport, energy_ratio, match_components
from .model import (
    CoefficientMaps,
    DataCube,
    Dictionary,
    ModelParams,
    SpatialKernel,
    WeightMaps,
    full_objective,
    pixel_objective,
    residual,
)
from .simulate import (
    GroundTruth,
    SimConfig,
    ar_filter,
    gen_spatial_map,
    gen_spike_train,
    simulate_movie,
)
from .sparse import (
    LassoSolverOptions,
    convolve2d_same,
    rwl1_sf_sweep,
    solve_weighted_nn_lasso,
    update_weights,
)
from .tensorio import read_tensor, write_tensor

__version__ = "0.1.0"
