"""Rate- and noise-induced tipping in the ramped saddle system."""

__version__ = "0.1.0"

from .core import (
    ATTRACTOR,
    R_CRITICAL,
    X_MAX,
    Y_START,
    SystemParams,
    Trajectory,
    classify_deterministic,
    find_critical_rate,
    integrate_deterministic,
    ramp,
)
from .errors import *  # noqa: F401,F403
from .manifolds import (
    find_intersection,
    heteroclinic,
    section_curve_stable,
    section_curve_unstable,
    seed_unstable,
    shoot_to_section,
)
from .mpp import (
    S1,
    S2,
    fw_action,
    invariant_plane_hamiltonian,
    linearize_saddle,
    mpp_field,
    mpp_jacobian,
    normalized_action,
    symmetry_map,
)
from .sde import SimConfig, em_step, run_ensemble, simulate_realization, threshold_curve
from .stats import (
    case12_action,
    case_barriers,
    converge_tip_distribution,
    estimate_tip_time,
    fd_bins,
    kde_mode,
    kramers_time,
    mode_path,
    power_law_fit,
)
