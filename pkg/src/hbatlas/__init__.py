"""Certificate-based cartography of heavy-ball tunings.

For each (gamma, beta) the package searches for two kinds of verifiable
evidence on the class of L-smooth mu-strongly-convex functions: a
quadratic-plus-linear Lyapunov certificate (convergence) or a cycle
certificate (non-convergence), in dimension 1 via an exact linear program
over sort permutations and in dimension 2 on the roots of unity.  The
atlas sweeps the tuning plane, classifies every cell as lyapunov / cycle /
unknown, and exports maps and certificates.
"""

from .core import (ClassParams, DataPoint, HbState, InconsistentDataError,
                   IndeterminateError, InvalidClassError, NotInClassError,
                   PiecewiseModel1D, Tuning, TrajectoryBehavior,
                   classify_trajectory, hb_step, interp_residual,
                   reconstruct_function_1d, simulate_hb)
from .quadratic_rate import rate_map, rate_over_class, spectral_radius_eigen
from .lp import LpProblem, LpResult, LpStatus, solve_lp
from .cycle_lp import (CycleCertificate, Permutation, build_lp,
                       circulant_gradient, conjectured_permutation,
                       cycle_exists_dim1, lp_feasible_sigma,
                       reduced_permutations, replay_error,
                       verify_cycle_certificate)
from .dim2_cycles import RootsCycle, dim2_region, roots_cycle_feasible
from .lyapunov_pep import (LmiProblem, LyapunovCertificate, best_rate,
                           build_lmi, lyapunov_feasible,
                           mc_certificate_check, sdp_feasible,
                           verify_certificate)
from .atlas import (Classification, ConflictError, GridSpec, RegionGrid,
                    SweepConfig, border_bisect, classify_point, cycle_map,
                    export_csv, export_json, import_json, lyapunov_map,
                    permutation_census_map, render_png, render_svg, sweep)

__version__ = "0.1.0"

__all__ = [
    "ClassParams", "Tuning", "DataPoint", "HbState", "PiecewiseModel1D",
    "TrajectoryBehavior", "hb_step", "interp_residual",
    "reconstruct_function_1d", "simulate_hb", "classify_trajectory",
    "InvalidClassError", "NotInClassError", "InconsistentDataError",
    "IndeterminateError",
    "spectral_radius_eigen", "rate_over_class", "rate_map",
    "LpProblem", "LpResult", "LpStatus", "solve_lp",
    "Permutation", "CycleCertificate", "circulant_gradient",
    "conjectured_permutation", "reduced_permutations", "build_lp",
    "lp_feasible_sigma", "cycle_exists_dim1", "replay_error",
    "verify_cycle_certificate",
    "RootsCycle", "roots_cycle_feasible", "dim2_region",
    "LmiProblem", "LyapunovCertificate", "build_lmi", "sdp_feasible",
    "lyapunov_feasible", "verify_certificate", "best_rate",
    "mc_certificate_check",
    "GridSpec", "Classification", "RegionGrid", "SweepConfig",
    "classify_point", "sweep", "cycle_map", "lyapunov_map",
    "permutation_census_map", "border_bisect", "export_csv", "export_json",
    "import_json", "render_svg", "render_png", "ConflictError",
]
