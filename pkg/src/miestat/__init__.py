"""Measurement-induced entanglement statistics for Luttinger liquids.

Two engines for the same observable: closed-form cylinder partition
functions (`cft`, `analytics`) and exact Born-sampled free-fermion
simulation of the XX chain (`lattice`), tied together by the sweep
harness (`harness`, `cli`).
"""

__version__ = "0.1.0"

from .analytics import (
    AsymptoticCumulant,
    CumulantSet,
    DistributionCurve,
    ForcedMieCurve,
    WindingSpec,
    asymptotic_cumulant,
    born_measure,
    cgf_cumulant,
    cumulant_set,
    die,
    forced_mie,
    forced_mie_curve,
    forced_mie_derivative,
    lognormal_density,
    mie_cumulant,
    mie_distribution,
    winding_continued,
    winding_direct,
)
from .cft import (
    BoundaryMismatch,
    CFTParams,
    RingGeometry,
    cross_ratio,
    dedekind_eta,
    elliptic_k,
    h_of_zeta,
    theta_winding,
    z_cylinder,
)
from .config import ExperimentConfig, parse_config
from .errors import ConvergenceError, ImpossibleOutcomeError
from .harness import (
    emit_report,
    run_die,
    run_distribution,
    run_sweep,
    solve_geometry,
)
from .lattice import (
    TrajectoryEngine,
    entanglement_entropy,
    ground_state_correlation,
    measure_site,
    sample_trajectory,
    statevector_oracle,
)
from .stats import entropy_histogram, jackknife_errors, k_statistics
