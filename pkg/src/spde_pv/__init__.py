"""Power-variation laboratory for parabolic SPDEs with fractional spectral Laplacian
on boxes: spectral simulation, normalized variation estimators, and the limit theory
they converge to."""

from ._version import __version__
from .combinatorics import alpha_permanent, complete_bell, cycle_count, gaussian_even_moment
from .harness import (
    ConvergenceRow,
    ExperimentSpec,
    HolderEstimate,
    LimitReport,
    estimate_holder,
    report_constants,
    run_convergence,
)
from .limits import (
    MonteCarloEstimate,
    Regime,
    RegimeParams,
    expected_hr_norm_sq,
    holder_exponent,
    increment_variance,
    k_r,
    limit_constant_even_power,
    limit_process_general_sigma,
    mu_rF_estimate,
    tau_n,
)
from .simulator import (
    CoefficientPath,
    ConstantSigma,
    FieldSigma,
    SimConfig,
    StateSigma,
    evaluate_field,
    hr_norm,
    increment_hr_norm,
    sample_additive_increments,
    simulate,
    simulate_additive,
    simulate_field_sigma,
)
from .spectrum import (
    DomainSpec,
    EigenPair,
    ZetaValue,
    cross_inner_product,
    enumerate_eigenpairs,
    eigenvalues,
    greens_kernel,
    spectral_zeta,
    weyl_constant,
)
from .variations import (
    VariationRequest,
    VariationSeries,
    compute_variation,
    f_variation,
    general_F_variation,
    power_variation,
)

__all__ = [name for name in dir() if not name.startswith("_")]
