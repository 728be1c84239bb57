"""Radii of random and optimal sections of l_p-ellipsoids."""

from .ellipsoid import (
    Ellipsoid,
    ExponentP,
    Semiaxes,
    best_s_term_error,
    dual_exponent,
    ellipsoid_gauge,
    extremal_sparse_witness,
    lorentz_norm,
    polynomial_semiaxes,
    quasi_norm,
    sparse_approximation_report,
    support_function,
)
from .gaussian import (
    a_k,
    escape_bound,
    expected_sup_ellipsoid,
    gamma_q,
    gaussian_norm_mc,
    khintchine_bounds,
    mean_width_rounded,
    mstar_bound,
    support_function_intersection,
    weighted_norm_mc,
)
from .gelfand import (
    GelfandQuery,
    decay_exponents,
    gelfand_exact_tail,
    gelfand_upper_quasi,
    gelfand_upper_thmA,
    lorentz_decay_exponent,
    min_radius,
    operator_norm,
)
from .recovery import (
    QuasiConstants,
    decode_l1,
    decode_lp,
    decode_lp_irls,
    gaussian_rip_condition,
    lemma32_sandwich,
    recovery_radius_upper,
    rip_exact,
    rip_lower_mc,
)
from .sections import (
    Subspace,
    coordinate_tail_subspace,
    kernel_basis,
    large_coordinate_witness,
    lower_bound_witness,
    radius_maximize,
    radius_oracle_bruteforce,
    radius_p2_exact,
    random_section_radius_trials,
    sample_gaussian_info,
)

__version__ = "0.1.0"
