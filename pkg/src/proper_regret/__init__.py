"""Regret bounds for proper losses through moduli of convexity on the simplex."""
from .errors import (
    BudgetError,
    DegenerateError,
    DomainError,
    InfeasiblePairError,
    InputError,
    NonInvertibleError,
    ProperRegretError,
    UnsupportedError,
)
from .simplex import (
    INF,
    PNorm,
    ProbVec,
    SimplexPair,
    as_pnorm,
    holder_conjugate,
    p_norm,
    pair_at_distance,
    sample_simplex,
    simplex_grid,
)
from .generators import (
    GeneratorSpec,
    affine_shift,
    eval_f,
    make_generator,
    subgradient,
    subgradient_check,
    subgradient_check_grid,
)
from .proper_loss import (
    bayes_risk,
    conditional_risk,
    jensen_gap,
    properness_certificate,
    savage_loss,
    savage_risk,
    strong_properness_test,
    surrogate_regret,
)
from .modulus import (
    ModulusCurve,
    SearchBudget,
    inverse_modulus,
    modulus_brute_force,
    modulus_closed_form,
    modulus_curve,
)
from .special import cosine_integral
from .order import (
    CounterexampleOmega,
    OrderConfig,
    OrderProfile,
    counterexample_profile,
    dini_left_derivative,
    order_barrier_check,
    order_profile,
    power_sandwich_check,
    simonenko_order,
)
from .downstream import (
    NoiseMatrix,
    end_to_end_bound,
    noise_correct,
    noisy_label_bound_check,
    plugin_label,
    ranking_regret,
    zero_one_bound_check,
    zero_one_regret,
)

__version__ = "0.1.0"
