"""Principal eigenvalues of elliptic operators via Dirichlet exhaustion."""

from ._eigendrift import (
    __version__,
    classify,
    ergodic_identity,
    eval_expression,
    feynman_kac_slope,
    lambda_curve,
    lambda_star,
    solve_hjb,
)

__all__ = [
    "__version__",
    "classify",
    "ergodic_identity",
    "eval_expression",
    "feynman_kac_slope",
    "lambda_curve",
    "lambda_star",
    "solve_hjb",
]
