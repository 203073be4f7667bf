"""Pure numpy replicator kernel; contract mirrored by the compiled twin.

Kept free of package imports so both backends stay drop-in interchangeable.
"""

import numpy as np


def replicator_run(w, x0, tol, max_iters):
    """Iterate x_i <- x_i (Wx)_i / x'Wx until the max-norm step falls below tol.

    Returns (x, payoffs, iterations, converged). `payoffs` holds x'Wx for every
    visited iterate including the final one (length iterations + 1). Raises
    ValueError if the payoff denominator is not strictly positive, which means
    the payoff matrix was not shifted into nonnegative range.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    x = np.array(x0, dtype=np.float64)
    max_iters = int(max_iters)
    if np.count_nonzero(x) == 1:
        # Simplex vertices are fixed points of the multiplicative update even
        # when their payoff is zero, so return before the positivity check.
        return x, np.array([float(x @ (w @ x))]), 0, True
    payoffs = np.empty(max_iters + 1)
    converged = False
    it = 0
    while it < max_iters:
        y = w @ x
        den = float(x @ y)
        if not den > 0.0:
            raise ValueError(f"nonpositive payoff denominator {den}; shift the payoff matrix")
        payoffs[it] = den
        x_new = x * y / den
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        it += 1
        if delta < tol:
            converged = True
            break
    final = float(x @ (w @ x))
    if not final > 0.0:
        raise ValueError(f"nonpositive payoff denominator {final}; shift the payoff matrix")
    payoffs[it] = final
    return x, payoffs[: it + 1].copy(), it, converged
