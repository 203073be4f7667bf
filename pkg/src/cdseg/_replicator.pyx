# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled replicator kernel; semantics mirror _replicator_np.replicator_run."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def replicator_run(object w_obj, object x0_obj, double tol, long max_iters):
    """Iterate x_i <- x_i (Wx)_i / x'Wx until the max-norm step falls below tol.

    Returns (x, payoffs, iterations, converged); raises ValueError on a
    nonpositive payoff denominator. See the numpy twin for the full contract.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] w = np.ascontiguousarray(w_obj, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] x = np.array(x0_obj, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j, nonzero = 0
    cdef long it = 0
    cdef bint converged = False
    cdef double den, final, delta, d, acc

    if w.shape[0] != n or w.shape[1] != n:
        raise ValueError("payoff matrix and state dimensions disagree")

    for i in range(n):
        if x[i] != 0.0:
            nonzero += 1
    if nonzero == 1:
        # Simplex vertices are fixed points even with zero payoff.
        acc = 0.0
        for i in range(n):
            d = 0.0
            for j in range(n):
                d += w[i, j] * x[j]
            acc += x[i] * d
        return x, np.array([acc]), 0, True

    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] payoffs = np.empty(max_iters + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] y = np.empty(n)

    while it < max_iters:
        den = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += w[i, j] * x[j]
            y[i] = acc
            den += x[i] * acc
        if not den > 0.0:
            raise ValueError(f"nonpositive payoff denominator {den}; shift the payoff matrix")
        payoffs[it] = den
        delta = 0.0
        for i in range(n):
            acc = x[i] * y[i] / den
            d = acc - x[i]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
            x[i] = acc
        it += 1
        if delta < tol:
            converged = True
            break

    final = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += w[i, j] * x[j]
        final += x[i] * acc
    if not final > 0.0:
        raise ValueError(f"nonpositive payoff denominator {final}; shift the payoff matrix")
    payoffs[it] = final
    return x, payoffs[: it + 1].copy(), it, converged
