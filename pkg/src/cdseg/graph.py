"""Affinity graphs: validation, Gaussian kernels, spectral bounds, regularization, IO.

All affinity matrices are dense float64 numpy arrays that are square, symmetric,
nonnegative, and zero on the diagonal. `validate_affinity` is the single gate
enforcing that contract; everything downstream assumes it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import GraphError

# Default per-instance search grid for the kernel bandwidth sweep.
DEFAULT_SIGMA_GRID = (0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2)

# Power-iteration settings for the top-eigenvalue bound.
_POWER_TOL = 1e-10
_POWER_MAX_ITERS = 10_000
_RESIDUAL_TOL = 1e-8


# =========================================================================
# Validation
# =========================================================================

def validate_affinity(entries) -> np.ndarray:
    """Return a float64 C-contiguous copy of `entries` after checking the contract.

    Rejects non-square, non-finite, asymmetric, negative, or nonzero-diagonal
    input. The returned array is safe to hand to every other function here.
    """
    a = np.ascontiguousarray(entries, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphError(f"affinity must be a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise GraphError("affinity must have at least one vertex")
    if not np.all(np.isfinite(a)):
        raise GraphError("affinity entries must be finite")
    if not np.array_equal(a, a.T):
        raise GraphError("affinity must be symmetric")
    if np.any(a < 0):
        raise GraphError("affinity entries must be nonnegative")
    if np.any(np.diagonal(a) != 0):
        raise GraphError("affinity diagonal must be exactly zero")
    return a


def normalize_constraints(constraints, n: int) -> tuple[int, ...]:
    """Validate a constraint vertex set against a graph of `n` vertices.

    Members must be unique integers in [0, n); the set must be non-empty.
    Returned in the caller's order (order is not semantically meaningful but
    keeping it makes CLI output predictable).
    """
    members = []
    seen = set()
    for c in constraints:
        i = int(c)
        if i != c:
            raise GraphError(f"constraint vertex {c!r} is not an integer")
        if not 0 <= i < n:
            raise GraphError(f"constraint vertex {i} outside [0, {n})")
        if i in seen:
            raise GraphError(f"duplicate constraint vertex {i}")
        seen.add(i)
        members.append(i)
    if not members:
        raise GraphError("constraint set must be non-empty")
    return tuple(members)


# =========================================================================
# Gaussian affinities
# =========================================================================

@dataclass(frozen=True)
class SingleSigma:
    """Fixed kernel bandwidth."""

    value: float


@dataclass(frozen=True)
class SelfTuning:
    """Per-point bandwidth from the mean distance to the nearest neighbors."""

    neighbors: int = 7


@dataclass(frozen=True)
class BestSigma:
    """Per-instance grid sweep; selection needs an outcome signal (see pipelines)."""

    grid: tuple = field(default=DEFAULT_SIGMA_GRID)


SigmaStrategy = SingleSigma | SelfTuning | BestSigma


def _pairwise_distances(features: np.ndarray) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise GraphError(f"feature table must be 2-D, got shape {feats.shape}")
    if feats.shape[0] < 1:
        raise GraphError("feature table must have at least one row")
    if not np.all(np.isfinite(feats)):
        raise GraphError("feature entries must be finite")
    if feats.shape[0] == 1:
        return np.zeros((1, 1))
    # Condensed form then squareform keeps the matrix exactly symmetric.
    return squareform(pdist(feats))


def self_tuning_sigmas(features, neighbors: int = 7) -> np.ndarray:
    """Per-point bandwidths: mean Euclidean distance to the `neighbors` nearest points.

    `neighbors` is clipped to n-1. Zero sigmas (duplicated points) are floored
    at 1e-12 with a warning so the kernel stays finite.
    """
    dist = _pairwise_distances(features)
    n = dist.shape[0]
    if n == 1:
        return np.array([1e-12])
    k = int(neighbors)
    if k < 1:
        raise GraphError(f"neighbor count must be >= 1, got {neighbors}")
    k = min(k, n - 1)
    sigmas = np.empty(n)
    for i in range(n):
        others = np.delete(dist[i], i)
        others.sort()
        sigmas[i] = others[:k].mean()
    if np.any(sigmas <= 0):
        warnings.warn(
            "degenerate self-tuning bandwidths (duplicate points); flooring at 1e-12",
            RuntimeWarning,
        )
        sigmas = np.maximum(sigmas, 1e-12)
    return sigmas


def build_gaussian_affinity(features, strategy) -> np.ndarray:
    """Gaussian affinity over feature rows: exp(-d^2 / (2 sigma^2)), zero diagonal.

    With SelfTuning the denominator is sigma_i * sigma_j instead of 2 sigma^2.
    BestSigma is refused here: picking "best" requires an outcome signal, which
    only the evaluation-aware pipelines have; they sweep the grid and call this
    once per candidate value.
    """
    dist = _pairwise_distances(features)
    if isinstance(strategy, SingleSigma):
        sigma = float(strategy.value)
        if not sigma > 0:
            raise GraphError(f"sigma must be positive, got {strategy.value}")
        a = np.exp(-(dist**2) / (2.0 * sigma * sigma))
    elif isinstance(strategy, SelfTuning):
        sigmas = self_tuning_sigmas(features, strategy.neighbors)
        a = np.exp(-(dist**2) / np.outer(sigmas, sigmas))
    elif isinstance(strategy, BestSigma):
        raise GraphError(
            "BestSigma needs an outcome signal to select from its grid; "
            "sweep the grid via the segmentation pipeline instead"
        )
    else:
        raise GraphError(f"unknown sigma strategy: {strategy!r}")
    np.fill_diagonal(a, 0.0)
    return validate_affinity(a)


# =========================================================================
# Spectral bound and regularization
# =========================================================================

def dominant_eigenpair(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and eigenvector of a symmetric nonnegative matrix.

    Shifted power iteration from the normalized all-ones vector (deterministic);
    stops when the Rayleigh quotient moves less than 1e-10 relative. If 10k
    iterations do not converge, or the residual check fails, falls back to a
    dense symmetric eigendecomposition.
    """
    m = np.asarray(matrix, dtype=np.float64)
    dim = m.shape[0]
    if dim == 0:
        raise GraphError("empty matrix has no eigenpair")
    if dim == 1:
        return float(m[0, 0]), np.array([1.0])
    shift = float(np.abs(m).sum(axis=1).max())
    if shift == 0.0:
        return 0.0, np.full(dim, 1.0 / np.sqrt(dim))

    v = np.full(dim, 1.0 / np.sqrt(dim))
    rayleigh_prev = np.inf
    converged = False
    for _ in range(_POWER_MAX_ITERS):
        w = m @ v + shift * v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break  # start vector in the null space of the shifted matrix
        v = w / norm
        rayleigh = float(v @ (m @ v))
        if abs(rayleigh - rayleigh_prev) <= _POWER_TOL * max(1.0, abs(rayleigh)):
            converged = True
            break
        rayleigh_prev = rayleigh

    if converged:
        lam = float(v @ (m @ v))
        residual = float(np.max(np.abs(m @ v - lam * v)))
        if residual <= _RESIDUAL_TOL * max(1.0, abs(lam)):
            return lam, v

    eigvals, eigvecs = np.linalg.eigh(m)
    return float(eigvals[-1]), eigvecs[:, -1].copy()


def complement_top_eigenvalue(affinity, constraints) -> float:
    """Largest eigenvalue of the affinity restricted to vertices outside the constraints.

    This is the regularization threshold: any penalty strictly above it forces
    every local solution's support to meet the constraint set. Empty complement
    returns 0.0.
    """
    a = validate_affinity(affinity)
    members = set(normalize_constraints(constraints, a.shape[0]))
    outside = [i for i in range(a.shape[0]) if i not in members]
    if not outside:
        return 0.0
    sub = a[np.ix_(outside, outside)]
    lam, _ = dominant_eigenpair(sub)
    return lam


def choose_alpha(affinity, constraints, margin: float | None = None) -> float:
    """Penalty just above the complement's top eigenvalue.

    Default margin is 1e-4 * max(1, bound); pass a larger margin for faster
    extinction of non-solution vertices when exactness of timing matters.
    """
    lam = complement_top_eigenvalue(affinity, constraints)
    if margin is None:
        margin = 1e-4 * max(1.0, lam)
    margin = float(margin)
    if not margin > 0:
        raise GraphError(f"margin must be positive, got {margin}")
    return lam + margin


@dataclass(frozen=True)
class RegularizedPayoff:
    """Penalized payoff for the constrained program, shifted to stay nonnegative.

    The effective matrix is  base + shift  off the diagonal, `shift` on the
    diagonal for constraint vertices, and `shift - alpha` elsewhere. With the
    default shift == alpha the smallest diagonal entry is exactly zero, which
    keeps payoff magnitudes small. The shift changes neither fixed points nor
    converged supports of the dynamics; alpha does the steering.
    """

    base: np.ndarray
    constraints: tuple[int, ...]
    alpha: float
    shift: float

    def effective(self) -> np.ndarray:
        w = self.base + self.shift
        diag = np.full(self.base.shape[0], self.shift - self.alpha)
        diag[list(self.constraints)] = self.shift
        np.fill_diagonal(w, diag)
        return w


def regularize(affinity, constraints, alpha: float, shift: float | None = None) -> RegularizedPayoff:
    """Bundle affinity + constraints + penalty into a nonnegative payoff."""
    a = validate_affinity(affinity)
    members = normalize_constraints(constraints, a.shape[0])
    alpha = float(alpha)
    if not alpha > 0:
        raise GraphError(f"alpha must be positive, got {alpha}")
    if shift is None:
        shift = alpha
    shift = float(shift)
    if shift < alpha:
        raise GraphError(f"shift must be >= alpha to keep the payoff nonnegative, got {shift} < {alpha}")
    return RegularizedPayoff(base=a, constraints=members, alpha=alpha, shift=shift)


# =========================================================================
# Serialization
# =========================================================================

def save_affinity_text(affinity, path) -> None:
    """Plain-text matrix: first line is n, then n whitespace-separated rows."""
    a = validate_affinity(affinity)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_affinity_text(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise GraphError(f"{path}: empty affinity file")
    try:
        n = int(lines[0])
    except ValueError:
        raise GraphError(f"{path}: first line must be the vertex count") from None
    if len(lines) != n + 1:
        raise GraphError(f"{path}: expected {n} rows after the header, got {len(lines) - 1}")
    try:
        rows = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise GraphError(f"{path}: non-numeric entry ({exc})") from None
    if any(len(r) != n for r in rows):
        raise GraphError(f"{path}: every row must have {n} entries")
    return validate_affinity(np.array(rows))


def save_affinity_edges(affinity, path) -> None:
    """Edge list `i j w`, 0-based, one line per undirected edge (i < j, w > 0)."""
    a = validate_affinity(affinity)
    with open(path, "w") as fh:
        n = a.shape[0]
        for i in range(n):
            for j in range(i + 1, n):
                if a[i, j] != 0.0:
                    fh.write(f"{i} {j} {a[i, j]:.17g}\n")


def load_affinity_edges(path, n: int | None = None) -> np.ndarray:
    """Parse an `i j w` edge list into a dense affinity.

    Vertices are 0-based; the graph is undirected, so a pair appearing twice
    (in either orientation) is rejected as a duplicate, as are self loops and
    negative weights. Vertex count defaults to max index + 1.
    """
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            ln = raw.strip()
            if not ln:
                continue
            parts = ln.split()
            if len(parts) != 3:
                raise GraphError(f"{path}:{lineno}: expected 'i j w', got {ln!r}")
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-numeric edge {ln!r}") from None
            if i < 0 or j < 0:
                raise GraphError(f"{path}:{lineno}: vertex ids must be >= 0")
            if i == j:
                raise GraphError(f"{path}:{lineno}: self loop {i}")
            if w < 0:
                raise GraphError(f"{path}:{lineno}: negative weight {w}")
            edges.append((i, j, w))
    if not edges:
        raise GraphError(f"{path}: empty edge list")
    max_idx = max(max(i, j) for i, j, _ in edges)
    if n is None:
        n = max_idx + 1
    elif max_idx >= n:
        raise GraphError(f"{path}: vertex {max_idx} outside declared size {n}")
    a = np.zeros((n, n))
    seen = set()
    for i, j, w in edges:
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"{path}: duplicate edge {i} {j}")
        seen.add(key)
        a[i, j] = w
        a[j, i] = w
    return validate_affinity(a)


def load_features_csv(path) -> np.ndarray:
    """Numeric CSV, one row per vertex."""
    try:
        feats = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise GraphError(f"{path}: bad feature CSV ({exc})") from None
    if feats.size == 0:
        raise GraphError(f"{path}: empty feature table")
    return feats
