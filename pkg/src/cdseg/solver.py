"""Constrained dominant-set solver: replicator dynamics plus peel-off extraction.

The kernel (compiled or numpy, see `kernels`) only iterates the multiplicative
update. On top of it sit:

  * `run_replicator`   - the bare dynamics with a payoff trace,
  * `_converge`        - a guarded truncate-and-polish driver. On graphs with
                         tied weights, strictly-losing vertices can die at a
                         1/t rate (their first-order payoff deficit vanishes at
                         the fixed point), so plain iteration cannot reach exact
                         supports in bounded time. The driver zeroes tiny
                         coordinates and re-runs, accepting the result only if
                         the objective is preserved and the first-order residual
                         does not degrade; otherwise the un-truncated iterate is
                         returned unchanged.
  * `solve_regularized` / `extract_constrained_dominant_sets` - the constrained
                         program and the peel-off loop over a constraint set.

Supports never grow along a trajectory (zero coordinates stay zero), payoffs
never decrease within a kernel phase, and everything is deterministic for a
fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ExtractionError, GraphError, SolverFault
from .graph import choose_alpha, normalize_constraints, regularize, validate_affinity

SIMPLEX_TOL = 1e-12


# =========================================================================
# State validation and configs
# =========================================================================

def check_simplex(x, n: int | None = None) -> np.ndarray:
    """Validate a probability vector: nonnegative, sums to 1 within 1e-12."""
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise SolverFault(f"state must be a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise SolverFault(f"state has dimension {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise SolverFault("state entries must be finite")
    if np.any(v < 0):
        raise SolverFault("state entries must be nonnegative")
    if abs(float(v.sum()) - 1.0) > SIMPLEX_TOL:
        raise SolverFault(f"state sums to {v.sum()!r}, not 1 within {SIMPLEX_TOL}")
    return v


def barycenter(n: int) -> np.ndarray:
    if n < 1:
        raise SolverFault("cannot place a barycenter on an empty simplex")
    return np.full(n, 1.0 / n)


@dataclass(frozen=True)
class ReplicatorConfig:
    """Knobs for the dynamics. Defaults suit graphs up to a few hundred vertices.

    `multi_start` > 0 adds that many jittered barycenter starts per solve and
    keeps the best converged objective; needed when distinct constraint cliques
    have distinct basins. `truncation_ceiling` bounds which coordinates the
    polish step may zero.
    """

    convergence_tol: float = 1e-10
    max_iters: int = 100_000
    support_threshold: float = 1e-7
    polish: bool = True
    max_phases: int = 16
    truncation_ceiling: float = 1e-4
    multi_start: int = 0
    start_jitter: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.convergence_tol > 0:
            raise GraphError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if self.max_iters < 1:
            raise GraphError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 < self.support_threshold < 1:
            raise GraphError(f"support_threshold must be in (0, 1), got {self.support_threshold}")
        if self.multi_start < 0:
            raise GraphError(f"multi_start must be >= 0, got {self.multi_start}")


@dataclass(frozen=True)
class RunResult:
    """One uninterrupted kernel run."""

    x: np.ndarray
    payoffs: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True)
class Solution:
    """A converged (or budget-exhausted) state of one constrained program."""

    x: np.ndarray
    support: tuple[int, ...]
    objective: float
    kkt: float
    converged: bool
    iterations: int
    trace: tuple[np.ndarray, ...]
    truncations: int
    alpha: float


@dataclass(frozen=True)
class Cluster:
    """One extracted coherent group, in original vertex indices."""

    support: tuple[int, ...]
    characteristic: np.ndarray
    payoff: float
    contains_constraints: tuple[int, ...]
    kkt: float


@dataclass(frozen=True)
class ExtractionResult:
    clusters: tuple[Cluster, ...]
    iterations_total: int
    alphas: tuple[float, ...]

    def union_support(self) -> tuple[int, ...]:
        out: set[int] = set()
        for c in self.clusters:
            out.update(c.support)
        return tuple(sorted(out))


# =========================================================================
# Bare dynamics
# =========================================================================

def _validate_payoff(w) -> np.ndarray:
    m = np.ascontiguousarray(w, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SolverFault(f"payoff matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise SolverFault("payoff entries must be finite")
    if np.any(m < 0):
        raise SolverFault("payoff entries must be nonnegative; apply the shift first")
    return m


def replicator_step(w, x) -> np.ndarray:
    """One multiplicative update. Vertex states (single-coordinate support) are
    fixed points and pass through unchanged."""
    m = _validate_payoff(w)
    v = check_simplex(x, m.shape[0])
    if np.count_nonzero(v) == 1:
        return v.copy()
    y = m @ v
    den = float(v @ y)
    if not den > 0.0:
        raise SolverFault(f"nonpositive payoff denominator {den}")
    return v * y / den


def run_replicator(w, x0, config: ReplicatorConfig | None = None) -> RunResult:
    """Iterate to stagnation: stop when the max-norm step drops below
    convergence_tol or the iteration budget runs out (reported in `converged`).

    The payoff trace covers every visited iterate including the last; it is
    nondecreasing up to float roundoff (symmetric payoff matrices).
    """
    if config is None:
        config = ReplicatorConfig()
    m = _validate_payoff(w)
    v = check_simplex(x0, m.shape[0])
    try:
        x, payoffs, iters, converged = kernels.replicator_run(
            m, v, config.convergence_tol, config.max_iters
        )
    except ValueError as exc:
        raise SolverFault(str(exc)) from None
    return RunResult(x=x, payoffs=payoffs, iterations=iters, converged=converged)


def kkt_residual(affinity, constraints, alpha: float, x, support_threshold: float = 1e-7) -> float:
    """Max first-order violation of the penalized program at `x`.

    Support coordinates must sit at the common payoff level (penalized by alpha
    outside the constraint set); non-support coordinates must not beat it.
    """
    a = validate_affinity(affinity)
    n = a.shape[0]
    members = set(normalize_constraints(constraints, n))
    v = check_simplex(x, n)
    ax = a @ v
    outside = np.array([i not in members for i in range(n)])
    lam = float(v @ ax) - float(alpha) * float(v[outside] @ v[outside])
    support = v > support_threshold
    worst = 0.0
    for i in range(n):
        if support[i]:
            level = ax[i] - (alpha * v[i] if outside[i] else 0.0)
            worst = max(worst, abs(level - lam))
        else:
            worst = max(worst, max(0.0, ax[i] - lam))
    return float(worst)


# =========================================================================
# Guarded truncate-and-polish driver
# =========================================================================

_POLISH_ITERS = 20_000


def _converge(w, x0, config, objective_fn, residual_fn):
    """Run the kernel to stagnation, then repeatedly try to zero the tiny tail.

    Truncation is attempted whether or not the main budget stagnated: losing
    coordinates with a vanishing first-order deficit shrink like 1/t, so a
    bounded run may leave them small but alive either way. Each polish re-run
    gets a small extra allowance beyond config.max_iters (iterations are
    reported truthfully). A truncation is kept only when the objective is
    preserved (it normally rises: the removed coordinates were strictly
    losing) and the first-order residual does not get worse; otherwise the
    honest un-truncated state is returned.
    """
    segments: list[np.ndarray] = []
    x = np.array(x0, dtype=np.float64)
    iterations = 0
    truncations = 0
    converged = False
    main_budget = config.max_iters
    polish_budget = min(config.max_iters, _POLISH_ITERS)

    for _ in range(max(1, config.max_phases)):
        if main_budget > 0:
            res = run_replicator(w, x, replace(config, max_iters=main_budget))
            segments.append(res.payoffs)
            iterations += res.iterations
            main_budget -= res.iterations
            x = res.x
            converged = res.converged
        if not config.polish:
            break
        tiny = (x > 0.0) & (x < config.truncation_ceiling)
        if not np.any(tiny) or np.all(tiny):
            break
        trial = x.copy()
        trial[tiny] = 0.0
        trial /= trial.sum()
        res2 = run_replicator(w, trial, replace(config, max_iters=polish_budget))
        obj_before = objective_fn(x)
        obj_after = objective_fn(res2.x)
        keep = obj_after >= obj_before - 1e-9 * max(1.0, abs(obj_before))
        if keep:
            keep = residual_fn(res2.x) <= max(residual_fn(x), 1e-10)
        if not keep:
            break
        segments.append(res2.payoffs)
        iterations += res2.iterations
        x = res2.x
        converged = res2.converged
        truncations += 1

    return x, tuple(segments), iterations, converged, truncations


def _support_of(x, threshold) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(x > threshold))


def _jittered_starts(n, config) -> list[np.ndarray]:
    starts = [barycenter(n)]
    if config.multi_start > 0:
        rng = np.random.default_rng(config.seed)
        for _ in range(config.multi_start):
            jitter = 1.0 + config.start_jitter * rng.uniform(-1.0, 1.0, size=n)
            v = jitter / jitter.sum()
            starts.append(v)
    return starts


def solve_regularized(
    affinity,
    constraints,
    alpha: float | None = None,
    margin: float | None = None,
    config: ReplicatorConfig | None = None,
    x0=None,
) -> Solution:
    """Maximize the penalized payoff from the barycenter (optionally multi-start).

    alpha defaults to the complement's top eigenvalue plus a margin, which
    guarantees every local solution touches the constraint set. With
    multi_start the best converged objective wins; ties resolve to the first
    start, so results are deterministic for a fixed seed.
    """
    if config is None:
        config = ReplicatorConfig()
    a = validate_affinity(affinity)
    members = normalize_constraints(constraints, a.shape[0])
    if alpha is None:
        alpha = choose_alpha(a, members, margin=margin)
    payoff = regularize(a, members, alpha)
    w = payoff.effective()
    n = a.shape[0]

    outside = np.ones(n, dtype=bool)
    outside[list(members)] = False

    def objective(x):
        return float(x @ (a @ x)) - payoff.alpha * float(x[outside] @ x[outside])

    def residual(x):
        return kkt_residual(a, members, payoff.alpha, x, config.support_threshold)

    starts = [check_simplex(x0, n)] if x0 is not None else _jittered_starts(n, config)
    best = None
    for start in starts:
        x, trace, iters, converged, truncs = _converge(w, start, config, objective, residual)
        sol = Solution(
            x=x,
            support=_support_of(x, config.support_threshold),
            objective=objective(x),
            kkt=residual(x),
            converged=converged,
            iterations=iters,
            trace=trace,
            truncations=truncs,
            alpha=payoff.alpha,
        )
        if best is None:
            best = sol
        elif (sol.converged, sol.objective) > (best.converged, best.objective + 1e-12):
            best = sol
    return best


def enumerate_local_solutions(
    affinity,
    config: ReplicatorConfig | None = None,
    starts: int = 16,
    seed: int | None = None,
) -> list[Solution]:
    """Distinct converged solutions of the unpenalized program via multi-start.

    Starts are the barycenter plus `starts` jittered copies; solutions are
    deduplicated by support and sorted by objective (descending). The graph
    must contain at least one edge, otherwise the payoff is identically zero.
    """
    if config is None:
        config = ReplicatorConfig()
    a = validate_affinity(affinity)
    n = a.shape[0]
    if not np.any(a > 0):
        raise SolverFault("graph has no edges; the unconstrained payoff is identically zero")
    run_cfg = replace(
        config,
        multi_start=starts,
        seed=config.seed if seed is None else seed,
    )
    full = tuple(range(n))

    def objective(x):
        return float(x @ (a @ x))

    def residual(x):
        return kkt_residual(a, full, 0.0, x, config.support_threshold)

    seen: dict[tuple[int, ...], Solution] = {}
    for start in _jittered_starts(n, run_cfg):
        x, trace, iters, converged, truncs = _converge(a, start, run_cfg, objective, residual)
        sol = Solution(
            x=x,
            support=_support_of(x, run_cfg.support_threshold),
            objective=objective(x),
            kkt=residual(x),
            converged=converged,
            iterations=iters,
            trace=trace,
            truncations=truncs,
            alpha=0.0,
        )
        prev = seen.get(sol.support)
        if prev is None or sol.objective > prev.objective:
            seen[sol.support] = sol
    return sorted(seen.values(), key=lambda s: -s.objective)


# =========================================================================
# Peel-off extraction
# =========================================================================

def extract_constrained_dominant_sets(
    affinity,
    constraints,
    config: ReplicatorConfig | None = None,
    alpha: float | None = None,
    margin: float | None = None,
) -> ExtractionResult:
    """Peel clusters off the graph until every constraint vertex is covered.

    Each round solves the penalized program on the surviving subgraph with the
    remaining constraints (alpha recomputed per round unless fixed), records
    the support as a cluster, and deletes it. A round whose support misses the
    remaining constraints would never terminate, so it aborts with diagnostics.
    """
    a = validate_affinity(affinity)
    n = a.shape[0]
    members = normalize_constraints(constraints, n)
    remaining = set(members)
    active = list(range(n))
    clusters: list[Cluster] = []
    alphas: list[float] = []
    iterations_total = 0

    round_no = 0
    while remaining:
        round_no += 1
        pos = {v: k for k, v in enumerate(active)}
        sub = a[np.ix_(active, active)]
        sub_constraints = [pos[v] for v in sorted(remaining)]
        sol = solve_regularized(sub, sub_constraints, alpha=alpha, margin=margin, config=config)
        support_orig = tuple(sorted(active[k] for k in sol.support))
        covered = remaining.intersection(support_orig)
        if not covered:
            raise ExtractionError(
                f"round {round_no}: extracted support {support_orig} misses the remaining "
                f"constraints {sorted(remaining)} (alpha={sol.alpha!r}, kkt={sol.kkt!r}, "
                f"converged={sol.converged}); the penalty should make this impossible"
            )
        characteristic = np.zeros(n)
        for k, v in enumerate(active):
            characteristic[v] = sol.x[k]
        clusters.append(
            Cluster(
                support=support_orig,
                characteristic=characteristic,
                payoff=float(characteristic @ (a @ characteristic)),
                contains_constraints=tuple(sorted(covered)),
                kkt=sol.kkt,
            )
        )
        alphas.append(sol.alpha)
        iterations_total += sol.iterations
        remaining -= covered
        support_set = set(support_orig)
        active = [v for v in active if v not in support_set]
        if remaining and not active:
            raise ExtractionError(
                f"round {round_no}: graph exhausted with constraints {sorted(remaining)} uncovered"
            )

    return ExtractionResult(
        clusters=tuple(clusters),
        iterations_total=iterations_total,
        alphas=tuple(alphas),
    )
