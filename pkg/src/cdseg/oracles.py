"""Combinatorial ground truth: group weights, the dominant-set test, maximal
cliques, and the sampling estimate of the penalty threshold.

These are deliberately direct transcriptions of the definitions (exponential
where the definitions are), used to validate the fast solver rather than to be
fast themselves.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import GraphError
from .graph import normalize_constraints, validate_affinity

_WEIGHT_GROUP_CAP = 15
_DOMINANT_EXHAUSTIVE_CAP = 10
_DOMINANT_GROUP_CAP = 14


def relative_similarity(affinity, group, member: int, outsider: int) -> float:
    """How much more similar `outsider` is to `member` than to the group average.

    `member` must belong to `group`, `outsider` must not. The average runs over
    the member's affinities to the whole group (its own zero self-affinity
    included, by definition).
    """
    a = validate_affinity(affinity)
    g = frozenset(normalize_constraints(group, a.shape[0]))
    if member not in g:
        raise GraphError(f"vertex {member} is not in the group")
    if outsider in g:
        raise GraphError(f"vertex {outsider} is in the group")
    if not 0 <= outsider < a.shape[0]:
        raise GraphError(f"vertex {outsider} outside [0, {a.shape[0]})")
    idx = sorted(g)
    return float(a[member, outsider] - a[member, idx].sum() / len(g))


def _phi(a, group_idx, member, outsider):
    # group_idx: sorted list; member in group, outsider not.
    return a[member, outsider] - a[member, group_idx].sum() / len(group_idx)


def _vertex_weight(a, group: frozenset, vertex: int, memo: dict) -> float:
    key = (group, vertex)
    cached = memo.get(key)
    if cached is not None:
        return cached
    if len(group) == 1:
        memo[key] = 1.0
        return 1.0
    rest = group - {vertex}
    rest_idx = sorted(rest)
    total = 0.0
    for j in rest:
        total += _phi(a, rest_idx, j, vertex) * _vertex_weight(a, rest, j, memo)
    memo[key] = total
    return total


def vertex_weight(affinity, group, vertex: int, _memo: dict | None = None) -> float:
    """Recursive weight of `vertex` with respect to `group` (which must contain it)."""
    a = validate_affinity(affinity)
    g = frozenset(normalize_constraints(group, a.shape[0]))
    if vertex not in g:
        raise GraphError(f"vertex {vertex} is not in the group")
    if len(g) > _WEIGHT_GROUP_CAP:
        raise GraphError(f"group size {len(g)} exceeds the recursion cap {_WEIGHT_GROUP_CAP}")
    memo = _memo if _memo is not None else {}
    return _vertex_weight(a, g, vertex, memo)


def group_weight(affinity, group, _memo: dict | None = None) -> float:
    """Total weight of a group: sum of its members' weights."""
    a = validate_affinity(affinity)
    g = frozenset(normalize_constraints(group, a.shape[0]))
    if len(g) > _WEIGHT_GROUP_CAP:
        raise GraphError(f"group size {len(g)} exceeds the recursion cap {_WEIGHT_GROUP_CAP}")
    memo = _memo if _memo is not None else {}
    return float(sum(_vertex_weight(a, g, i, memo) for i in g))


def is_dominant_set(affinity, group, rng_seed: int = 0) -> tuple[bool, dict | None]:
    """Definition-level test of internal coherence and external incoherence.

    Checks, in order: every non-empty subset has positive total weight
    (exhaustive up to size 10, sampled above), every member has positive
    weight in the full group, and every outsider would enter with negative
    weight. Returns (ok, witness); witness names the first failing condition.
    """
    a = validate_affinity(affinity)
    g = frozenset(normalize_constraints(group, a.shape[0]))
    if len(g) > _DOMINANT_GROUP_CAP:
        raise GraphError(f"group size {len(g)} exceeds the dominant-set test cap {_DOMINANT_GROUP_CAP}")
    memo: dict = {}
    members = sorted(g)

    if len(g) <= _DOMINANT_EXHAUSTIVE_CAP:
        subsets = itertools.chain.from_iterable(
            itertools.combinations(members, k) for k in range(1, len(g) + 1)
        )
    else:
        rng = np.random.default_rng(rng_seed)
        sampled = {tuple(members)}
        for _ in range(2048):
            k = int(rng.integers(1, len(g) + 1))
            sampled.add(tuple(sorted(rng.choice(members, size=k, replace=False))))
        subsets = sampled
    for t in subsets:
        wt = sum(_vertex_weight(a, frozenset(t), i, memo) for i in t)
        if not wt > 0:
            return False, {"condition": "subset_weight", "subset": tuple(t), "weight": float(wt)}

    for i in members:
        wi = _vertex_weight(a, g, i, memo)
        if not wi > 0:
            return False, {"condition": "member_weight", "vertex": i, "weight": float(wi)}

    if len(g) + 1 <= _WEIGHT_GROUP_CAP:
        for j in range(a.shape[0]):
            if j in g:
                continue
            wj = _vertex_weight(a, g | {j}, j, memo)
            if not wj < 0:
                return False, {"condition": "outsider_weight", "vertex": j, "weight": float(wj)}
    return True, None


# =========================================================================
# Maximal cliques (Bron-Kerbosch with pivoting)
# =========================================================================

def maximal_cliques(affinity) -> list[frozenset]:
    """All maximal cliques of the positive-weight graph, as frozensets.

    Intended for small validation graphs; enumeration is exponential in the
    worst case.
    """
    a = validate_affinity(affinity)
    n = a.shape[0]
    adj = [frozenset(np.flatnonzero(a[i] > 0).tolist()) for i in range(n)]
    out: list[frozenset] = []

    def expand(r: set, p: set, x: set):
        if not p and not x:
            out.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda u: len(adj[u] & p))
        for v in list(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(range(n)), set())
    return sorted(out, key=lambda c: (len(c), sorted(c)))


def predicted_support_union(affinity, remaining_constraints, support) -> set | None:
    """Clique-union prediction for one extracted support on unweighted graphs.

    Decomposes the remaining constraints into maximal cliques of their induced
    subgraph, keeps those fully inside the observed support, and returns the
    union of all maximal cliques of the working graph containing any kept
    constraint clique. None when no constraint clique lies inside the support
    (the prediction does not apply, which itself is a violation downstream).
    """
    a = validate_affinity(affinity)
    sup = frozenset(int(i) for i in support)
    members = sorted(normalize_constraints(remaining_constraints, a.shape[0]))
    induced = a[np.ix_(members, members)]
    if len(members) == 1:
        constraint_cliques = [frozenset(members)]
    else:
        constraint_cliques = [
            frozenset(members[i] for i in c) for c in maximal_cliques(induced)
        ]
    kept = [c for c in constraint_cliques if c <= sup]
    if not kept:
        return None
    graph_cliques = maximal_cliques(a)
    union: set = set()
    for c in kept:
        for m in graph_cliques:
            if c <= m:
                union |= m
    return union


# =========================================================================
# Penalty threshold estimate over the complement face
# =========================================================================

def _face_objective(a, constraint_idx, x_face, face_idx):
    # min over constraints of (x'Ax - (Ax)_i) / x'x for x supported on the face
    ax = a[:, face_idx] @ x_face
    quad = float(x_face @ ax[face_idx])
    sq = float(x_face @ x_face)
    return float(np.min(quad - ax[constraint_idx]) / sq)


def face_escape_bound(
    affinity,
    constraints,
    samples: int = 2000,
    seed: int = 0,
    ascent_iters: int = 200,
    ascent_starts: int = 8,
) -> float:
    """Sampling lower estimate of the largest penalty a solution could evade.

    Maximizes min_i (x'Ax - (Ax)_i) / x'x over the simplex face spanned by the
    non-constraint vertices: exact enumeration of face vertices, Dirichlet
    sampling, then projected-gradient ascent from the best starts. The result
    never exceeds the true maximum, which in turn never exceeds the
    complement's top eigenvalue.
    """
    a = validate_affinity(affinity)
    n = a.shape[0]
    cons = sorted(normalize_constraints(constraints, n))
    face = [i for i in range(n) if i not in set(cons)]
    if not face:
        raise GraphError("constraints cover every vertex; the complement face is empty")
    m = len(face)
    cons_idx = np.array(cons)
    face_idx = np.array(face)

    def g(xf):
        return _face_objective(a, cons_idx, xf, face_idx)

    best_val = -np.inf
    best_points = []
    # Face vertices are evaluated exactly; for a single-point face this is the answer.
    for k in range(m):
        xf = np.zeros(m)
        xf[k] = 1.0
        val = g(xf)
        best_points.append((val, xf))
        best_val = max(best_val, val)
    center = np.full(m, 1.0 / m)
    best_points.append((g(center), center))

    rng = np.random.default_rng(seed)
    if m > 1:
        draws = rng.dirichlet(np.ones(m), size=samples)
        for xf in draws:
            val = g(xf)
            if val > best_val:
                best_val = val
            best_points.append((val, xf))

    best_points.sort(key=lambda t: -t[0])
    asub = a[np.ix_(face, face)]
    across = a[np.ix_(cons, face)]
    for _, start in best_points[:ascent_starts]:
        xf = start.copy()
        step = 0.1
        val = g(xf)
        for _ in range(ascent_iters):
            ax = asub @ xf
            quad = float(xf @ ax)
            sq = float(xf @ xf)
            scores = quad - across @ xf
            active = int(np.argmin(scores))
            # gradient of ((x'Ax - (Ax)_active) / x'x) on the face
            grad = (2.0 * ax - across[active]) / sq - (scores[active] / sq**2) * 2.0 * xf
            grad -= grad.mean()  # tangent to the simplex
            trial = xf + step * grad
            np.clip(trial, 0.0, None, out=trial)
            s = trial.sum()
            if s <= 0:
                step *= 0.5
                continue
            trial /= s
            tval = g(trial)
            if tval > val:
                xf, val = trial, tval
                step = min(step * 1.5, 1.0)
            else:
                step *= 0.5
                if step < 1e-12:
                    break
        best_val = max(best_val, val)
    return float(best_val)
