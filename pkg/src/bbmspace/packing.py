"""Maximum-weight packings of equal cubes anchored on a regular lattice.

Candidates are indexed by integer positions ``i`` in a ``(R,) * d`` array of
non-negative weights.  Two candidates conflict (their cubes share interior
points) exactly when ``|i_k - j_k| < s`` on every axis, where ``s`` is the
number of anchor steps per cube side.  Every solver returns the selected
positions as a sorted list of index tuples; a cardinality cap of ``None``
means unconstrained.

Only candidates with strictly positive weight are ever selected: zero-weight
cubes never change the objective and are dropped from witnesses.
"""

from __future__ import annotations

from itertools import product

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .errors import CapacityError

DEFAULT_BNB_LIMIT = 40
DEFAULT_ORACLE_LIMIT = 24


def conflicts(i, j, s: int) -> bool:
    return all(abs(a - b) < s for a, b in zip(i, j))


def _positive_order(weights: np.ndarray) -> np.ndarray:
    """Flat indices of positive weights, heaviest first, ties lexicographic."""
    flat = weights.reshape(-1)
    pos = np.flatnonzero(flat > 0)
    # np.lexsort sorts by the last key first
    return pos[np.lexsort((pos, -flat[pos]))]


def selection_value(weights: np.ndarray, chosen) -> float:
    return float(sum(weights[i] for i in chosen))


def greedy(weights: np.ndarray, s: int, cap: int | None) -> list:
    """Heaviest-first packing; a lower bound for the optimum."""
    shape = weights.shape
    blocked = np.zeros(shape, dtype=bool)
    chosen = []
    for flat_idx in _positive_order(weights):
        if cap is not None and len(chosen) >= cap:
            break
        idx = np.unravel_index(flat_idx, shape)
        if blocked[idx]:
            continue
        chosen.append(tuple(int(v) for v in idx))
        blocked[tuple(slice(max(v - s + 1, 0), v + s) for v in idx)] = True
    return sorted(chosen)


def interval_dp(weights: np.ndarray, s: int, cap: int | None) -> list:
    """Exact weighted interval scheduling with a cardinality cap (one axis).

    ``best[i, c]`` is the best value using positions ``>= i`` with at most
    ``c`` intervals; on ties the earlier interval is taken, which yields the
    lexicographically smallest optimal anchor sequence.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    R = w.size
    kmax = -(-R // s)
    K = kmax if cap is None else min(cap, kmax)
    best = np.zeros((R + s + 1, K + 1))
    for i in range(R - 1, -1, -1):
        skip = best[i + 1]
        if w[i] > 0:
            take = np.empty(K + 1)
            take[0] = 0.0
            take[1:] = w[i] + best[i + s, :-1]
            best[i] = np.maximum(skip, take)
        else:
            best[i] = skip
    chosen, i, c = [], 0, K
    while i < R and c > 0:
        if w[i] > 0 and w[i] + best[i + s, c - 1] >= best[i + 1, c]:
            chosen.append((i,))
            i += s
            c -= 1
        else:
            i += 1
    return chosen


def block_upper_bound(weights: np.ndarray, s: int, cap: int | None) -> float:
    """Upper bound from the partition of positions into ``s**d`` cliques.

    Each block of ``s`` consecutive positions per axis is pairwise
    conflicting, so at most one member is chosen; the bound sums the ``cap``
    largest block maxima.
    """
    d = weights.ndim
    R = weights.shape[0]
    nb = -(-R // s)
    padded = np.zeros((nb * s,) * d)
    padded[(slice(0, R),) * d] = weights
    shape = []
    for _ in range(d):
        shape += [nb, s]
    blocks = padded.reshape(shape).max(axis=tuple(range(1, 2 * d, 2))).reshape(-1)
    blocks = blocks[blocks > 0]
    if cap is not None and blocks.size > cap:
        blocks = np.partition(blocks, blocks.size - cap)[blocks.size - cap:]
    return float(np.sum(blocks))


def branch_and_bound(weights: np.ndarray, s: int, cap: int | None,
                     limit: int = DEFAULT_BNB_LIMIT) -> list:
    """Exact packing by depth-first branch and bound over positive candidates.

    Candidates are branched heaviest first; a node is pruned when its value
    plus the ``r`` heaviest remaining candidates compatible with the current
    choice (``r`` = remaining cardinality budget) cannot beat the incumbent.
    """
    order = _positive_order(weights)
    c = order.size
    if c > limit:
        raise CapacityError(
            f"branch-and-bound limited to {limit} positive candidates, got {c}; "
            "use mode='greedy' (lower bound) or mode='exact'"
        )
    shape = weights.shape
    coords = [tuple(int(v) for v in np.unravel_index(k, shape)) for k in order]
    w = [float(weights.reshape(-1)[k]) for k in order]
    masks = []
    for a in range(c):
        m = 0
        for b in range(c):
            if conflicts(coords[a], coords[b], s):
                m |= 1 << b
        masks.append(m)
    budget0 = c if cap is None else min(cap, c)

    init = greedy(weights, s, cap)
    pos_of = {coords[a]: a for a in range(c)}
    best_val = sum(w[pos_of[i]] for i in init)
    best_set = sorted(init)

    def bound(j, forbidden, r):
        total, taken = 0.0, 0
        while j < c and taken < r:
            if not forbidden >> j & 1:
                total += w[j]
                taken += 1
            j += 1
        return total

    def dfs(j, forbidden, value, chosen, r):
        nonlocal best_val, best_set
        if r == 0 or j == c:
            cand = sorted(coords[a] for a in chosen)
            if value > best_val or (value == best_val and cand < best_set):
                best_val, best_set = value, cand
            return
        if value + bound(j, forbidden, r) <= best_val:
            return
        if not forbidden >> j & 1:
            dfs(j + 1, forbidden | masks[j], value + w[j], chosen + [j], r - 1)
        dfs(j + 1, forbidden, value, chosen, r)

    dfs(0, 0, 0.0, [], budget0)
    return best_set


def _clique_rows(positive: np.ndarray, s: int):
    """Sparse rows ``sum x <= 1`` over every ``s**d`` window of positions."""
    d = positive.ndim
    R = positive.shape[0]
    col_id = -np.ones(positive.shape, dtype=np.int64)
    col_id[positive] = np.arange(int(positive.sum()))
    nw = max(R - s + 1, 1)
    win = np.stack(np.meshgrid(*[np.arange(nw)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    rows, cols = [], []
    for delta in product(range(s), repeat=d):
        pts = win + np.array(delta)
        ok = np.all(pts < R, axis=1)
        ids = np.full(win.shape[0], -1, dtype=np.int64)
        ids[ok] = col_id[tuple(pts[ok].T)]
        keep = ids >= 0
        rows.append(np.flatnonzero(keep))
        cols.append(ids[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    counts = np.bincount(rows, minlength=win.shape[0])
    keep = counts[rows] >= 2
    rows, cols = rows[keep], cols[keep]
    if rows.size == 0:
        return None
    _, rows = np.unique(rows, return_inverse=True)
    A = sparse.csr_matrix((np.ones(rows.size), (rows, cols)),
                          shape=(int(rows.max()) + 1, int(positive.sum())))
    return A


def milp_packing(weights: np.ndarray, s: int, cap: int | None) -> list:
    """Exact packing as a 0/1 program with clique constraints (HiGHS)."""
    positive = weights > 0
    npos = int(positive.sum())
    if npos == 0:
        return []
    coords = [tuple(int(v) for v in c) for c in np.argwhere(positive)]
    w = weights[positive]
    constraints = []
    A = _clique_rows(positive, s)
    if A is not None:
        constraints.append(LinearConstraint(A, -np.inf, 1.0))
    if cap is not None and cap < npos:
        constraints.append(LinearConstraint(np.ones((1, npos)), -np.inf, cap))
    # HiGHS stops at an absolute gap of 1e-6; rescaling makes that ~1e-12 relative
    res = milp(-(w / w.max()) * 1e6, integrality=np.ones(npos), bounds=Bounds(0, 1),
               constraints=constraints, options={"mip_rel_gap": 0.0})
    if res.x is None:
        raise RuntimeError(f"MILP packing failed: {res.message}")
    chosen = sorted(coords[a] for a in np.flatnonzero(res.x > 0.5))
    fallback = greedy(weights, s, cap)
    if selection_value(weights, fallback) > selection_value(weights, chosen):
        return fallback
    return chosen


def exhaustive(weights, conflict: np.ndarray, cap: int | None,
               limit: int = DEFAULT_ORACLE_LIMIT) -> list:
    """Enumerate every conflict-free subset respecting the cap; reference only.

    ``weights`` is a flat sequence and ``conflict[a, b]`` tells whether
    candidates ``a`` and ``b`` may not be chosen together.  Returns the
    indices of the best subset found (the first one in enumeration order on
    exact ties).
    """
    w = [float(x) for x in weights]
    if len(w) > limit:
        raise CapacityError(f"exhaustive search limited to {limit} candidates, got {len(w)}")
    best = [0.0, []]

    def rec(j, chosen, value):
        if j == len(w):
            if value > best[0]:
                best[0], best[1] = value, list(chosen)
            return
        if (cap is None or len(chosen) < cap) and not any(conflict[j, b] for b in chosen):
            chosen.append(j)
            rec(j + 1, chosen, value + w[j])
            chosen.pop()
        rec(j + 1, chosen, value)

    rec(0, [], 0.0)
    return best[1]
