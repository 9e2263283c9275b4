"""Dense two-phase simplex and the matrix-game wrappers built on it.

Every per-state subproblem in this package is a small zero-sum game between
the controller (mixing over actions) and nature (mixing over the extreme points
of an ambiguity set), so the LP sizes stay in the tens of variables. A dense
tableau is the simplest correct choice at that scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateError, DimensionError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
BREAKDOWN_TOL = 1e-11
BLAND_AFTER = 500
MAX_PIVOTS = 50_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and bounds.

    ``bounds`` holds one ``(lower, upper)`` pair per coordinate; ``None`` or
    ``±inf`` marks a free side. When omitted every variable is ``>= 0``.
    """

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    bounds: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "inequality")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "equality")
        if self.bounds is None:
            lo = np.zeros(n)
            hi = np.full(n, np.inf)
        else:
            if len(self.bounds) != n:
                raise DimensionError(f"{len(self.bounds)} bounds for {n} variables")
            lo = np.array([-np.inf if b[0] is None else b[0] for b in self.bounds], dtype=float)
            hi = np.array([np.inf if b[1] is None else b[1] for b in self.bounds], dtype=float)
        if np.any(lo > hi):
            raise DimensionError("lower bound exceeds upper bound")
        self.lower = lo
        self.upper = hi

    @property
    def n(self):
        return self.c.size


def _rows(A, b, n, label):
    if A is None or (hasattr(A, "__len__") and len(A) == 0):
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != n or A.shape[0] != b.size:
        raise DimensionError(f"{label} rows have shape {A.shape} with {b.size} right-hand sides for {n} variables")
    return A, b


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray] = None
    value: Optional[float] = None
    pivots: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL


def solve_lp(lp: LinearProgram) -> LPResult:
    """Solve ``lp`` with a two-phase dense simplex.

    Returns an :class:`LPResult` with status ``optimal``, ``infeasible`` or
    ``unbounded``. Raises :class:`DegenerateError` when pivoting breaks down
    instead of returning a doubtful answer.
    """
    n = lp.n
    # Map x = offset + T @ y with y >= 0.
    cols = []
    offset = np.zeros(n)
    extra_ub = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    T = np.zeros((n, ny))
    for k, (j, sgn) in enumerate(cols):
        T[j, k] = sgn

    A_ub = lp.A_ub @ T
    b_ub = lp.b_ub - lp.A_ub @ offset
    if extra_ub:
        rows = np.zeros((len(extra_ub), ny))
        for r, (k, width) in enumerate(extra_ub):
            rows[r, k] = 1.0
        A_ub = np.vstack([A_ub, rows])
        b_ub = np.concatenate([b_ub, [w for _, w in extra_ub]])
    A_eq = lp.A_eq @ T
    b_eq = lp.b_eq - lp.A_eq @ offset
    c = T.T @ lp.c

    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    n_std = ny + m_ub
    M = np.zeros((m, n_std))
    M[:m_ub, :ny] = A_ub
    M[:m_ub, ny:] = np.eye(m_ub)
    M[m_ub:, :ny] = A_eq
    rhs = np.concatenate([b_ub, b_eq])
    neg = rhs < 0
    M[neg] *= -1.0
    rhs = np.where(neg, -rhs, rhs)
    cost = np.concatenate([c, np.zeros(m_ub)])

    y, status, pivots = _two_phase(M, rhs, cost)
    if status != OPTIMAL:
        return LPResult(status, pivots=pivots)
    x = offset + T @ y[:ny]
    _check_feasible(lp, x)
    return LPResult(OPTIMAL, x, float(lp.c @ x), pivots)


def _check_feasible(lp, x):
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    tol = FEAS_TOL * scale
    bad = False
    if lp.A_ub.size and np.any(lp.A_ub @ x - lp.b_ub > tol):
        bad = True
    if lp.A_eq.size and np.any(np.abs(lp.A_eq @ x - lp.b_eq) > tol):
        bad = True
    if np.any(x < lp.lower - tol) or np.any(x > lp.upper + tol):
        bad = True
    if bad:
        raise DegenerateError("simplex returned a point violating the constraints")


def _two_phase(M, rhs, cost):
    m, n = M.shape
    if m == 0:
        if np.any(cost < -PIVOT_TOL):
            return None, UNBOUNDED, 0
        return np.zeros(n), OPTIMAL, 0

    # Reuse unit columns as the starting basis where possible.
    basis = -np.ones(m, dtype=int)
    for j in range(n):
        col = M[:, j]
        nz = np.flatnonzero(col)
        if nz.size == 1 and col[nz[0]] == 1.0 and basis[nz[0]] < 0:
            basis[nz[0]] = j
    need = np.flatnonzero(basis < 0)
    n_art = need.size
    tab = np.zeros((m + 1, n + n_art + 1))
    tab[:m, :n] = M
    for k, r in enumerate(need):
        tab[r, n + k] = 1.0
        basis[r] = n + k
    tab[:m, -1] = rhs

    pivots = 0
    if n_art:
        tab[m, n:n + n_art] = 1.0
        for r in need:
            tab[m] -= tab[r]
        status, p = _iterate(tab, basis, n + n_art)
        pivots += p
        if status != OPTIMAL:
            raise DegenerateError("phase one did not terminate at an optimum")
        scale = 1.0 + float(np.max(rhs, initial=0.0))
        if -tab[m, -1] > FEAS_TOL * scale:
            return None, INFEASIBLE, pivots
        # Drive remaining artificials out of the basis, dropping redundant rows.
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n:
                row = tab[r, :n]
                cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if cand.size:
                    _pivot(tab, basis, r, cand[0])
                    pivots += 1
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        tab = np.vstack([tab[rows][:, list(range(n)) + [-1]], np.zeros((1, n + 1))])
        basis = basis[rows]
        m = rows.size

    tab[m, :n] = cost
    tab[m, -1] = 0.0
    for r in range(m):
        cb = cost[basis[r]]
        if cb != 0.0:
            tab[m] -= cb * tab[r]
    status, p = _iterate(tab, basis, n)
    pivots += p
    if status != OPTIMAL:
        return None, status, pivots

    y = np.zeros(n)
    y[basis] = tab[:m, -1]
    # Re-solve the basic system from the original data to shed pivoting drift.
    if m:
        keep_rows = _independent_rows(M, basis, m)
        if keep_rows is not None:
            B = M[np.ix_(keep_rows, basis)]
            try:
                xb = np.linalg.solve(B, rhs[keep_rows])
            except np.linalg.LinAlgError:
                xb = None
            if xb is not None and np.all(xb > -FEAS_TOL) and np.allclose(M[:, basis] @ xb, rhs, atol=FEAS_TOL):
                y = np.zeros(n)
                y[basis] = np.maximum(xb, 0.0)
    return y, OPTIMAL, pivots


def _independent_rows(M, basis, m):
    if M.shape[0] == m:
        return np.arange(m)
    # Redundant rows were dropped; pick a square nonsingular subsystem.
    B = M[:, basis]
    q, r, piv = _qr_rows(B)
    return piv


def _qr_rows(B):
    # Greedy row selection by Gram-Schmidt on the rows of B.
    chosen = []
    basis_rows = []
    for i in range(B.shape[0]):
        v = B[i].copy()
        for u in basis_rows:
            v -= (v @ u) * u
        nv = np.linalg.norm(v)
        if nv > 1e-9:
            basis_rows.append(v / nv)
            chosen.append(i)
        if len(chosen) == B.shape[1]:
            break
    if len(chosen) != B.shape[1]:
        return None, None, None
    return None, None, np.array(chosen)


def _iterate(tab, basis, n_allowed):
    m = tab.shape[0] - 1
    stall = 0
    last_obj = tab[m, -1]
    scale = max(1.0, float(np.max(np.abs(tab[m, :n_allowed]), initial=0.0)))
    tol = PIVOT_TOL * scale
    for it in range(MAX_PIVOTS):
        rc = tab[m, :n_allowed]
        cand = np.flatnonzero(rc < -tol)
        if cand.size == 0:
            return OPTIMAL, it
        if stall >= BLAND_AFTER:
            e = cand[0]
        else:
            e = cand[np.argmin(rc[cand])]
        col = tab[:m, e]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return UNBOUNDED, it
        ratios = tab[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        # Smallest basic index among ties keeps Bland's rule valid and output reproducible.
        r = ties[np.argmin(basis[ties])]
        if abs(tab[r, e]) < BREAKDOWN_TOL:
            raise DegenerateError(f"pivot {tab[r, e]:.3e} below breakdown tolerance")
        _pivot(tab, basis, r, e)
        obj = tab[m, -1]
        if abs(obj - last_obj) <= 1e-14 * max(1.0, abs(obj)):
            stall += 1
        else:
            stall = 0
        last_obj = obj
    raise DegenerateError(f"no convergence after {MAX_PIVOTS} pivots")


def _pivot(tab, basis, r, e):
    tab[r] /= tab[r, e]
    col = tab[:, e].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    basis[r] = e


# ---------------------------------------------------------------------------
# Games


@dataclass
class GameSolution:
    """Optimal play in a finite zero-sum game.

    ``minimizer`` is the controller's mixed strategy over rows (actions).
    ``maximizer`` is nature's weight vector over the columns it was allowed to
    use; ``piece_index`` names the union piece that attains a dual value.
    """

    value: float
    minimizer: np.ndarray
    maximizer: np.ndarray
    is_saddle: bool = True
    piece_index: int = 0
    response: int = -1
    extras: dict = field(default_factory=dict)


def _pure_saddle(M):
    row_max = M.max(axis=1)
    col_min = M.min(axis=0)
    i = int(np.argmin(row_max))
    j = int(np.argmax(col_min))
    if row_max[i] - col_min[j] <= 1e-13 * max(1.0, abs(row_max[i])):
        return i, j, float(row_max[i])
    return None


def minmax_value(M):
    """Controller side ``min_x max_j (x @ M)_j``; returns ``(value, x)``."""
    M = np.asarray(M, dtype=float)
    m, k = M.shape
    pure = _pure_saddle(M)
    if pure is not None:
        x = np.zeros(m)
        x[pure[0]] = 1.0
        return pure[2], x
    if m == 1:
        return float(M.max()), np.ones(1)
    # variables: x (m), u free
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.hstack([M.T, -np.ones((k, 1))])
    A_eq = np.zeros((1, m + 1))
    A_eq[0, :m] = 1.0
    bounds = [(0.0, None)] * m + [(None, None)]
    res = solve_lp(LinearProgram(c, A_ub, np.zeros(k), A_eq, [1.0], bounds))
    if not res.optimal:
        raise DegenerateError(f"matrix game LP ended {res.status}")
    x = np.maximum(res.x[:m], 0.0)
    x /= x.sum()
    return float((x @ M).max()), x


def maxmin_value(M):
    """Nature side ``max_y min_i (M @ y)_i``; returns ``(value, y)``."""
    M = np.asarray(M, dtype=float)
    m, k = M.shape
    pure = _pure_saddle(M)
    if pure is not None:
        y = np.zeros(k)
        y[pure[1]] = 1.0
        return pure[2], y
    if k == 1:
        return float(M.min()), np.ones(1)
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-M, np.ones((m, 1))])
    A_eq = np.zeros((1, k + 1))
    A_eq[0, :k] = 1.0
    bounds = [(0.0, None)] * k + [(None, None)]
    res = solve_lp(LinearProgram(c, A_ub, np.zeros(m), A_eq, [1.0], bounds))
    if not res.optimal:
        raise DegenerateError(f"matrix game LP ended {res.status}")
    y = np.maximum(res.x[:k], 0.0)
    y /= y.sum()
    return float((M @ y).min()), y


def solve_matrix_game(M) -> GameSolution:
    """Solve ``min_{x in simplex} max_{y in simplex} x @ M @ y``.

    Both sides are solved as separate LPs; their values are checked against
    each other, so a returned solution is always a certified saddle point.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise DimensionError("game matrix has non-finite entries")
    upper, x = minmax_value(M)
    lower, y = maxmin_value(M)
    if abs(upper - lower) > 1e-8 * max(1.0, abs(upper)):
        raise DegenerateError(f"game values disagree: {upper!r} vs {lower!r}")
    return GameSolution(upper, x, y, True)


def minmax_over_union(W, pieces, saddle_tol=1e-7):
    """Primal and dual values of one state's robust subproblem.

    ``W[a, j]`` is the expected cost-to-go of action ``a`` when nature plays
    column ``j`` (an extreme point of its set). ``pieces`` lists column index
    arrays, one per convex piece of a possibly non-convex union.

    The primal lets nature answer the controller's mixed action over every
    column at once; the dual lets nature commit to a point of one piece first.
    Returns ``(primal, dual)`` :class:`GameSolution` objects.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    value, x = minmax_value(W)
    scores = x @ W
    j_star = int(np.argmax(scores))
    onehot = np.zeros(W.shape[1])
    onehot[j_star] = 1.0
    primal = GameSolution(value, x, onehot, response=j_star)

    best = None
    per_piece = []
    for p, cols in enumerate(pieces):
        cols = np.asarray(cols, dtype=int)
        sub = W[:, cols]
        if cols.size == 1:
            v, y = float(sub.min()), np.ones(1)
        else:
            v, y = maxmin_value(sub)
        # Against a fixed nature point some pure action is a best reply.
        per_piece.append((v, int(np.argmin(sub @ y))))
        if best is None or v > best[0] + 1e-12:
            best = (v, p, cols, y)
    v, p, cols, y = best
    lam = np.zeros(W.shape[1])
    lam[cols] = y
    pure = per_piece[p][1]
    x_d = np.zeros(W.shape[0])
    x_d[pure] = 1.0
    dual = GameSolution(v, x_d, lam, piece_index=p, response=pure, extras={"pieces": per_piece})
    saddle = abs(value - v) <= saddle_tol
    primal.is_saddle = dual.is_saddle = saddle
    return primal, dual


def strategy_bounds(W, value, tol=1e-7):
    """Per-action range of controller probabilities that stay optimal.

    Every ``x`` in the simplex with ``max_j (x @ W)_j <= value + tol`` is
    optimal; the returned ``(lo, hi)`` arrays bound each coordinate over that
    face. ``lo == hi`` everywhere means the optimal strategy is unique.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    m, k = W.shape
    A_ub = W.T
    b_ub = np.full(k, value + tol)
    A_eq = np.ones((1, m))
    lo = np.zeros(m)
    hi = np.zeros(m)
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        r1 = solve_lp(LinearProgram(e, A_ub, b_ub, A_eq, [1.0]))
        r2 = solve_lp(LinearProgram(-e, A_ub, b_ub, A_eq, [1.0]))
        if not (r1.optimal and r2.optimal):
            raise DegenerateError("optimal face is empty; value too small")
        lo[i] = r1.value
        hi[i] = -r2.value
    return lo, hi


def hull_distance(points, x):
    """L1 distance from ``x`` to the convex hull of the rows of ``points``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    k, d = P.shape
    if k == 1:
        return float(np.abs(P[0] - x).sum())
    # variables: lambda (k), r_plus (d), r_minus (d)
    c = np.concatenate([np.zeros(k), np.ones(2 * d)])
    A_eq = np.zeros((d + 1, k + 2 * d))
    A_eq[:d, :k] = P.T
    A_eq[:d, k:k + d] = np.eye(d)
    A_eq[:d, k + d:] = -np.eye(d)
    A_eq[d, :k] = 1.0
    b_eq = np.concatenate([x, [1.0]])
    res = solve_lp(LinearProgram(c, A_eq=A_eq, b_eq=b_eq))
    if not res.optimal:
        raise DegenerateError(f"membership LP ended {res.status}")
    return max(res.value, 0.0)


def in_hull(points, x, tol=1e-8):
    """LP membership test of ``x`` in the convex hull of ``points``."""
    return hull_distance(points, x) <= tol
