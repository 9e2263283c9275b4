"""Backward induction for the controller-versus-nature game.

At every stage and state the controller mixes over actions and nature picks
a point of the state marginal of the ambiguity set. The primal recursion lets
nature answer the controller's mixed action; the dual recursion makes nature
commit first. Both are solved state by state as small LPs over the extreme
points of the marginal, so one ``W`` matrix (actions x extreme points) per
state drives everything here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .ambiguity import (
    FiniteKernelSet,
    MEMBER_TOL,
    RRect,
    SaRect,
    SrRect,
    StageModel,
    require_valid_model,
)
from .exceptions import CostStructureError
from .grid import dedup_rows
from .lp import in_hull, minmax_over_union, strategy_bounds
from .mdp import check_policy, deterministic_policy, require_valid

VALUE_TOL = 1e-7
WITNESS_TOL = 1e-8
GAP_TOL = 1e-6


@dataclass
class StateGame:
    """Payoff table of one state's subproblem.

    ``W[a, j]`` is the expected cost-to-go of action ``a`` when nature plays
    extreme point ``j``, whose conditional rows are ``points[j]``. ``pieces``
    groups columns into the convex pieces of the marginal.
    """

    W: np.ndarray
    pieces: list
    points: np.ndarray
    structural: bool = False


def _r_part_rows(stage: RRect, instance, t, s, U):
    if not instance.cost_is_next_state_free(t, s):
        raise CostStructureError(
            f"factor-based kernel set at {instance.label(t, s)} needs costs that do not depend on the next state")
    best = stage.best_factors(U)
    rows = stage.rows(s, best)
    r = instance.costs[t][s][:, 0] + rows @ U
    return r, rows


def state_game(stage: StageModel, instance, t, s, U) -> StateGame:
    """Build the state subproblem for stage ``t`` given next-stage values ``U``."""
    cost = instance.costs[t][s]
    if isinstance(stage, SaRect):
        target = cost + U[None, :]
        rows, r = [], []
        for a in range(instance.n_actions(t, s)):
            val, v = stage.sets[s][a].maximize(target[a])
            rows.append(v)
            r.append(val)
        return StateGame(np.array(r)[:, None], [np.array([0])], np.array(rows)[None], True)
    if isinstance(stage, RRect):
        r, rows = _r_part_rows(stage, instance, t, s, U)
        return StateGame(r[:, None], [np.array([0])], rows[None], True)
    if isinstance(stage, SrRect):
        sg = state_game(stage.s_part, instance, t, s, U)
        r, rows = _r_part_rows(stage.r_part, instance, t, s, U)
        b = stage.beta
        W = b * sg.W + (1.0 - b) * r[:, None]
        points = b * sg.points + (1.0 - b) * rows[None]
        return StateGame(W, sg.pieces, points, sg.structural)
    pieces = stage.state_pieces(instance, t, s)
    points = np.concatenate(pieces, axis=0)
    W = np.einsum("jan,an->aj", points, cost + U[None, :])
    idx, start = [], 0
    for p in pieces:
        idx.append(np.arange(start, start + len(p)))
        start += len(p)
    return StateGame(W, idx, points)


@dataclass
class PrimalSolution:
    values: list
    policy: list
    nature_response: list
    local_dual: list
    saddle: list
    games: list = field(repr=False, default_factory=list)


@dataclass
class DualSolution:
    values: list
    nature_policy: list
    controller_response: list
    piece_index: list
    piece_responses: list


def solve_primal(instance, model, check=True) -> PrimalSolution:
    """Min-max recursion: ``V_t(s) = min_pi max_P sum_a pi(a) E_P[c + V_{t+1}]``.

    Also records, per state, the dual value of the same subproblem (nature
    moving first against the same ``V_{t+1}``) and whether the two coincide.
    """
    if check:
        require_valid(instance)
        require_valid_model(model, instance)
    T = instance.horizon
    values = [None] * (T + 1)
    values[T] = instance.terminal_cost.copy()
    policy, response, local, saddle, games = [None] * T, [None] * T, [None] * T, [None] * T, [None] * T
    for t in reversed(range(T)):
        U = values[t + 1]
        nS = instance.n_states(t)
        v = np.empty(nS)
        pol, resp, loc, sad, gms = [], [], [], [], []
        for s in range(nS):
            g = state_game(model[t], instance, t, s, U)
            primal, dual = minmax_over_union(g.W, g.pieces)
            v[s] = primal.value
            pol.append(primal.minimizer)
            resp.append(g.points[primal.response])
            loc.append(dual.value)
            sad.append(primal.is_saddle)
            gms.append(g)
        values[t] = v
        policy[t], response[t], local[t], saddle[t], games[t] = pol, resp, loc, sad, gms
    return PrimalSolution(values, policy, response, local, saddle, games)


def solve_dual(instance, model, check=True) -> DualSolution:
    """Max-min recursion: nature commits to a marginal point before the controller acts."""
    if check:
        require_valid(instance)
        require_valid_model(model, instance)
    T = instance.horizon
    values = [None] * (T + 1)
    values[T] = instance.terminal_cost.copy()
    nature, reply, piece, per_piece = [None] * T, [None] * T, [None] * T, [None] * T
    for t in reversed(range(T)):
        U = values[t + 1]
        nS = instance.n_states(t)
        q = np.empty(nS)
        nat, rep, pc, pp = [], [], [], []
        for s in range(nS):
            g = state_game(model[t], instance, t, s, U)
            _, dual = minmax_over_union(g.W, g.pieces)
            q[s] = dual.value
            nat.append(np.tensordot(dual.maximizer, g.points, axes=1))
            rep.append(dual.response)
            pc.append(dual.piece_index)
            pp.append(dual.extras["pieces"])
        values[t] = q
        nature[t], reply[t], piece[t], per_piece[t] = nat, rep, pc, pp
    return DualSolution(values, nature, reply, piece, per_piece)


def evaluate_policy_robust(instance, model, policy, check=True):
    """Worst-case value table of a fixed controller policy."""
    if check:
        require_valid(instance)
        require_valid_model(model, instance)
    policy = check_policy(instance, policy)
    T = instance.horizon
    values = [None] * (T + 1)
    values[T] = instance.terminal_cost.copy()
    for t in reversed(range(T)):
        U = values[t + 1]
        values[t] = np.array([(policy[t][s] @ state_game(model[t], instance, t, s, U).W).max()
                              for s in range(instance.n_states(t))])
    return values


# ---------------------------------------------------------------------------
# Structural checks


@dataclass
class StageCommonWorst:
    holds_global: bool
    holds_statewise: bool
    witness: Optional[list]
    failing_states: List[int]


@dataclass
class CommonWorstVerdict:
    """Whether one kernel is a worst case for every pure action at once.

    ``status`` is ``"global"`` when a single stage kernel works for every
    state and action, ``"statewise"`` when each state has its own such point
    but no single kernel serves all states, and ``"fails"`` otherwise.
    """

    status: str
    stages: List[StageCommonWorst]

    @property
    def holds(self):
        return self.status != "fails"

    def witness(self, t):
        return self.stages[t].witness


def _common_column(g: StateGame, tol):
    best = g.W.max(axis=1)
    # A common maximizer exists iff some extreme point attains the sum of the
    # per-action maxima, since each action's payoff is at most its maximum.
    total = g.W.sum(axis=0)
    j = int(np.argmax(total))
    scale = 1.0 + float(np.abs(best).sum())
    return j if total[j] >= best.sum() - tol * scale else None


def _stage_common_worst(stage, instance, t, U, tol):
    nS = instance.n_states(t)
    games = [state_game(stage, instance, t, s, U) for s in range(nS)]
    if isinstance(stage, FiniteKernelSet) and len(stage.kernels) > 1:
        best = [g.W.max(axis=1) for g in games]
        target = sum(b.sum() for b in best)
        scale = 1.0 + sum(np.abs(b).sum() for b in best)
        witness = None
        for K in stage.kernels:
            score = sum(float(np.einsum("an,an->", K[s], instance.costs[t][s] + U[None, :])) for s in range(nS))
            if score >= target - tol * scale:
                witness = [np.array(b) for b in K]
                break
        cols = [_common_column(g, tol) for g in games]
        failing = [s for s, j in enumerate(cols) if j is None]
        return StageCommonWorst(witness is not None, not failing, witness, failing)
    cols = [_common_column(g, tol) for g in games]
    failing = [s for s, j in enumerate(cols) if j is None]
    witness = None if failing else [g.points[j] for g, j in zip(games, cols)]
    return StageCommonWorst(not failing, not failing, witness, failing)


def check_common_worst_kernel(instance, model, next_values=None, tol=WITNESS_TOL) -> CommonWorstVerdict:
    """Check for a kernel that is simultaneously worst for every pure action.

    Only pure actions need checking: a kernel that is worst for each action
    is worst for every mixture of them. ``next_values`` defaults to the
    primal value table. Factor-based and per-(state, action) sets pass by
    construction and their witness comes from per-factor maximizers.
    """
    if next_values is None:
        next_values = solve_primal(instance, model).values
    stages = [_stage_common_worst(model[t], instance, t, next_values[t + 1], tol)
              for t in range(instance.horizon)]
    if all(st.holds_global for st in stages):
        status = "global"
    elif all(st.holds_statewise for st in stages):
        status = "statewise"
    else:
        status = "fails"
    return CommonWorstVerdict(status, stages)


@dataclass
class ConvexityVerdict:
    """Result of testing whether a state marginal is convex.

    ``exact`` is False when the answer rests on sampled convex combinations
    rather than a containing piece or an explicit counterexample.
    """

    convex: bool
    exact: bool = True
    witness: Optional[np.ndarray] = None

    def __bool__(self):
        return self.convex


def check_convex_marginal(instance, model, t, s, tol=MEMBER_TOL) -> ConvexityVerdict:
    """Decide whether the set of conditional rows available at ``(t, s)`` is convex."""
    stage = model[t] if isinstance(model, (list, tuple)) else model
    pieces = [p.reshape(len(p), -1) for p in stage.state_pieces(instance, t, s)]
    pieces = [dedup_rows(p) for p in pieces]
    if len(pieces) == 1:
        return ConvexityVerdict(True)
    pooled = dedup_rows(np.concatenate(pieces, axis=0))
    shape = (instance.n_actions(t, s), instance.n_states(t + 1))

    def member(x):
        return any(in_hull(p, x, tol) for p in pieces)

    for p in pieces:
        if all(in_hull(p, v, tol) for v in pooled):
            return ConvexityVerdict(True)
    n = len(pooled)
    for i in range(n):
        for j in range(i + 1, n):
            for lam in (0.5, 0.25, 0.75):
                x = lam * pooled[i] + (1.0 - lam) * pooled[j]
                if not member(x):
                    return ConvexityVerdict(False, True, x.reshape(shape))
    centroid = pooled.mean(axis=0)
    if not member(centroid):
        return ConvexityVerdict(False, True, centroid.reshape(shape))
    return ConvexityVerdict(True, exact=False)


# ---------------------------------------------------------------------------
# Report


@dataclass
class Implication:
    premise: str
    conclusion: str
    premise_holds: bool
    conclusion_holds: bool

    @property
    def ok(self):
        return (not self.premise_holds) or self.conclusion_holds


@dataclass
class RobustSolveReport:
    primal_values: list
    dual_values: list
    controller_policy: list
    deterministic_policy: Optional[list]
    nature_primal_response: list
    nature_dual_policy: list
    controller_dual_response: list
    gap: float
    per_state_saddle: list
    local_dual_values: list
    strategy_ranges: list
    common_worst: CommonWorstVerdict
    convex_marginal: list
    implications: List[Implication]
    notes: List[str] = field(default_factory=list)

    @property
    def all_saddle(self):
        return all(all(layer) for layer in self.per_state_saddle)

    @property
    def all_convex(self):
        return all(all(bool(v) for v in layer) for layer in self.convex_marginal)

    def unique_policy_at(self, t, s, tol=GAP_TOL):
        lo, hi = self.strategy_ranges[t][s]
        return bool(np.all(hi - lo <= tol))


def extract_deterministic(instance, primal: PrimalSolution, tol=VALUE_TOL):
    """Pure actions attaining the primal value at every state, if they exist."""
    choices = []
    for t in range(instance.horizon):
        layer = []
        for s in range(instance.n_states(t)):
            worst = primal.games[t][s].W.max(axis=1)
            v = primal.values[t][s]
            ok = np.flatnonzero(worst <= v + tol * (1.0 + abs(v)))
            if ok.size == 0:
                return None
            layer.append(int(ok[0]))
        choices.append(layer)
    return deterministic_policy(instance, choices)


def diagnose(instance, model) -> RobustSolveReport:
    """Solve both recursions and check the structural conditions that close the gap."""
    require_valid(instance)
    require_valid_model(model, instance)
    primal = solve_primal(instance, model, check=False)
    dual = solve_dual(instance, model, check=False)
    s1 = instance.initial_state
    gap = float(primal.values[0][s1] - dual.values[0][s1])
    T = instance.horizon

    ranges = []
    for t in range(T):
        layer = []
        for s in range(instance.n_states(t)):
            g = primal.games[t][s]
            layer.append(strategy_bounds(g.W, primal.values[t][s]))
        ranges.append(layer)

    verdict = check_common_worst_kernel(instance, model, primal.values)
    convex = [[check_convex_marginal(instance, model, t, s) for s in range(instance.n_states(t))]
              for t in range(T)]
    det = extract_deterministic(instance, primal) if gap <= GAP_TOL else None
    if det is not None:
        check = evaluate_policy_robust(instance, model, det, check=False)
        if any(np.max(np.abs(a - b)) > VALUE_TOL for a, b in zip(check, primal.values)):
            det = None

    all_saddle = all(all(layer) for layer in primal.saddle)
    all_convex = all(all(bool(v) for v in layer) for layer in convex)
    implications = [
        Implication("common worst-case kernel", "no duality gap", verdict.holds, gap <= GAP_TOL),
        Implication("common worst-case kernel", "deterministic optimal policy", verdict.holds,
                    extract_deterministic(instance, primal) is not None),
        Implication("convex state marginals", "saddle point at every state", all_convex, all_saddle),
        Implication("saddle point at every state", "no duality gap", all_saddle, gap <= GAP_TOL),
    ]
    notes = ["nature restricted to Markov policies that pick one kernel per stage and state;"
             " randomization over kernels is not modelled"]
    return RobustSolveReport(
        primal_values=primal.values,
        dual_values=dual.values,
        controller_policy=primal.policy,
        deterministic_policy=det,
        nature_primal_response=primal.nature_response,
        nature_dual_policy=dual.nature_policy,
        controller_dual_response=dual.controller_response,
        gap=gap,
        per_state_saddle=primal.saddle,
        local_dual_values=primal.local_dual,
        strategy_ranges=ranges,
        common_worst=verdict,
        convex_marginal=convex,
        implications=implications,
        notes=notes,
    )
