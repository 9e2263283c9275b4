"""Robust MDPs with a known kernel and ambiguous stage costs.

The game machinery is the same as for kernel ambiguity with the roles
swapped: nature picks a cost table from a set while transitions are fixed.
Because the kernel is known, the worst case for a mixed action ``x`` is the
support function ``h_s(x) = max_c sum_a x_a E_P[c(s, a, .)]``, and the primal
recursion becomes an ordinary (non-robust) MDP regularized by ``h``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ambiguity import FiniteKernelSet, SaRect, Singleton, SRect
from .exceptions import DegenerateError, ValidationError
from .lp import LinearProgram, minmax_over_union, solve_lp
from .mdp import check_kernel, reachable_states, require_valid
from .robust import GAP_TOL, StateGame, check_convex_marginal
from .static import OracleConfig, build_scenarios, static_dual_engine, static_primal_engine


def _finite_problems(points, where):
    if not np.all(np.isfinite(points)):
        return [f"{where}: non-finite cost vertex"]
    return []


class CostSaRect(SaRect):
    """Independent polytope of next-state cost vectors per (state, action)."""

    kind = "sa_rect"

    def validate(self, instance, t):
        out = []
        nN = instance.n_states(t + 1)
        if len(self.sets) != instance.n_states(t):
            return [f"stage {t + 1}: cost sets for {len(self.sets)} of {instance.n_states(t)} states"]
        for s in range(instance.n_states(t)):
            if len(self.sets[s]) != instance.n_actions(t, s):
                out.append(f"{instance.label(t, s)}: cost sets for {len(self.sets[s])} actions")
                continue
            for a, p in enumerate(self.sets[s]):
                where = f"({t + 1}, {instance.states[t][s]}, {instance.actions[t][s][a]})"
                if p.dim != nN:
                    out.append(f"{where}: dimension {p.dim}, expected {nN}")
                elif not p.is_vertex_list and not p.is_bounded():
                    out.append(f"{where}: cost polytope is unbounded")
                else:
                    try:
                        out += _finite_problems(p.vertices, where)
                    except ValidationError as exc:
                        out.append(f"{where}: {exc}")
        return out


def _cost_validate(stage, instance, t):
    out = []
    for s in range(instance.n_states(t)):
        where = instance.label(t, s)
        try:
            pieces = stage.state_pieces(instance, t, s)
        except ValidationError as exc:
            out.append(f"{where}: {exc}")
            continue
        shape = (instance.n_actions(t, s), instance.n_states(t + 1))
        for p in pieces:
            if p.shape[1:] != shape:
                out.append(f"{where}: cost block shape {p.shape[1:]}, expected {shape}")
                break
            out += _finite_problems(p, where)
    return out


class CostSRect(SRect):
    """Per-state union of polytopes of whole cost blocks ``(n_actions, n_next)``."""

    def validate(self, instance, t):
        for u in self.sets:
            for p in u.pieces:
                if not p.is_vertex_list and not p.is_bounded():
                    return [f"stage {t + 1}: cost polytope is unbounded"]
        return _cost_validate(self, instance, t)


class FiniteCostSet(FiniteKernelSet):
    """Explicit list of stage cost tables (optionally their convex hull)."""

    def validate(self, instance, t):
        return _cost_validate(self, instance, t)

    @property
    def costs(self):
        return self.kernels


class CostSingleton(Singleton):
    """One known stage cost table."""

    def validate(self, instance, t):
        return _cost_validate(self, instance, t)


def require_valid_cost_model(model, instance):
    if len(model) != instance.horizon:
        raise ValidationError(f"cost model covers {len(model)} stages, instance has {instance.horizon}")
    problems = [v for t, st in enumerate(model) for v in st.validate(instance, t)]
    if problems:
        raise ValidationError("invalid cost ambiguity: " + "; ".join(problems), problems)
    return model


def cost_state_game(stage, instance, P, t, s, U) -> StateGame:
    """Payoff table with cost points as nature's columns and the kernel rows ``P`` fixed."""
    base = P @ U
    if isinstance(stage, SaRect):
        r, rows = [], []
        for a in range(instance.n_actions(t, s)):
            val, v = stage.sets[s][a].maximize(P[a])
            r.append(val + base[a])
            rows.append(v)
        return StateGame(np.array(r)[:, None], [np.array([0])], np.array(rows)[None], True)
    pieces = stage.state_pieces(instance, t, s)
    points = np.concatenate(pieces, axis=0)
    W = np.einsum("jan,an->aj", points, P) + base[:, None]
    idx, start = [], 0
    for p in pieces:
        idx.append(np.arange(start, start + len(p)))
        start += len(p)
    return StateGame(W, idx, points)


def _prepare(instance, kernel, model):
    require_valid(instance)
    kernel = check_kernel(instance, kernel)
    require_valid_cost_model(model, instance)
    return kernel


@dataclass
class CostSolution:
    values: list
    policy: list
    nature: list
    local_dual: list = field(default_factory=list)
    saddle: list = field(default_factory=list)
    games: list = field(default_factory=list, repr=False)


def solve_primal_cost(instance, kernel, model) -> CostSolution:
    """Min-max recursion with nature choosing stage costs."""
    kernel = _prepare(instance, kernel, model)
    T = instance.horizon
    values = [None] * (T + 1)
    values[T] = instance.terminal_cost.copy()
    policy, nature, local, saddle, games = [None] * T, [None] * T, [None] * T, [None] * T, [None] * T
    for t in reversed(range(T)):
        U = values[t + 1]
        v, pol, nat, loc, sad, gms = [], [], [], [], [], []
        for s in range(instance.n_states(t)):
            g = cost_state_game(model[t], instance, kernel[t][s], t, s, U)
            primal, dual = minmax_over_union(g.W, g.pieces)
            v.append(primal.value)
            pol.append(primal.minimizer)
            nat.append(g.points[primal.response])
            loc.append(dual.value)
            sad.append(primal.is_saddle)
            gms.append(g)
        values[t] = np.array(v)
        policy[t], nature[t], local[t], saddle[t], games[t] = pol, nat, loc, sad, gms
    return CostSolution(values, policy, nature, local, saddle, games)


def solve_dual_cost(instance, kernel, model) -> CostSolution:
    """Max-min recursion: nature commits to a cost point before the controller acts."""
    kernel = _prepare(instance, kernel, model)
    T = instance.horizon
    values = [None] * (T + 1)
    values[T] = instance.terminal_cost.copy()
    reply, nature = [None] * T, [None] * T
    for t in reversed(range(T)):
        U = values[t + 1]
        q, rep, nat = [], [], []
        for s in range(instance.n_states(t)):
            g = cost_state_game(model[t], instance, kernel[t][s], t, s, U)
            _, dual = minmax_over_union(g.W, g.pieces)
            q.append(dual.value)
            x = np.zeros(instance.n_actions(t, s))
            x[dual.response] = 1.0
            rep.append(x)
            nat.append(np.tensordot(dual.maximizer, g.points, axes=1))
        values[t] = np.array(q)
        reply[t], nature[t] = rep, nat
    return CostSolution(values, reply, nature)


def _cost_points(stage, instance, t, s):
    """All extreme cost blocks at ``(t, s)`` as an array ``(k, n_actions, n_next)``."""
    if isinstance(stage, SaRect):
        per_action = [stage.sets[s][a].vertices for a in range(instance.n_actions(t, s))]
        return np.array([np.stack(c) for c in itertools.product(*per_action)])
    return np.concatenate(stage.state_pieces(instance, t, s), axis=0)


def support_function_h(instance, kernel, model, t, s, x):
    """Worst-case expected stage cost of action weights ``x`` (any real vector).

    For per-(state, action) sets the maximization separates by action, and a
    negative weight picks the minimizing cost vector instead of the maximizing
    one.
    """
    kernel = check_kernel(instance, kernel)
    stage = model[t]
    P = kernel[t][s]
    x = np.asarray(x, dtype=float).ravel()
    if x.size != instance.n_actions(t, s):
        raise ValidationError(f"weight vector has {x.size} entries for {instance.n_actions(t, s)} actions")
    if isinstance(stage, SaRect):
        total = 0.0
        for a in range(x.size):
            vals = stage.sets[s][a].vertices @ P[a]
            total += x[a] * (vals.max() if x[a] >= 0 else vals.min())
        return float(total)
    pts = _cost_points(stage, instance, t, s)
    H = np.einsum("jan,an->ja", pts, P)
    return float((H @ x).max())


def solve_via_regularization(instance, kernel, model):
    """Risk-neutral recursion with ``h_s`` added as a convex regularizer.

    Each state solves ``min_{pi in simplex} h_s(pi) + sum_a pi_a E_P[V_{t+1}]``
    as one LP: ``min u + b @ pi`` subject to ``u >= H[:, j] @ pi`` for every
    extreme cost block ``j``.
    """
    kernel = _prepare(instance, kernel, model)
    T = instance.horizon
    values = [None] * (T + 1)
    values[T] = instance.terminal_cost.copy()
    policy = [None] * T
    for t in reversed(range(T)):
        U = values[t + 1]
        v, pol = [], []
        for s in range(instance.n_states(t)):
            P = kernel[t][s]
            pts = _cost_points(model[t], instance, t, s)
            H = np.einsum("jan,an->aj", pts, P)
            b = P @ U
            nA, k = H.shape
            c = np.concatenate([b, [1.0]])
            A_ub = np.hstack([H.T, -np.ones((k, 1))])
            A_eq = np.concatenate([np.ones(nA), [0.0]])[None]
            res = solve_lp(LinearProgram(c, A_ub, np.zeros(k), A_eq, [1.0], [(0.0, None)] * nA + [(None, None)]))
            if not res.optimal:
                raise DegenerateError(f"regularized LP at {instance.label(t, s)} ended {res.status}")
            v.append(res.value)
            pol.append(np.maximum(res.x[:nA], 0.0) / np.maximum(res.x[:nA], 0.0).sum())
        values[t] = np.array(v)
        policy[t] = pol
    return values


@dataclass
class CostCommonWorst:
    status: str
    failing: list
    witness: list

    @property
    def holds(self):
        return self.status != "fails"


def check_common_worst_cost(instance, kernel, model, next_values=None, tol=1e-8) -> CostCommonWorst:
    """Check for a cost table that is simultaneously worst for every pure action."""
    if next_values is None:
        next_values = solve_primal_cost(instance, kernel, model).values
    kernel = check_kernel(instance, kernel)
    statewise, global_ok, failing, witness = True, True, [], []
    for t in range(instance.horizon):
        U = next_values[t + 1]
        stage = model[t]
        games = [cost_state_game(stage, instance, kernel[t][s], t, s, U) for s in range(instance.n_states(t))]
        layer = []
        for s, g in enumerate(games):
            best = g.W.max(axis=1)
            total = g.W.sum(axis=0)
            j = int(np.argmax(total))
            ok = total[j] >= best.sum() - tol * (1.0 + np.abs(best).sum())
            if not ok:
                failing.append((t, s))
            layer.append(g.points[j] if ok else None)
        if failing and failing[-1][0] == t:
            statewise = False
        if isinstance(stage, FiniteKernelSet) and len(stage.kernels) > 1:
            target = sum(g.W.max(axis=1).sum() for g in games)
            scale = 1.0 + sum(np.abs(g.W.max(axis=1)).sum() for g in games)
            found = None
            for C in stage.kernels:
                score = sum(float(np.einsum("an,an->", kernel[t][s], C[s] + U[None, :])) for s in range(len(games)))
                if score >= target - tol * scale:
                    found = C
                    break
            global_ok &= found is not None
            witness.append(found)
        else:
            global_ok &= all(w is not None for w in layer)
            witness.append(layer if all(w is not None for w in layer) else None)
    status = "global" if global_ok else ("statewise" if statewise else "fails")
    return CostCommonWorst(status, failing, witness)


def check_convex_cost_marginal(instance, model, t, s):
    return check_convex_marginal(instance, model, t, s)


@dataclass
class CostOracleReport:
    game_primal: float
    game_dual: float
    static_primal: float
    static_dual_lb: float
    tolerance: float
    certified: bool
    verdicts: dict


def static_cost_oracle(instance, kernel, model, config: Optional[OracleConfig] = None) -> CostOracleReport:
    """Static formulation with nature fixing stage cost tables up front, compared with the game."""
    config = config or OracleConfig()
    kernel = _prepare(instance, kernel, model)
    supports = [[np.abs(kernel[t][s]) > 0 for s in range(instance.n_states(t))] for t in range(instance.horizon)]
    masks = reachable_states(instance, supports)
    cap = config.max_enumeration
    prim_st, dual_st = [], []
    for t in range(instance.horizon):
        ext = model[t].extreme_kernels(instance, t, masks[t], cap)
        smp = model[t].sample_kernels(instance, t, config.kernel_grid_resolution, masks[t], cap)
        prim_st.append(build_scenarios(instance, t, [(kernel[t], c) for c in ext], masks[t]))
        dual_st.append(build_scenarios(instance, t, [(kernel[t], c) for c in smp], masks[t]))
    sp, _, _, _ = static_primal_engine(instance, prim_st, masks, config.policy_grid_resolution, cap)
    sd, _, _ = static_dual_engine(instance, dual_st, cap)
    primal = solve_primal_cost(instance, kernel, model)
    dual = solve_dual_cost(instance, kernel, model)
    s1 = instance.initial_state
    gp, gd = float(primal.values[0][s1]), float(dual.values[0][s1])
    big = max([float(np.abs(_cost_points(model[t], instance, t, s)).max())
               for t in range(instance.horizon) for s in range(instance.n_states(t))]
              + [float(np.abs(instance.terminal_cost).max(initial=0.0))])
    tol = (instance.horizon + 1) * big / config.policy_grid_resolution + 1e-6
    certified = all(st.state_rectangular for st in model)
    if not certified:
        certified = check_common_worst_cost(instance, kernel, model, primal.values).status == "global"
    verdicts = {
        "game dual below game primal": gd <= gp + 1e-6,
        "static primal matches game primal": (abs(sp - gp) <= tol) if certified else None,
        "static dual below game dual": (sd <= gd + 1e-6) if certified else None,
    }
    return CostOracleReport(gp, gd, sp, sd, tol, certified, verdicts)


@dataclass
class CostSolveReport:
    primal_values: list
    dual_values: list
    policy: list
    gap: float
    per_state_saddle: list
    common_worst: CostCommonWorst
    convex_marginal: list
    regularized_values: list
    implications: dict


def diagnose_cost(instance, kernel, model) -> CostSolveReport:
    primal = solve_primal_cost(instance, kernel, model)
    dual = solve_dual_cost(instance, kernel, model)
    reg = solve_via_regularization(instance, kernel, model)
    s1 = instance.initial_state
    gap = float(primal.values[0][s1] - dual.values[0][s1])
    verdict = check_common_worst_cost(instance, kernel, model, primal.values)
    convex = [[check_convex_marginal(instance, model, t, s) for s in range(instance.n_states(t))]
              for t in range(instance.horizon)]
    all_convex = all(all(bool(v) for v in layer) for layer in convex)
    all_saddle = all(all(layer) for layer in primal.saddle)
    implications = {
        "common worst-case cost => no gap": (not verdict.holds) or gap <= GAP_TOL,
        "convex marginals => saddle everywhere": (not all_convex) or all_saddle,
        "regularized recursion matches": max(float(np.max(np.abs(a - b))) for a, b in zip(reg, primal.values)) <= 1e-8,
    }
    return CostSolveReport(primal.values, dual.values, primal.policy, gap, primal.saddle, verdict, convex,
                           reg, implications)
