"""Brute-force oracles for the static formulation and history-dependent controllers.

In the static formulation nature fixes one kernel per stage before the
process starts. For a fixed Markov policy the expected total cost is
multilinear in the stage kernels ``(P_1, ..., P_T)``: it is affine in each
stage's kernel when the others are held fixed. The supremum over a product
of stage sets is therefore attained at extreme points stage by stage, so
enumerating one extreme kernel per stage computes the inner supremum
exactly. The controller side is searched over a simplex grid, which only
adds candidates as the grid is refined.

The static dual puts the minimum inside: for a fixed kernel sequence it is an
ordinary MDP, and the result is concave in the kernels, so vertices do not
suffice. It is approximated from below by sampling convex-weight grids.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .ambiguity import RRect, SrRect, s_rect_enlargement, require_valid_model
from .exceptions import EnumerationCapError
from .grid import dedup_rows, simplex_grid
from .mdp import reachable_states, require_valid
from .robust import GAP_TOL, VALUE_TOL, check_common_worst_kernel, diagnose, solve_dual, solve_primal

CHUNK_BUDGET = 4_000_000


@dataclass
class OracleConfig:
    """Grid resolutions and the enumeration cap for the brute-force oracles.

    ``max_enumeration`` bounds the number of (policy, kernel sequence) pairs
    evaluated by the static primal, the number of kernel sequences visited by
    the static dual, and the (controller, nature) pairs of the
    history-dependent check.
    """

    policy_grid_resolution: int = 20
    kernel_grid_resolution: int = 12
    max_enumeration: int = 50_000_000

    def __post_init__(self):
        if self.policy_grid_resolution < 1 or self.kernel_grid_resolution < 1:
            raise ValueError("grid resolutions must be at least 1")
        if self.max_enumeration < 1:
            raise ValueError("enumeration cap must be at least 1")


@dataclass
class StageScenarios:
    """Padded per-stage scenario tensors of shape ``(m, n_states, max_actions, n_next)``."""

    P: np.ndarray
    C: np.ndarray
    valid: np.ndarray  # (n_states, max_actions) boolean

    @property
    def count(self):
        return self.P.shape[0]


def build_scenarios(instance, t, pairs, mask):
    """Pack ``(kernel_blocks, cost_blocks)`` pairs, dropping duplicates on reachable states."""
    nS, nN = instance.n_states(t), instance.n_states(t + 1)
    A = max(instance.n_actions(t, s) for s in range(nS))
    valid = np.zeros((nS, A), dtype=bool)
    for s in range(nS):
        valid[s, :instance.n_actions(t, s)] = True
    P = np.zeros((len(pairs), nS, A, nN))
    C = np.zeros((len(pairs), nS, A, nN))
    for m, (kb, cb) in enumerate(pairs):
        for s in range(nS):
            if not mask[s]:
                continue
            k = instance.n_actions(t, s)
            P[m, s, :k] = kb[s]
            C[m, s, :k] = cb[s]
    key = np.concatenate([P.reshape(len(pairs), -1), C.reshape(len(pairs), -1)], axis=1)
    keep = _unique_index(key)
    return StageScenarios(P[keep], C[keep], valid)


def _unique_index(rows):
    _, idx = np.unique(np.round(rows, 12) + 0.0, axis=0, return_index=True)
    return np.sort(idx)


def model_reachability(instance, model):
    supports = [model[t].supports(instance, t) for t in range(instance.horizon)]
    return reachable_states(instance, supports)


def lipschitz_constant(instance):
    big = max([float(np.abs(c).max(initial=0.0)) for layer in instance.costs for c in layer]
              + [float(np.abs(instance.terminal_cost).max(initial=0.0))])
    return (instance.horizon + 1) * big


@dataclass
class StaticPrimalResult:
    value: float
    policy: list
    worst_scenarios: list
    lipschitz: float
    spacing: float
    evaluated: int

    @property
    def tolerance(self):
        return self.lipschitz * self.spacing


def _decision_grids(instance, masks, resolution):
    points, grids = [], []
    for t in range(instance.horizon):
        for s in np.flatnonzero(masks[t]):
            n = instance.n_actions(t, s)
            if n > 1:
                points.append((t, int(s)))
                grids.append(simplex_grid(n, resolution))
    return points, grids


def static_primal_engine(instance, stages: List[StageScenarios], masks, resolution, cap):
    """Exact worst case over scenario sequences for every grid policy; returns the grid minimum.

    Values are built backwards over a joint index of (policy-grid choices at
    the remaining decision points, scenario suffix). A state's value only
    depends on its own grid row, so each stage widens the policy axis by an
    outer product instead of re-evaluating every full policy from scratch.
    """
    T = instance.horizon
    grids = []
    for t in range(T):
        layer = []
        for s in range(instance.n_states(t)):
            n = instance.n_actions(t, s)
            if masks[t][s] and n > 1:
                layer.append(simplex_grid(n, resolution))
            else:
                layer.append(np.full((1, n), 1.0 / n))
        grids.append(layer)
    n_pol = int(np.prod([len(g) for layer in grids for g in layer], dtype=object))
    n_scen = int(np.prod([st.count for st in stages], dtype=object))
    if n_pol * n_scen > cap:
        raise EnumerationCapError("static primal (policies x kernel sequences)", n_pol * n_scen, cap)

    V = instance.terminal_cost[None, None, :]  # (policy suffix, scenario suffix, state)
    for t in reversed(range(1, T)):
        V = _widen(instance, t, stages[t], grids[t], masks[t], V)

    s1 = instance.initial_state
    st = stages[0]
    k = instance.n_actions(0, s1)
    P0, C0 = st.P[:, s1, :k], st.C[:, s1, :k]
    const = np.einsum("man,man->ma", P0, C0)
    G, K = V.shape[0], V.shape[1]
    g0 = grids[0][s1]
    step = max(1, CHUNK_BUDGET // max(1, len(g0) * st.count * K * k))
    best_val, best_pol, best_scen = np.inf, (0, 0), 0
    for lo in range(0, G, step):
        Vc = V[lo:lo + step]
        # Q[G, m, K, a] then value[g0, G, m, K]
        Q = np.einsum("man,gkn->gmka", P0, Vc) + const[None, :, None, :]
        val = np.einsum("ja,gmka->jgmk", g0, Q).reshape(len(g0), Vc.shape[0], -1)
        scen = val.argmax(axis=2)
        worst = np.take_along_axis(val, scen[..., None], axis=2)[..., 0]
        j, g = np.unravel_index(int(np.argmin(worst)), worst.shape)
        if worst[j, g] < best_val - 1e-12:
            best_val, best_pol, best_scen = float(worst[j, g]), (int(j), lo + int(g)), int(scen[j, g])

    # Decode policy and scenario indices back into per-stage choices.
    shape = [len(g) for layer in grids[1:] for g in layer]
    rest = np.unravel_index(best_pol[1], shape) if shape else ()
    policy = [[g[0].copy() for g in layer] for layer in grids]
    policy[0][s1] = g0[best_pol[0]].copy()
    pos = 0
    for t in range(1, T):
        for s, g in enumerate(grids[t]):
            policy[t][s] = g[rest[pos]].copy()
            pos += 1
    counts = [st.count for st in stages]
    choice = np.unravel_index(best_scen, counts)
    return best_val, policy, [int(c) for c in choice], n_pol * n_scen


def _widen(instance, t, st, grid_layer, mask, V):
    """One backward step: fold stage ``t`` scenarios and policy rows into ``V``."""
    G, K = V.shape[0], V.shape[1]
    m = st.count
    nS = instance.n_states(t)
    per_state = []
    for s in range(nS):
        g = grid_layer[s]
        if not mask[s]:
            per_state.append(np.zeros((len(g), G, m, K)))
            continue
        k = instance.n_actions(t, s)
        P, C = st.P[:, s, :k], st.C[:, s, :k]
        Q = np.einsum("man,gkn->gmka", P, V) + np.einsum("man,man->ma", P, C)[None, :, None, :]
        per_state.append(np.einsum("ja,gmka->jgmk", g, Q))
    sizes = [len(g) for g in grid_layer]
    out = np.empty(sizes + [G, m * K, nS])
    for s, arr in enumerate(per_state):
        view = arr.reshape([1] * s + [sizes[s]] + [1] * (nS - s - 1) + [G, m * K])
        out[..., s] = view
    return out.reshape(-1, m * K, nS)


def _decode(idx, radix):
    """Mixed-radix digits of ``idx``; ``radix[0]`` is the fastest-varying place."""
    out = np.empty((len(idx), len(radix)), dtype=np.int64)
    rem = idx.copy()
    for i, r in enumerate(radix):
        out[:, i] = rem % r
        rem //= r
    return out


def _kernel_stage_scenarios(instance, model, masks, cap, sample_resolution=None):
    stages = []
    for t in range(instance.horizon):
        mask = masks[t]
        if sample_resolution is None:
            kernels = model[t].extreme_kernels(instance, t, mask, cap)
        else:
            kernels = model[t].sample_kernels(instance, t, sample_resolution, mask, cap)
        stages.append(build_scenarios(instance, t, [(k, instance.costs[t]) for k in kernels], mask))
    return stages


def static_primal(instance, model, config: Optional[OracleConfig] = None) -> StaticPrimalResult:
    """Grid minimum over Markov policies of the exact worst case over kernel sequences."""
    config = config or OracleConfig()
    require_valid(instance)
    require_valid_model(model, instance)
    masks = model_reachability(instance, model)
    stages = _kernel_stage_scenarios(instance, model, masks, config.max_enumeration)
    value, policy, choice, n = static_primal_engine(instance, stages, masks, config.policy_grid_resolution,
                                                    config.max_enumeration)
    worst = [_scenario_blocks(instance, t, stages[t], choice[t]) for t in range(instance.horizon)]
    return StaticPrimalResult(value, policy, worst, lipschitz_constant(instance),
                              1.0 / config.policy_grid_resolution, n)


def _scenario_blocks(instance, t, st, m):
    return [st.P[m, s, :instance.n_actions(t, s)].copy() for s in range(instance.n_states(t))]


@dataclass
class StaticDualResult:
    value: float
    kernels: list
    evaluated: int


def static_dual_engine(instance, stages: List[StageScenarios], cap):
    counts = [st.count for st in stages]
    total = int(np.prod(counts, dtype=object))
    if total > cap:
        raise EnumerationCapError("static dual (kernel sequences)", total, cap)
    T = instance.horizon
    V = instance.terminal_cost[None, :]
    for t in reversed(range(T)):
        st = stages[t]
        X = np.einsum("msan,kn->mksa", st.P, V) + np.einsum("msan,msan->msa", st.P, st.C)[:, None]
        X = np.where(st.valid[None, None], X, np.inf)
        V = X.min(axis=-1).reshape(-1, X.shape[2])
    col = V[:, instance.initial_state]
    best = int(np.argmax(col))
    digits = _decode(np.array([best]), np.array(counts[::-1], dtype=np.int64))[0][::-1]
    return float(col[best]), list(digits), total


def static_dual(instance, model, config: Optional[OracleConfig] = None) -> StaticDualResult:
    """Best sampled kernel sequence for the static dual; a lower bound on its optimum."""
    config = config or OracleConfig()
    require_valid(instance)
    require_valid_model(model, instance)
    masks = model_reachability(instance, model)
    stages = _kernel_stage_scenarios(instance, model, masks, config.max_enumeration,
                                     sample_resolution=config.kernel_grid_resolution)
    value, choice, n = static_dual_engine(instance, stages, config.max_enumeration)
    kernels = [_scenario_blocks(instance, t, stages[t], choice[t]) for t in range(instance.horizon)]
    return StaticDualResult(value, kernels, n)


# ---------------------------------------------------------------------------
# Comparisons


def structurally_certified(model):
    """True for set classes whose game and static formulations coincide by construction."""
    for stage in model:
        if stage.state_rectangular or isinstance(stage, (RRect, SrRect)):
            continue
        return False
    return True


@dataclass
class EquivalenceReport:
    game_primal: float
    static_primal: float
    game_dual: float
    static_dual_lb: float
    tolerance: float
    certified: bool
    certification: str
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v is not False for v in self.verdicts.values())


def check_equivalence(instance, model, config: Optional[OracleConfig] = None) -> EquivalenceReport:
    """Compare game values with the static oracles.

    Agreement is only asserted where the equivalence is certified, either by
    the set's rectangular structure or by a common worst-case kernel; other
    models get their raw numbers recorded with ``None`` verdicts.
    """
    config = config or OracleConfig()
    primal = solve_primal(instance, model)
    dual = solve_dual(instance, model, check=False)
    sp = static_primal(instance, model, config)
    sd = static_dual(instance, model, config)
    s1 = instance.initial_state
    gp, gd = float(primal.values[0][s1]), float(dual.values[0][s1])
    tol = sp.tolerance + 1e-6
    if structurally_certified(model):
        certified, how = True, "rectangular structure"
    else:
        verdict = check_common_worst_kernel(instance, model, primal.values)
        certified = verdict.status == "global"
        how = "common worst-case kernel" if certified else "none"
    verdicts = {
        "static dual below game dual": sd.value <= gd + 1e-6,
        "game dual below game primal": gd <= gp + 1e-6,
        "static primal matches game primal": (abs(sp.value - gp) <= tol) if certified else None,
        "static dual matches game dual": (sd.value <= gd + 1e-6) if certified else None,
    }
    if not certified:
        verdicts["static dual below game dual"] = None
    return EquivalenceReport(gp, sp.value, gd, sd.value, tol, certified, how, verdicts)


@dataclass
class EnlargementReport:
    max_primal_diff: float
    max_dual_diff: float
    tolerance: float = VALUE_TOL

    @property
    def invariant(self):
        return self.max_primal_diff <= self.tolerance and self.max_dual_diff <= self.tolerance


def enlargement_invariance(instance, model) -> EnlargementReport:
    """Solve on the model and on its state-rectangular enlargement and compare tables."""
    big = s_rect_enlargement(model, instance)
    p0, p1 = solve_primal(instance, model), solve_primal(instance, big)
    d0, d1 = solve_dual(instance, model, check=False), solve_dual(instance, big, check=False)
    dp = max(float(np.max(np.abs(a - b))) for a, b in zip(p0.values, p1.values))
    dd = max(float(np.max(np.abs(a - b))) for a, b in zip(d0.values, d1.values))
    return EnlargementReport(dp, dd)


# ---------------------------------------------------------------------------
# History-dependent controllers


@dataclass
class HistoryReport:
    value: float
    game_primal: float
    game_dual: float
    controller_policies: int
    nature_policies: int
    certified: bool
    verdicts: dict
    notes: List[str] = field(default_factory=list)


def history_dependent_check(instance, model, config: Optional[OracleConfig] = None) -> HistoryReport:
    """Exhaustive min-max of deterministic history-dependent controllers against Markov nature.

    A history records visited states, the controller's actions and the index
    of the extreme point nature used at each past step. Nature picks one
    extreme point of the state marginal per stage and state, independent of
    the history.
    """
    config = config or OracleConfig()
    report = diagnose(instance, model)
    T = instance.horizon
    masks = model_reachability(instance, model)
    marg = {}
    for t in range(T):
        for s in np.flatnonzero(masks[t]):
            pts = np.concatenate(model[t].state_pieces(instance, t, int(s)), axis=0)
            marg[(t, int(s))] = dedup_rows(pts)

    # History tree: node = (t, s, parent-derived key); children by (a, k, s').
    nodes = []
    children = []
    nodes.append((0, instance.initial_state))
    children.append({})
    order = [0]
    head = 0
    while head < len(order):
        n = order[head]
        head += 1
        t, s = nodes[n]
        if t == T - 1:
            continue
        pts = marg[(t, s)]
        for a in range(instance.n_actions(t, s)):
            for k in range(len(pts)):
                for s2 in np.flatnonzero(pts[k, a] > 0):
                    nodes.append((t + 1, int(s2)))
                    children.append({})
                    children[n][(a, k, int(s2))] = len(nodes) - 1
                    order.append(len(nodes) - 1)
    H = len(nodes)
    arity = np.array([instance.n_actions(t, s) for t, s in nodes], dtype=np.int64)
    n_ctrl = int(np.prod(arity, dtype=object))
    nat_keys = sorted(marg)
    nat_sizes = [len(marg[k]) for k in nat_keys]
    n_nat = int(np.prod(nat_sizes, dtype=object))
    if n_ctrl * n_nat > config.max_enumeration:
        raise EnumerationCapError("history-dependent check (controller x nature policies)", n_ctrl * n_nat,
                                  config.max_enumeration)
    nature_list = list(itertools.product(*[range(n) for n in nat_sizes]))
    chunk = max(1, CHUNK_BUDGET // max(1, H * 4))
    best = np.inf
    for start in range(0, n_ctrl, chunk):
        idx = np.arange(start, min(n_ctrl, start + chunk), dtype=np.int64)
        acts = _decode(idx, arity)
        worst = np.full(len(idx), -np.inf)
        for gamma in nature_list:
            choice = dict(zip(nat_keys, gamma))
            val = np.zeros((H, len(idx)))
            for n in reversed(range(H)):
                t, s = nodes[n]
                k = choice[(t, s)]
                row_block = marg[(t, s)][k]
                c = instance.costs[t][s]
                q = np.zeros((instance.n_actions(t, s), len(idx)))
                for a in range(instance.n_actions(t, s)):
                    for s2 in np.flatnonzero(row_block[a] > 0):
                        p = row_block[a, s2]
                        nxt = instance.terminal_cost[s2] if t == T - 1 else val[children[n][(a, k, int(s2))]]
                        q[a] += p * (c[a, s2] + nxt)
                val[n] = q[acts[:, n], np.arange(len(idx))]
            worst = np.maximum(worst, val[0])
        best = min(best, float(worst.min()))
    s1 = instance.initial_state
    gp = float(report.primal_values[0][s1])
    gd = float(report.dual_values[0][s1])
    certified = (report.gap <= GAP_TOL and report.deterministic_policy is not None
                 and (report.common_worst.holds or report.all_convex))
    verdicts = {
        "not below game dual": best >= gd - VALUE_TOL,
        "not below game primal": best >= gp - VALUE_TOL,
        "equals game primal": (abs(best - gp) <= GAP_TOL) if certified else None,
    }
    notes = ["nature restricted to extreme points of each state marginal and to Markov policies"]
    return HistoryReport(best, gp, gd, n_ctrl, n_nat, certified, verdicts, notes)
