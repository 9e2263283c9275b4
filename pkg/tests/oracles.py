"""Independent reference computations used by the tests.

Nothing here calls the package's solvers: values come from path
enumeration, exhaustive policy search and scipy's LP solver. Running this
file regenerates ``frozen_oracles.json`` from fixed seeds.
"""

from __future__ import annotations

import itertools
import json
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

FROZEN_PATH = Path(__file__).with_name("frozen_oracles.json")


# ---------------------------------------------------------------------------
# Plain MDP


def path_value(instance, policy, kernel, t=0, s=None):
    """Expected total cost by enumerating every trajectory from ``(t, s)``."""
    s = instance.initial_state if s is None else s
    if t == instance.horizon:
        return float(instance.terminal_cost[s])
    total = 0.0
    for a, pa in enumerate(policy[t][s]):
        if pa == 0:
            continue
        for s2, ps in enumerate(kernel[t][s][a]):
            if ps == 0:
                continue
            total += pa * ps * (instance.costs[t][s][a, s2] + path_value(instance, policy, kernel, t + 1, s2))
    return total


def all_deterministic_policies(instance):
    slots = [(t, s) for t in range(instance.horizon) for s in range(instance.n_states(t))]
    for choice in itertools.product(*[range(instance.n_actions(t, s)) for t, s in slots]):
        pol = [[None] * instance.n_states(t) for t in range(instance.horizon)]
        for (t, s), a in zip(slots, choice):
            row = np.zeros(instance.n_actions(t, s))
            row[a] = 1.0
            pol[t][s] = row
        yield pol


def best_deterministic_value(instance, kernel):
    return min(path_value(instance, pol, kernel) for pol in all_deterministic_policies(instance))


# ---------------------------------------------------------------------------
# Games via scipy


def scipy_minmax(M):
    """``min_x max_j x @ M[:, j]`` over the simplex."""
    M = np.asarray(M, dtype=float)
    m, k = M.shape
    c = np.r_[np.zeros(m), 1.0]
    A = np.c_[M.T, -np.ones(k)]
    res = linprog(c, A_ub=A, b_ub=np.zeros(k), A_eq=np.r_[np.ones(m), 0.0][None], b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    return float(res.fun), res.x[:m]


def scipy_maxmin(M):
    """``max_y min_i M[i] @ y`` over the simplex."""
    v, y = scipy_minmax(-np.asarray(M, dtype=float).T)
    return -v, y


def scipy_union_game(W, pieces):
    """Primal over pooled columns; dual as the best piece-wise max-min."""
    primal, _ = scipy_minmax(W)
    dual = max(scipy_maxmin(W[:, list(p)])[0] for p in pieces)
    return primal, dual


def state_payoffs(points, cost, next_values):
    """``W[a, j] = points[j][a] @ (cost[a] + next_values)``."""
    pts = np.asarray(points, dtype=float)
    return np.einsum("jan,an->aj", pts, cost + next_values[None, :])


def robust_tables(instance, marginal_pieces):
    """Game recursions from explicit marginal pieces ``marginal_pieces[t][s] = [array (k, nA, nN), ...]``."""
    T = instance.horizon
    V = [None] * (T + 1)
    Q = [None] * (T + 1)
    V[T] = np.array(instance.terminal_cost, dtype=float)
    Q[T] = V[T].copy()
    for t in reversed(range(T)):
        v, q = [], []
        for s in range(instance.n_states(t)):
            pieces = marginal_pieces[t][s]
            pooled = np.concatenate(pieces, axis=0)
            idx, start = [], 0
            for p in pieces:
                idx.append(range(start, start + len(p)))
                start += len(p)
            c = instance.costs[t][s]
            v.append(scipy_union_game(state_payoffs(pooled, c, V[t + 1]), idx)[0])
            q.append(scipy_union_game(state_payoffs(pooled, c, Q[t + 1]), idx)[1])
        V[t], Q[t] = np.array(v), np.array(q)
    return V, Q


# ---------------------------------------------------------------------------
# Static formulation by exhaustive search


def grid_points(k, resolution):
    for combo in itertools.product(range(resolution + 1), repeat=k - 1):
        if sum(combo) <= resolution:
            yield np.array(list(combo) + [resolution - sum(combo)], dtype=float) / resolution


def static_primal_bruteforce(instance, stage_kernels, resolution):
    """Grid minimum over Markov policies of the max over listed kernel sequences."""
    slots = [(t, s) for t in range(instance.horizon) for s in range(instance.n_states(t))]
    grids = [list(grid_points(instance.n_actions(t, s), resolution)) for t, s in slots]
    best = np.inf
    for rows in itertools.product(*grids):
        pol = [[None] * instance.n_states(t) for t in range(instance.horizon)]
        for (t, s), r in zip(slots, rows):
            pol[t][s] = r
        worst = max(path_value(instance, pol, list(seq)) for seq in itertools.product(*stage_kernels))
        best = min(best, worst)
    return best


# ---------------------------------------------------------------------------
# Risk


def avar_by_scan(values, probabilities, alpha):
    """``min_tau tau + E[(Z - tau)_+] / alpha``; the objective is piecewise linear with kinks at the support."""
    z = np.asarray(values, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    return min(tau + p @ np.maximum(z - tau, 0.0) / alpha for tau in z)


def avar_by_scipy(values, probabilities, alpha):
    z = np.asarray(values, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    res = linprog(-z, A_eq=np.ones((1, z.size)), b_eq=[1.0], bounds=[(0, pi / alpha) for pi in p], method="highs")
    return -float(res.fun)


# ---------------------------------------------------------------------------
# Frozen outputs


def _frozen_cases():
    """Seeded cases whose oracle outputs are stored on disk."""
    from drmdp.generators import random_instance, random_kernel, random_model

    out = {"nominal": [], "robust_finite": [], "static_sa_rect": []}
    rng = np.random.default_rng(20240601)
    for i in range(5):
        inst = random_instance(rng, (1, 3, 3), 2)
        kernel = random_kernel(rng, inst)
        out["nominal"].append({"seed_index": i, "value": best_deterministic_value(inst, kernel)})
    rng = np.random.default_rng(20240602)
    for i in range(5):
        inst = random_instance(rng, (1, 2, 2), 2)
        model = random_model(rng, inst, "finite", n_kernels=3)
        pieces = [[st.state_pieces(inst, t, s) for s in range(inst.n_states(t))] for t, st in enumerate(model)]
        V, Q = robust_tables(inst, pieces)
        out["robust_finite"].append({"seed_index": i, "primal": float(V[0][0]), "dual": float(Q[0][0])})
    rng = np.random.default_rng(20240603)
    for i in range(3):
        inst = random_instance(rng, (1, 2, 2), 2)
        model = random_model(rng, inst, "sa_rect")
        kernels = [st.extreme_kernels(inst, t) for t, st in enumerate(model)]
        out["static_sa_rect"].append({"seed_index": i, "value": static_primal_bruteforce(inst, kernels, 6)})
    return out


def frozen():
    return json.loads(FROZEN_PATH.read_text())


if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    FROZEN_PATH.write_text(json.dumps(_frozen_cases(), indent=2) + "\n")
    print(f"wrote {FROZEN_PATH}")
