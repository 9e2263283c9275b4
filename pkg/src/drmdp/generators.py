"""Random desk-scale instances and ambiguity sets for property tests and sweeps."""

from __future__ import annotations

import numpy as np

from .ambiguity import FiniteKernelSet, Polytope, RRect, SaRect, Singleton, SRect
from .mdp import MdpInstance


def random_instance(rng, layer_sizes=(1, 2, 2), max_actions=2, cost_scale=1.0, next_state_free=False):
    """Instance with ``layer_sizes[t]`` states per stage and 1..max_actions actions per state."""
    T = len(layer_sizes) - 1
    states = [[f"s{t + 1}_{i}" for i in range(n)] for t, n in enumerate(layer_sizes)]
    actions, costs = [], []
    for t in range(T):
        acts, cs = [], []
        for _ in range(layer_sizes[t]):
            k = int(rng.integers(1, max_actions + 1)) if max_actions > 1 else 1
            acts.append([f"a{j}" for j in range(k)])
            if next_state_free:
                c = np.repeat(rng.uniform(-cost_scale, cost_scale, (k, 1)), layer_sizes[t + 1], axis=1)
            else:
                c = rng.uniform(-cost_scale, cost_scale, (k, layer_sizes[t + 1]))
            cs.append(c)
        actions.append(acts)
        costs.append(cs)
    terminal = rng.uniform(-cost_scale, cost_scale, layer_sizes[-1])
    return MdpInstance(states, actions, costs, terminal, 0)


def random_distribution(rng, n, sparsity=0.0):
    p = rng.dirichlet(np.ones(n))
    if sparsity > 0 and n > 1:
        drop = rng.random(n) < sparsity
        drop[int(rng.integers(n))] = False
        p = np.where(drop, 0.0, p)
        p /= p.sum()
    return p


def random_kernel(rng, instance):
    return [[np.array([random_distribution(rng, instance.n_states(t + 1)) for _ in range(instance.n_actions(t, s))])
             for s in range(instance.n_states(t))] for t in range(instance.horizon)]


def random_sa_rect(rng, instance, t, n_vertices=2):
    nN = instance.n_states(t + 1)
    return SaRect([[Polytope([random_distribution(rng, nN) for _ in range(n_vertices)])
                    for _ in range(instance.n_actions(t, s))] for s in range(instance.n_states(t))])


def random_finite_set(rng, instance, t, n_kernels=3, hull=False):
    kernels = []
    for _ in range(n_kernels):
        kernels.append([np.array([random_distribution(rng, instance.n_states(t + 1))
                                  for _ in range(instance.n_actions(t, s))])
                        for s in range(instance.n_states(t))])
    return FiniteKernelSet(kernels, hull=hull)


def random_s_rect(rng, instance, t, n_pieces=2, n_vertices=2):
    sets = []
    for s in range(instance.n_states(t)):
        pieces = []
        for _ in range(n_pieces):
            pieces.append(np.array([[random_distribution(rng, instance.n_states(t + 1))
                                     for _ in range(instance.n_actions(t, s))] for _ in range(n_vertices)]))
        sets.append(pieces)
    return SRect(sets)


def random_r_rect(rng, instance, t, n_factors=2, n_vertices=2):
    """Factor sets made of distributions with coefficient rows summing to one."""
    nN = instance.n_states(t + 1)
    factors = [np.array([random_distribution(rng, nN) for _ in range(n_vertices)]) for _ in range(n_factors)]
    coeffs = [np.array([rng.dirichlet(np.ones(n_factors)) for _ in range(instance.n_actions(t, s))])
              for s in range(instance.n_states(t))]
    return RRect(factors, coeffs)


def random_model(rng, instance, kind="finite", **kw):
    makers = {
        "finite": random_finite_set,
        "sa_rect": random_sa_rect,
        "s_rect": random_s_rect,
        "r_rect": random_r_rect,
    }
    if kind == "singleton":
        return [Singleton(k) for k in random_kernel(rng, instance)]
    return [makers[kind](rng, instance, t, **kw) for t in range(instance.horizon)]
