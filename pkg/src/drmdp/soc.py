"""Kernel ambiguity induced by noise-distribution ambiguity in a state equation.

Transitions follow ``s' = F_t(s, a, xi)`` with noise ``xi`` drawn from a
distribution ``Q`` that nature picks from a polytope over the noise support.
The induced kernel ``P^Q(s'|s,a) = sum_xi Q(xi) [F_t(s, a, xi) = s']`` is
linear in ``Q``, so the images of the polytope's vertices generate the
induced kernel set. The same ``Q`` drives every state and action, which is
why such sets are generally not rectangular.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .ambiguity import FiniteKernelSet, Polytope, Singleton
from .exceptions import CostAggregationError, ValidationError
from .grid import dedup_rows
from .lp import hull_distance, in_hull, minmax_over_union
from .mdp import MdpInstance, require_valid
from .validation import simplex_violation


@dataclass
class SocSpec:
    """State-equation model on top of an instance skeleton.

    ``transition[t][s][a]`` and ``costs[t][s][a]`` are arrays over the noise
    outcomes ``noise[t]``; the first holds next-state indices. The skeleton
    supplies states, actions, terminal cost and the initial state; its stage
    costs are ignored.
    """

    skeleton: MdpInstance
    noise: List[List[str]]
    transition: list
    costs: list
    noise_ambiguity: List[Polytope]

    def __post_init__(self):
        self.transition = [[[np.asarray(f, dtype=int).ravel() for f in acts] for acts in layer]
                           for layer in self.transition]
        self.costs = [[[np.asarray(c, dtype=float).ravel() for c in acts] for acts in layer]
                      for layer in self.costs]
        self.noise_ambiguity = [p if isinstance(p, Polytope) else Polytope(p) for p in self.noise_ambiguity]

    @property
    def horizon(self):
        return self.skeleton.horizon

    def validate(self):
        inst = self.skeleton
        out = []
        T = inst.horizon
        for name, table in (("noise", self.noise), ("transition", self.transition), ("costs", self.costs),
                            ("noise ambiguity", self.noise_ambiguity)):
            if len(table) != T:
                out.append(f"{name} covers {len(table)} stages, expected {T}")
        if out:
            return out
        for t in range(T):
            nX, nN = len(self.noise[t]), inst.n_states(t + 1)
            poly = self.noise_ambiguity[t]
            if poly.dim != nX:
                out.append(f"stage {t + 1}: noise set of dimension {poly.dim} for {nX} outcomes")
            else:
                try:
                    for v in poly.vertices:
                        problem = simplex_violation(v)
                        if problem:
                            out.append(f"stage {t + 1}: noise distribution {problem}")
                            break
                except ValidationError as exc:
                    out.append(f"stage {t + 1}: {exc}")
            for s in range(inst.n_states(t)):
                for a in range(inst.n_actions(t, s)):
                    where = f"({t + 1}, {inst.states[t][s]}, {inst.actions[t][s][a]})"
                    try:
                        f = self.transition[t][s][a]
                        c = self.costs[t][s][a]
                    except IndexError:
                        out.append(f"{where}: missing transition or cost")
                        continue
                    if f.size != nX or c.size != nX:
                        out.append(f"{where}: expected {nX} noise outcomes")
                    elif f.min() < 0 or f.max() >= nN:
                        out.append(f"{where}: next state index outside stage {t + 2}")
                    elif not np.all(np.isfinite(c)):
                        out.append(f"{where}: non-finite cost")
        return out

    def require_valid(self):
        require_valid(self.skeleton)
        problems = self.validate()
        if problems:
            raise ValidationError("invalid state-equation model: " + "; ".join(problems), problems)
        return self


def pushforward(spec: SocSpec, t, q):
    """Stage kernel induced by noise distribution ``q``."""
    inst = spec.skeleton
    q = np.asarray(q, dtype=float)
    nN = inst.n_states(t + 1)
    out = []
    for s in range(inst.n_states(t)):
        block = np.zeros((inst.n_actions(t, s), nN))
        for a in range(inst.n_actions(t, s)):
            np.add.at(block[a], spec.transition[t][s][a], q)
        out.append(block)
    return out


def induced_costs(spec: SocSpec):
    """Stage costs ``c(s, a, s')``; refuses when two outcomes landing together disagree."""
    inst = spec.skeleton
    costs = []
    for t in range(inst.horizon):
        layer = []
        for s in range(inst.n_states(t)):
            block = np.zeros((inst.n_actions(t, s), inst.n_states(t + 1)))
            for a in range(inst.n_actions(t, s)):
                seen = {}
                for f, c in zip(spec.transition[t][s][a], spec.costs[t][s][a]):
                    if f in seen and seen[f] != c:
                        raise CostAggregationError(
                            f"({t + 1}, {inst.states[t][s]}, {inst.actions[t][s][a]}): outcomes reaching "
                            f"{inst.states[t + 1][f]} carry costs {seen[f]} and {c}")
                    seen[f] = c
                    block[a, f] = c
            layer.append(block)
        costs.append(layer)
    return costs


def build_soc_ambiguity(spec: SocSpec):
    """Induced instance and kernel model (a hull of vertex images per stage)."""
    spec.require_valid()
    inst = spec.skeleton
    instance = inst.with_costs(induced_costs(spec))
    model = []
    for t in range(inst.horizon):
        V = dedup_rows(spec.noise_ambiguity[t].vertices)
        kernels = [pushforward(spec, t, q) for q in V]
        model.append(Singleton(kernels[0]) if len(kernels) == 1 else FiniteKernelSet(kernels, hull=True))
    return instance, model


@dataclass
class NoiseSpaceSolution:
    primal_values: list
    dual_values: list
    policy: list


def solve_soc_noise_space(spec: SocSpec) -> NoiseSpaceSolution:
    """Game recursions with nature choosing the noise law at each state.

    Works with costs that depend on the noise outcome itself, where the
    reduction to a kernel model is not available.
    """
    spec.require_valid()
    inst = spec.skeleton
    T = inst.horizon
    V = [None] * (T + 1)
    Q = [None] * (T + 1)
    V[T] = inst.terminal_cost.copy()
    Q[T] = inst.terminal_cost.copy()
    policy = [None] * T
    for t in reversed(range(T)):
        verts = dedup_rows(spec.noise_ambiguity[t].vertices)
        pieces = [np.arange(len(verts))]
        v, q, pol = [], [], []
        for s in range(inst.n_states(t)):
            F = spec.transition[t][s]
            C = spec.costs[t][s]
            Wv = np.array([[qv @ (C[a] + V[t + 1][F[a]]) for qv in verts] for a in range(inst.n_actions(t, s))])
            Wq = np.array([[qv @ (C[a] + Q[t + 1][F[a]]) for qv in verts] for a in range(inst.n_actions(t, s))])
            primal, _ = minmax_over_union(Wv, pieces)
            _, dual = minmax_over_union(Wq, pieces)
            v.append(primal.value)
            q.append(dual.value)
            pol.append(primal.minimizer)
        V[t], Q[t], policy[t] = np.array(v), np.array(q), pol
    return NoiseSpaceSolution(V, Q, policy)


@dataclass
class SocProbeReport:
    status: str  # "not_rectangular", "rectangular" or "inconclusive"
    stage: Optional[int] = None
    witness: Optional[list] = None
    lp_distance: Optional[float] = None
    notes: List[str] = field(default_factory=list)


def _injective(spec, t):
    inst = spec.skeleton
    return all(len(set(spec.transition[t][s][a].tolist())) == spec.transition[t][s][a].size
               for s in range(inst.n_states(t)) for a in range(inst.n_actions(t, s)))


def soc_rectangularity_probe(spec: SocSpec) -> SocProbeReport:
    """Look for a state-stitched kernel outside the induced set.

    When every ``F_t(s, a, .)`` is injective, a row of the induced kernel pins
    down the noise law, so taking rows from two different vertices at two
    different states leaves the set. The witness is confirmed by LP.
    """
    spec.require_valid()
    inst = spec.skeleton
    notes = []
    for t in range(inst.horizon):
        verts = dedup_rows(spec.noise_ambiguity[t].vertices)
        if len(verts) == 1:
            continue
        if not _injective(spec, t):
            notes.append(f"stage {t + 1}: noise outcomes collide; probe skipped")
            continue
        if inst.n_states(t) < 2:
            notes.append(f"stage {t + 1}: a single state is trivially state-rectangular")
            continue
        k1, k2 = pushforward(spec, t, verts[0]), pushforward(spec, t, verts[1])
        stitched = [k1[0]] + k2[1:]
        flat = np.array([np.concatenate([b.ravel() for b in pushforward(spec, t, q)]) for q in verts])
        point = np.concatenate([b.ravel() for b in stitched])
        dist = hull_distance(flat, point)
        if not in_hull(flat, point):
            return SocProbeReport("not_rectangular", t, stitched, dist, notes)
        notes.append(f"stage {t + 1}: stitched kernel unexpectedly inside the induced set")
    if all(len(dedup_rows(p.vertices)) == 1 for p in spec.noise_ambiguity):
        return SocProbeReport("rectangular", notes=["every noise set is a single distribution"])
    return SocProbeReport("inconclusive", notes=notes)
