"""Finite-horizon MDP instances, kernels, policies and risk-neutral evaluation.

Stages are indexed from 0 internally; user-facing text labels them from 1.
A kernel is a list over decision stages of lists over states of arrays of
shape ``(n_actions, n_next_states)``. A policy has the same nesting with one
probability vector over actions per state. A value table is a list of
``horizon + 1`` arrays, the last of which is the terminal cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DimensionError, ValidationError
from .validation import PROB_TOL, check_probability_rows, is_deterministic_row


@dataclass(frozen=True, eq=False)
class MdpInstance:
    """Stage-indexed states, state-dependent actions and stage costs.

    ``costs[t][s]`` has shape ``(n_actions, n_next_states)`` and holds the
    cost of taking each action and landing in each state of stage ``t + 1``.
    """

    states: Sequence[Sequence[str]]
    actions: Sequence[Sequence[Sequence[str]]]
    costs: Sequence[Sequence[np.ndarray]]
    terminal_cost: np.ndarray
    initial_state: int = 0

    def __post_init__(self):
        states = tuple(tuple(str(x) for x in layer) for layer in self.states)
        actions = tuple(tuple(tuple(str(a) for a in acts) for acts in layer) for layer in self.actions)
        try:
            costs = tuple(tuple(np.array(c, dtype=float, ndmin=2) for c in layer) for layer in self.costs)
            terminal = np.array(self.terminal_cost, dtype=float).ravel()
        except (TypeError, ValueError) as exc:
            raise DimensionError(f"costs are not numeric arrays: {exc}") from exc
        init = self.initial_state
        if isinstance(init, str):
            if not states or init not in states[0]:
                raise ValidationError(f"initial state {init!r} is not a first-stage state")
            init = states[0].index(init)
        for arr in costs:
            for c in arr:
                c.setflags(write=False)
        terminal.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "terminal_cost", terminal)
        object.__setattr__(self, "initial_state", int(init))

    @property
    def horizon(self):
        return len(self.actions)

    def n_states(self, t):
        return len(self.states[t])

    def n_actions(self, t, s):
        return len(self.actions[t][s])

    def state_index(self, t, name):
        try:
            return self.states[t].index(name)
        except ValueError:
            raise ValidationError(f"unknown state {name!r} at stage {t + 1}") from None

    def action_index(self, t, s, name):
        try:
            return self.actions[t][s].index(name)
        except ValueError:
            raise ValidationError(f"unknown action {name!r} at ({t + 1}, {self.states[t][s]})") from None

    def label(self, t, s):
        return f"({t + 1}, {self.states[t][s]})"

    def cost_is_next_state_free(self, t, s, tol=0.0):
        c = self.costs[t][s]
        return bool(np.all(np.abs(c - c[:, :1]) <= tol))

    def with_costs(self, costs, terminal_cost=None):
        return MdpInstance(self.states, self.actions, costs,
                           self.terminal_cost if terminal_cost is None else terminal_cost,
                           self.initial_state)

    def __eq__(self, other):
        if not isinstance(other, MdpInstance):
            return NotImplemented
        if (self.states, self.actions, self.initial_state) != (other.states, other.actions, other.initial_state):
            return False
        if not np.array_equal(self.terminal_cost, other.terminal_cost):
            return False
        return all(np.array_equal(a, b) for la, lb in zip(self.costs, other.costs) for a, b in zip(la, lb))

    __hash__ = None


def validate_instance(instance: MdpInstance):
    """List every structural problem with ``instance``; empty when it is well formed."""
    out = []
    T = instance.horizon
    if T < 1:
        out.append("horizon must be at least 1")
    if len(instance.states) != T + 1:
        out.append(f"expected {T + 1} state layers, found {len(instance.states)}")
        return out
    for t, layer in enumerate(instance.states):
        if not layer:
            out.append(f"stage {t + 1} has no states")
        if len(set(layer)) != len(layer):
            out.append(f"stage {t + 1} repeats a state name")
    if not 0 <= instance.initial_state < len(instance.states[0]):
        out.append(f"initial state index {instance.initial_state} out of range")
    if len(instance.costs) != T:
        out.append(f"expected costs for {T} stages, found {len(instance.costs)}")
    for t in range(T):
        nS, nN = len(instance.states[t]), len(instance.states[t + 1])
        if len(instance.actions[t]) != nS:
            out.append(f"stage {t + 1}: action lists for {len(instance.actions[t])} of {nS} states")
            continue
        for s in range(nS):
            acts = instance.actions[t][s]
            where = instance.label(t, s)
            if not acts:
                out.append(f"{where}: empty action set")
                continue
            if len(set(acts)) != len(acts):
                out.append(f"{where}: repeated action name")
            if t >= len(instance.costs) or s >= len(instance.costs[t]):
                out.append(f"{where}: missing cost table")
                continue
            c = instance.costs[t][s]
            if c.shape != (len(acts), nN):
                out.append(f"{where}: cost table shape {c.shape}, expected {(len(acts), nN)}")
            elif not np.all(np.isfinite(c)):
                bad = np.argwhere(~np.isfinite(c))[0]
                out.append(f"({t + 1}, {instance.states[t][s]}, {acts[bad[0]]}): non-finite cost")
    if instance.terminal_cost.shape != (len(instance.states[T]),):
        out.append(f"terminal cost has {instance.terminal_cost.size} entries for {len(instance.states[T])} states")
    elif not np.all(np.isfinite(instance.terminal_cost)):
        out.append("terminal cost has non-finite entries")
    return out


def require_valid(instance):
    problems = validate_instance(instance)
    if problems:
        raise ValidationError("invalid instance: " + "; ".join(problems), problems)
    return instance


def check_kernel(instance, kernel, tol=PROB_TOL):
    """Return a renormalized copy of ``kernel`` or raise naming the bad stage."""
    T = instance.horizon
    if len(kernel) != T:
        raise DimensionError(f"kernel covers {len(kernel)} stages, instance has {T}")
    out = []
    for t in range(T):
        if len(kernel[t]) != instance.n_states(t):
            raise DimensionError(f"stage {t + 1}: kernel has {len(kernel[t])} state blocks, expected {instance.n_states(t)}")
        layer = []
        for s in range(instance.n_states(t)):
            P = np.array(kernel[t][s], dtype=float, ndmin=2)
            shape = (instance.n_actions(t, s), instance.n_states(t + 1))
            if P.shape != shape:
                raise DimensionError(f"stage {t + 1}: kernel block at {instance.label(t, s)} has shape {P.shape}, expected {shape}")
            layer.append(check_probability_rows(P, f"kernel at {instance.label(t, s)}", tol))
        out.append(layer)
    return out


def check_policy(instance, policy, tol=PROB_TOL):
    T = instance.horizon
    if len(policy) != T:
        raise DimensionError(f"policy covers {len(policy)} stages, instance has {T}")
    out = []
    for t in range(T):
        if len(policy[t]) != instance.n_states(t):
            raise DimensionError(f"stage {t + 1}: policy has {len(policy[t])} rows, expected {instance.n_states(t)}")
        layer = []
        for s in range(instance.n_states(t)):
            row = np.asarray(policy[t][s], dtype=float).ravel()
            if row.size != instance.n_actions(t, s):
                raise DimensionError(f"stage {t + 1}: policy row at {instance.label(t, s)} has {row.size} entries")
            layer.append(check_probability_rows(row, f"policy at {instance.label(t, s)}", tol))
        out.append(layer)
    return out


def is_deterministic(policy, tol=PROB_TOL):
    return all(is_deterministic_row(row, tol) for layer in policy for row in layer)


def deterministic_policy(instance, choices):
    """Build a policy from ``choices[t][s]`` action indices."""
    policy = []
    for t in range(instance.horizon):
        layer = []
        for s in range(instance.n_states(t)):
            row = np.zeros(instance.n_actions(t, s))
            row[choices[t][s]] = 1.0
            layer.append(row)
        policy.append(layer)
    return policy


def uniform_policy(instance):
    return [[np.full(instance.n_actions(t, s), 1.0 / instance.n_actions(t, s))
             for s in range(instance.n_states(t))] for t in range(instance.horizon)]


def action_values(P, cost, next_values):
    """Expected cost-to-go of each action: ``sum_s' P[a,s'] (cost[a,s'] + next_values[s'])``."""
    return np.einsum("an,an->a", P, cost + next_values[None, :])


def evaluate_policy(instance, policy, kernel):
    """Value table of ``policy`` when transitions follow ``kernel``."""
    require_valid(instance)
    kernel = check_kernel(instance, kernel)
    policy = check_policy(instance, policy)
    values = [None] * (instance.horizon + 1)
    values[-1] = instance.terminal_cost.copy()
    for t in reversed(range(instance.horizon)):
        U = values[t + 1]
        values[t] = np.array([policy[t][s] @ action_values(kernel[t][s], instance.costs[t][s], U)
                              for s in range(instance.n_states(t))])
    return values


def solve_nominal(instance, kernel, checked=False):
    """Backward induction for a known kernel; ties go to the lowest action index."""
    if not checked:
        require_valid(instance)
        kernel = check_kernel(instance, kernel)
    values = [None] * (instance.horizon + 1)
    values[-1] = instance.terminal_cost.copy()
    choices = []
    for t in reversed(range(instance.horizon)):
        U = values[t + 1]
        layer_v = np.empty(instance.n_states(t))
        layer_a = []
        for s in range(instance.n_states(t)):
            q = action_values(kernel[t][s], instance.costs[t][s], U)
            a = int(np.argmin(q))
            layer_v[s] = q[a]
            layer_a.append(a)
        values[t] = layer_v
        choices.append(layer_a)
    choices.reverse()
    return values, deterministic_policy(instance, choices)


def reachable_states(instance, supports):
    """Per-stage boolean masks of states reachable from the initial state.

    ``supports[t][s]`` is a boolean ``(n_actions, n_next)`` array marking
    transitions that have positive probability under some admissible kernel.
    """
    masks = [np.zeros(instance.n_states(t), dtype=bool) for t in range(instance.horizon + 1)]
    masks[0][instance.initial_state] = True
    for t in range(instance.horizon):
        for s in np.flatnonzero(masks[t]):
            masks[t + 1] |= supports[t][s].any(axis=0)
    return masks
