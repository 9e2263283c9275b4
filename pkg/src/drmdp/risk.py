"""Average Value-at-Risk and the nested risk-averse recursion it induces.

``AV@R_alpha(Z) = inf_tau { tau + E[(Z - tau)_+] / alpha }`` has the dual
form ``max { q @ Z : 0 <= q <= p / alpha, sum(q) = 1 }``. The dual set is a
polytope per (state, action), so a nested AV@R recursion is a robust MDP over
an (s,a)-rectangular set, where a pure action is always optimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambiguity import Polytope, SaRect
from .exceptions import NumericalError, ValidationError
from .lp import LinearProgram, solve_lp
from .mdp import action_values, check_kernel, deterministic_policy, require_valid
from .validation import check_probability_vector

AGREE_TOL = 1e-9


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValidationError(f"risk level must lie in (0, 1], got {alpha}")
    return alpha


def avar_threshold(values, probabilities, alpha):
    """Smallest minimizing ``tau``: the least support point with ``P(Z > tau) <= alpha``."""
    z = np.asarray(values, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    support = np.unique(z[p > 0])
    for tau in support:
        if p[z > tau].sum() <= alpha + 1e-12:
            return float(tau)
    return float(support[-1])


def avar_sorted(values, probabilities, alpha):
    """AV@R via the threshold formula evaluated at the sorted-quantile ``tau``."""
    alpha = _check_alpha(alpha)
    z = np.asarray(values, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    if alpha == 1.0:
        return float(p @ z)
    tau = avar_threshold(z, p, alpha)
    return float(tau + p @ np.maximum(z - tau, 0.0) / alpha)


def avar_lp(values, probabilities, alpha):
    """AV@R as the LP ``max q @ Z`` over ``0 <= q <= p / alpha``, ``sum(q) = 1``."""
    alpha = _check_alpha(alpha)
    z = np.asarray(values, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    n = z.size
    res = solve_lp(LinearProgram(-z, A_eq=np.ones((1, n)), b_eq=[1.0], bounds=[(0.0, pi / alpha) for pi in p]))
    if not res.optimal:
        raise NumericalError(f"risk LP ended {res.status}")
    return -res.value


def avar(values, probabilities, alpha, check=True):
    """Average Value-at-Risk of outcomes ``values`` under ``probabilities``.

    With ``check`` the sorted form is cross-checked against the LP form.
    """
    z = np.asarray(values, dtype=float).ravel()
    p = check_probability_vector(probabilities)
    if z.shape != p.shape:
        raise ValidationError(f"{z.size} outcomes for {p.size} probabilities")
    if not np.all(np.isfinite(z)):
        raise ValidationError("outcomes must be finite")
    out = avar_sorted(z, p, alpha)
    if check:
        other = avar_lp(z, p, alpha)
        if abs(out - other) > AGREE_TOL * (1.0 + abs(out)):
            raise NumericalError(f"risk forms disagree: {out!r} vs {other!r}")
    return out


@dataclass
class AvarSpec:
    alpha: float
    reference_kernel: list

    def __post_init__(self):
        self.alpha = _check_alpha(self.alpha)


def avar_polytope(reference_row, alpha):
    """``{q : 0 <= q <= p / alpha, sum(q) = 1}`` as a halfspace polytope."""
    p = np.asarray(reference_row, dtype=float)
    n = p.size
    A = np.vstack([-np.eye(n), np.eye(n)])
    b = np.concatenate([np.zeros(n), p / alpha])
    return Polytope(A=A, b=b, E=np.ones((1, n)), f=[1.0])


def build_avar_ambiguity(spec: AvarSpec, instance):
    """Per-(state, action) AV@R dual sets around the reference kernel."""
    require_valid(instance)
    ref = check_kernel(instance, spec.reference_kernel)
    return [SaRect([[avar_polytope(ref[t][s][a], spec.alpha) for a in range(instance.n_actions(t, s))]
                    for s in range(instance.n_states(t))])
            for t in range(instance.horizon)]


def solve_nested_risk(instance, spec: AvarSpec, check=False):
    """``V_t(s) = min_a AV@R_{P(.|s,a)}(c_t(s, a, .) + V_{t+1})`` with a deterministic policy."""
    require_valid(instance)
    ref = check_kernel(instance, spec.reference_kernel)
    values = [None] * (instance.horizon + 1)
    values[-1] = instance.terminal_cost.copy()
    choices = []
    for t in reversed(range(instance.horizon)):
        U = values[t + 1]
        v, layer = [], []
        for s in range(instance.n_states(t)):
            c = instance.costs[t][s]
            if spec.alpha == 1.0:
                q = action_values(ref[t][s], c, U)
            else:
                q = np.array([avar(c[a] + U, ref[t][s][a], spec.alpha, check)
                              for a in range(instance.n_actions(t, s))])
            a = int(np.argmin(q))
            v.append(q[a])
            layer.append(a)
        values[t] = np.array(v)
        choices.append(layer)
    choices.reverse()
    return values, deterministic_policy(instance, choices)
