"""Bundled worked instances with golden outputs.

Each fixture is built in code, shipped as JSON under ``drmdp/data`` and
paired with a golden check. The JSON copies are regenerated with
``write_fixture_files`` and a test keeps them in sync with the builders.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np

from .ambiguity import Polytope, RRect, SrRect, SRect, sa_product_probe
from .cost import CostSaRect, diagnose_cost
from .instance_file import ProblemFile, dumps, loads
from .mdp import MdpInstance
from .risk import AvarSpec, build_avar_ambiguity, solve_nested_risk
from .robust import diagnose, solve_primal
from .soc import SocSpec, build_soc_ambiguity, soc_rectangularity_probe, solve_soc_noise_space

GOLDEN_TOL = 1e-6
VALUE_TOL = 1e-7


def _two_leaf_instance(high, low):
    """One first-stage state with two actions leading to a high- and a low-cost leaf."""
    return MdpInstance([["s_A"], ["s_B", "s_C"]], [[["a_L", "a_R"]]], [[np.zeros((2, 2))]], [high, low], "s_A")


def _segment_union(ranges):
    """Rows ``L = (p, 1 - p)``, ``R = (1 - p, p)`` for ``p`` in a union of intervals."""
    def point(p):
        return [[p, 1.0 - p], [1.0 - p, p]]
    return SRect([[np.array([point(lo), point(hi)]) for lo, hi in ranges]])


def factor_example(high=1.0, low=0.0):
    """Coupled rows ``P(s_B|a_L) = p`` and ``P(s_B|a_R) = (1 + p) / 3``, written with shared factors."""
    model = RRect(
        factors=[[[0.0, 1.0]], [[1 / 3, 2 / 3]], [[0.0, 0.0], [1.0, -1.0]]],
        coefficients=[[[1.0, 0.0, 1.0], [0.0, 1.0, 1 / 3]]],
    )
    return ProblemFile(_two_leaf_instance(high, low), ambiguity=[model])


def split_segment_example(high=1.0, low=0.0):
    """Opposite rows driven by ``p`` in ``[0, 1/4]`` or ``[3/4, 1]``: a non-convex marginal."""
    return ProblemFile(_two_leaf_instance(high, low), ambiguity=[_segment_union([(0.0, 0.25), (0.75, 1.0)])])


def full_segment_example(high=1.0, low=0.0):
    """Opposite rows driven by ``p`` in ``[0, 1]``: convex, yet only a randomized policy is optimal."""
    return ProblemFile(_two_leaf_instance(high, low), ambiguity=[_segment_union([(0.0, 1.0)])])


def blended_example():
    """Even blend of a state-wise segment set and a factor set over two mirrored halves."""
    states = [["s_A", "s_A'"], ["s_B", "s_B'", "s_C", "s_C'"]]
    inst = MdpInstance(states, [[["a_L", "a_R"], ["a_L", "a_R"]]], [[np.zeros((2, 4)), np.zeros((2, 4))]],
                       [1.0, 1.0, 0.0, 0.0], "s_A")

    def seg(high_idx, low_idx, p):
        left, right = np.zeros(4), np.zeros(4)
        left[[high_idx, low_idx]] = p, 1.0 - p
        right[[high_idx, low_idx]] = 1.0 - p, p
        return [left, right]

    s_part = SRect([[np.array([seg(0, 2, 0.0), seg(0, 2, 1.0)])],
                    [np.array([seg(1, 3, 0.0), seg(1, 3, 1.0)])]])
    # The coupling parameter is carried by one factor per half; see notes.
    r_part = RRect(
        factors=[[[0, 0, 1, 0]], [[1 / 3, 0, 2 / 3, 0]], [[0, 0, 0, 0], [1, 0, -1, 0]],
                 [[0, 0, 0, 1]], [[0, 1 / 3, 0, 2 / 3]], [[0, 0, 0, 0], [0, 1, 0, -1]]],
        coefficients=[[[1, 0, 1, 0, 0, 0], [0, 1, 1 / 3, 0, 0, 0]],
                      [[0, 0, 0, 1, 0, 1], [0, 0, 0, 0, 1, 1 / 3]]],
    )
    return ProblemFile(inst, ambiguity=[SrRect(0.5, s_part, r_part)])


def risk_example():
    """Risky and safe actions scored by AV@R at level 1/2."""
    inst = MdpInstance([["s1"], ["win", "lose"]], [[["risky", "safe"]]],
                       [[np.array([[0.0, 0.0], [0.2, 0.2]])]], [1.0, 0.0], "s1")
    ref = [[np.array([[0.5, 0.5], [0.25, 0.75]])]]
    return ProblemFile(inst, avar=AvarSpec(0.5, ref))


def noise_example(noise_vertices=((0.3, 0.7), (0.8, 0.2))):
    """Noise law shared by two states; the 'b' action swaps which outcome is bad."""
    states = [["x", "y"], ["u", "v", "w", "z"]]
    skeleton = MdpInstance(states, [[["a", "b"], ["a"]]], [[np.zeros((2, 4)), np.zeros((1, 4))]],
                           [1.0, 0.0, 0.5, 2.0], "x")
    spec = SocSpec(skeleton, [["n0", "n1"]], [[[[0, 1], [1, 0]], [[2, 3]]]],
                   [[[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0]]]], [Polytope(np.array(noise_vertices))])
    return ProblemFile(skeleton, soc=spec)


def cost_interval_example():
    """Interval costs around a fixed kernel; one box is given by halfspaces."""
    inst = MdpInstance([["s1"], ["n1", "n2"]], [[["a_L", "a_R"]]], [[np.zeros((2, 2))]], [0.0, 0.0], "s1")
    kernel = [[np.array([[0.5, 0.5], [1.0, 0.0]])]]
    box = Polytope(A=np.vstack([np.eye(2), -np.eye(2)]), b=[1.0, 2.0, 0.0, -1.0])
    model = CostSaRect([[box, Polytope([[1.0, 4.0], [1.2, 4.0], [1.0, 5.0], [1.2, 5.0]])]])
    return ProblemFile(inst, kernel=kernel, cost_ambiguity=[model])


# ---------------------------------------------------------------------------
# Golden checks


Check = Tuple[str, bool, str]


def _close(label, got, want, tol=GOLDEN_TOL):
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    ok = got.shape == want.shape and bool(np.all(np.abs(got - want) <= tol))
    return label, ok, f"got {np.round(got, 9).tolist()}, expected {np.round(want, 9).tolist()}"


def _flag(label, ok, detail=""):
    return label, bool(ok), detail


def _golden_factor(problem) -> List[Check]:
    rep = diagnose(problem.instance, problem.ambiguity)
    witness = rep.common_worst.witness(0)
    rows = witness[0][:, 0] if witness is not None else np.full(2, np.nan)
    return [
        _close("V_1(s_A) = 2/3", rep.primal_values[0][0], 2 / 3),
        _close("no duality gap", rep.gap, 0.0),
        _flag("common worst-case kernel holds globally", rep.common_worst.status == "global", rep.common_worst.status),
        _close("witness P(s_B|a_L), P(s_B|a_R)", rows, [1.0, 2 / 3], 1e-8),
        _flag("deterministic optimal policy", rep.deterministic_policy is not None),
    ]


def _golden_split(problem) -> List[Check]:
    rep = diagnose(problem.instance, problem.ambiguity)
    return [
        _close("V_1(s_A) = 1/2", rep.primal_values[0][0], 0.5),
        _close("Q_1(s_A) = 1/4", rep.dual_values[0][0], 0.25),
        _close("gap = 1/4", rep.gap, 0.25),
        _flag("marginal not convex", not rep.convex_marginal[0][0].convex),
    ]


def _golden_full(problem) -> List[Check]:
    rep = diagnose(problem.instance, problem.ambiguity)
    return [
        _close("V_1(s_A) = 1/2", rep.primal_values[0][0], 0.5),
        _close("no duality gap", rep.gap, 0.0),
        _close("policy at s_A", rep.controller_policy[0][0], [0.5, 0.5]),
        _flag("optimal policy unique", rep.unique_policy_at(0, 0)),
        _flag("common worst-case kernel fails", rep.common_worst.status == "fails", rep.common_worst.status),
        _flag("marginal convex", rep.convex_marginal[0][0].convex),
    ]


def _golden_blend(problem) -> List[Check]:
    inst, model = problem.instance, problem.ambiguity
    rep = diagnose(inst, model)
    probe = sa_product_probe(model, inst, 0, 0)
    return [
        _close("V_1(s_A) = 2/3", rep.primal_values[0][0], 2 / 3),
        _close("no duality gap", rep.gap, 0.0),
        _close("policy at s_A", rep.controller_policy[0][0], [0.5, 0.5]),
        _flag("optimal policy unique", rep.unique_policy_at(0, 0)),
        _flag("common worst-case kernel fails", rep.common_worst.status == "fails", rep.common_worst.status),
        _flag("not a per-action product at s_A", not probe.is_product),
    ]


def _golden_risk(problem) -> List[Check]:
    inst, spec = problem.instance, problem.avar
    values, policy = solve_nested_risk(inst, spec, check=True)
    robust = solve_primal(inst, build_avar_ambiguity(spec, inst)).values
    return [
        _close("V_1(s1) = 0.7", values[0][0], 0.7),
        _close("safe action chosen", policy[0][0], [0.0, 1.0]),
        _close("nested risk matches robust recursion", values[0], robust[0], VALUE_TOL),
    ]


def _golden_noise(problem) -> List[Check]:
    spec = problem.soc
    inst, model = build_soc_ambiguity(spec)
    rep = diagnose(inst, model)
    direct = solve_soc_noise_space(spec)
    probe = soc_rectangularity_probe(spec)
    return [
        _close("V_1(x) = 1/2", rep.primal_values[0][0], 0.5),
        _close("policy at x", rep.controller_policy[0][0], [0.5, 0.5]),
        _close("noise-space recursion agrees", direct.primal_values[0], rep.primal_values[0], VALUE_TOL),
        _flag("induced set not rectangular", probe.status == "not_rectangular", probe.status),
    ]


def _golden_cost(problem) -> List[Check]:
    rep = diagnose_cost(problem.instance, problem.kernel, problem.cost_ambiguity)
    return [
        _close("V_1(s1) = 1.2", rep.primal_values[0][0], 1.2),
        _close("policy picks a_R", rep.policy[0][0], [0.0, 1.0]),
        _close("regularized recursion agrees", rep.regularized_values[0], rep.primal_values[0], 1e-8),
        _close("no duality gap", rep.gap, 0.0),
    ]


@dataclass(frozen=True)
class Fixture:
    name: str
    summary: str
    build: Callable[[], ProblemFile]
    golden: Callable[[ProblemFile], List[Check]]


FIXTURES: Dict[str, Fixture] = {f.name: f for f in [
    Fixture("ex_2_1", "coupled rows with a common worst-case kernel (factor form)", factor_example, _golden_factor),
    Fixture("ex_2_2", "non-convex marginal with a duality gap", split_segment_example, _golden_split),
    Fixture("ex_2_3", "convex marginal with a unique randomized optimum", full_segment_example, _golden_full),
    Fixture("fig_2_sr", "blend of a state-wise and a factor set", blended_example, _golden_blend),
    Fixture("avar_demo", "nested AV@R recursion", risk_example, _golden_risk),
    Fixture("soc_demo", "kernel set induced by shared noise", noise_example, _golden_noise),
    Fixture("cost_interval", "interval cost ambiguity", cost_interval_example, _golden_cost),
]}


def fixture_names():
    return list(FIXTURES)


def fixture_text(name):
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return resources.files("drmdp").joinpath("data", f"{name}.json").read_text(encoding="utf-8")


def load_fixture(name) -> ProblemFile:
    return loads(fixture_text(name))


def run_golden(name) -> List[Check]:
    return FIXTURES[name].golden(load_fixture(name))


def write_fixture_files(directory=None):
    directory = Path(directory) if directory else Path(__file__).parent / "data"
    directory.mkdir(parents=True, exist_ok=True)
    for name, fx in FIXTURES.items():
        (directory / f"{name}.json").write_text(dumps(fx.build()), encoding="utf-8")
