"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest, or directly with ``python tests/test_acceptance.py`` for
just the summary lines.
"""

from __future__ import annotations

import sys
import time

import numpy as np
import pytest

from drmdp.ambiguity import Polytope, Singleton, s_rect_enlargement, sa_product_probe
from drmdp.cost import CostSaRect, FiniteCostSet, solve_primal_cost, solve_via_regularization
from drmdp.fixtures import blended_example, factor_example, full_segment_example, noise_example, split_segment_example
from drmdp.generators import random_instance, random_kernel, random_model
from drmdp.lp import maxmin_value, minmax_value, solve_matrix_game
from drmdp.risk import AvarSpec, avar_lp, avar_sorted, build_avar_ambiguity, solve_nested_risk
from drmdp.robust import check_common_worst_kernel, check_convex_marginal, diagnose, solve_dual, solve_primal
from drmdp.soc import build_soc_ambiguity, soc_rectangularity_probe, solve_soc_noise_space
from drmdp.static import OracleConfig, history_dependent_check, static_dual, static_primal


def _max_diff(a, b):
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


def criterion_1():
    details, ok = [], True
    for high, low in [(1.0, 0.0), (3.0, 1.0)]:
        prob = split_segment_example(high, low)
        v = solve_primal(prob.instance, prob.ambiguity).values[0][0]
        q = solve_dual(prob.instance, prob.ambiguity).values[0][0]
        want_v, want_q = (high + low) / 2, high / 4 + 3 * low / 4
        ok &= abs(v - want_v) <= 1e-7 and abs(q - want_q) <= 1e-7
        details.append(f"v=({high:g},{low:g}): V={v:.9g} Q={q:.9g}")
    return ok, "; ".join(details)


def criterion_2():
    prob = full_segment_example()
    inst, model = prob.instance, prob.ambiguity
    rep = diagnose(inst, model)
    policy = rep.controller_policy[0][0]
    ok = (rep.gap <= 1e-6 and np.all(np.abs(policy - 0.5) <= 1e-6) and rep.unique_policy_at(0, 0)
          and check_common_worst_kernel(inst, model).status == "fails"
          and check_convex_marginal(inst, model, 0, 0).convex)
    return ok, f"gap={rep.gap:.2e} policy={np.round(policy, 9).tolist()} common-worst={rep.common_worst.status}"


def criterion_3():
    high, low = 1.0, 0.0
    prob = factor_example(high, low)
    rep = diagnose(prob.instance, prob.ambiguity)
    verdict = rep.common_worst
    witness = verdict.witness(0)
    rows = witness[0][:, 0] if witness is not None else np.full(2, np.nan)
    ok = (verdict.status == "global" and np.all(np.abs(rows - [1.0, 2 / 3]) <= 1e-8) and rep.gap <= 1e-6
          and rep.deterministic_policy is not None
          and abs(rep.primal_values[0][0] - (2 * high + low) / 3) <= 1e-7)
    return ok, f"status={verdict.status} witness={np.round(rows, 9).tolist()} V={rep.primal_values[0][0]:.9g}"


def criterion_4():
    prob = blended_example()
    inst, model = prob.instance, prob.ambiguity
    rep = diagnose(inst, model)
    policy = rep.controller_policy[0][0]
    probe = sa_product_probe(model, inst, 0, 0)
    ok = (rep.gap <= 1e-6 and np.all(np.abs(policy - 0.5) <= 1e-6) and not probe.is_product
          and rep.common_worst.status == "fails")
    return ok, (f"gap={rep.gap:.2e} policy={np.round(policy, 9).tolist()} product={probe.is_product} "
                f"common-worst={rep.common_worst.status}")


def criterion_5():
    rng = np.random.default_rng(501)
    violations = 0
    for i in range(200):
        inst = random_instance(rng, (1, 3, 2, 2), 3)
        model = random_model(rng, inst, "finite", n_kernels=3, hull=bool(i % 2))
        V, Q = solve_primal(inst, model).values, solve_dual(inst, model).values
        violations += sum(int(np.sum(q > v + 1e-7)) for v, q in zip(V, Q))
    return violations == 0, f"200 instances, {violations} violations"


def criterion_6():
    rng = np.random.default_rng(601)
    cfg = OracleConfig(policy_grid_resolution=60)
    worst, ok = 0.0, True
    cases = []
    for _ in range(50):
        inst = random_instance(rng, (1, 2, 2), 2)
        cases.append((inst, random_model(rng, inst, "sa_rect")))
    prob = factor_example()
    cases.append((prob.instance, prob.ambiguity))
    for inst, model in cases:
        game = solve_primal(inst, model).values[0][inst.initial_state]
        static = static_primal(inst, model, cfg).value
        big = max([float(np.abs(c).max()) for layer in inst.costs for c in layer]
                  + [float(np.abs(inst.terminal_cost).max())])
        bound = (inst.horizon + 1) * big / 60 + 1e-6
        ok &= abs(static - game) <= bound
        worst = max(worst, abs(static - game) / bound)
    return ok, f"51 instances, largest error/bound ratio {worst:.3f}"


def criterion_7():
    rng = np.random.default_rng(701)
    prob = factor_example()
    cases = [(prob.instance, prob.ambiguity)]
    for _ in range(50):
        inst = random_instance(rng, (1, 3, 2), 2)
        cases.append((inst, random_model(rng, inst, "finite", n_kernels=3)))
    worst = 0.0
    for inst, model in cases:
        big = s_rect_enlargement(model, inst)
        worst = max(worst, _max_diff(solve_primal(inst, model).values, solve_primal(inst, big).values),
                    _max_diff(solve_dual(inst, model).values, solve_dual(inst, big).values))
    return worst <= 1e-7, f"51 instances, max table difference {worst:.2e}"


def _random_cost_model(rng, inst, use_sa_rect):
    model = []
    for t in range(inst.horizon):
        nN = inst.n_states(t + 1)
        if use_sa_rect:
            model.append(CostSaRect([[Polytope(rng.uniform(-1, 1, (2, nN))) for _ in range(inst.n_actions(t, s))]
                                     for s in range(inst.n_states(t))]))
        else:
            tables = [[rng.uniform(-1, 1, (inst.n_actions(t, s), nN)) for s in range(inst.n_states(t))]
                      for _ in range(3)]
            model.append(FiniteCostSet(tables))
    return model


def criterion_8():
    rng = np.random.default_rng(801)
    worst = 0.0
    for i in range(200):
        inst = random_instance(rng, (1, 2, 3), 3)
        kernel = random_kernel(rng, inst)
        model = _random_cost_model(rng, inst, use_sa_rect=bool(i % 2))
        worst = max(worst, _max_diff(solve_primal_cost(inst, kernel, model).values,
                                     solve_via_regularization(inst, kernel, model)))
    return worst <= 1e-8, f"200 instances, max difference {worst:.2e}"


def criterion_9():
    rng = np.random.default_rng(901)
    worst, exact = 0.0, True
    for _ in range(500):
        n = int(rng.integers(1, 7))
        z, p = rng.normal(size=n), rng.dirichlet(np.ones(n))
        alpha = float(rng.uniform(0.01, 1.0))
        worst = max(worst, abs(avar_sorted(z, p, alpha) - avar_lp(z, p, alpha)))
        exact &= avar_sorted(z, p, 1.0) == float(p @ z)
    nested = 0.0
    for _ in range(50):
        inst = random_instance(rng, (1, 2, 3), 3)
        spec = AvarSpec(float(rng.uniform(0.05, 1.0)), random_kernel(rng, inst))
        values, _ = solve_nested_risk(inst, spec)
        nested = max(nested, _max_diff(values, solve_primal(inst, build_avar_ambiguity(spec, inst)).values))
    ok = worst <= 1e-9 and exact and nested <= 1e-7
    return ok, f"sorted vs LP {worst:.2e}, level one exact={exact}, nested vs robust {nested:.2e}"


def criterion_10():
    probe = soc_rectangularity_probe(noise_example().soc)
    witnessed = probe.status == "not_rectangular" and probe.lp_distance is not None and probe.lp_distance > 1e-6
    single = noise_example(noise_vertices=((0.3, 0.7),)).soc
    inst, model = build_soc_ambiguity(single)
    is_singleton = all(isinstance(st, Singleton) for st in model)
    cfg = OracleConfig(policy_grid_resolution=10)
    s1 = inst.initial_state
    values = [solve_primal(inst, model).values[0][s1], solve_dual(inst, model).values[0][s1],
              static_primal(inst, model, cfg).value, static_dual(inst, model, cfg).value,
              solve_soc_noise_space(single).primal_values[0][s1]]
    agree = max(values) - min(values) <= 1e-7
    return witnessed and is_singleton and agree, (f"probe={probe.status} distance={probe.lp_distance:.3g}; "
                                                  f"singleton values={np.round(values, 9).tolist()}")


def _history_cases():
    prob = factor_example()
    cases = [("factor example", prob.instance, prob.ambiguity)]
    # Two hulls of two kernels each; both have convex marginals and a deterministic optimum.
    for seed in (0, 1):
        rng = np.random.default_rng(seed)
        inst = random_instance(rng, (1, 2, 2), 2)
        cases.append((f"two-kernel hull {seed}", inst, random_model(rng, inst, "finite", n_kernels=2, hull=True)))
    return cases


def criterion_11():
    ok, details = True, []
    for label, inst, model in _history_cases():
        convex = all(check_convex_marginal(inst, model, t, s).convex
                     for t in range(inst.horizon) for s in range(inst.n_states(t)))
        rep = history_dependent_check(inst, model)
        diff = abs(rep.value - rep.game_primal)
        ok &= convex and rep.certified and diff <= 1e-6
        details.append(f"{label}: |H - V|={diff:.1e}")
    return ok, "; ".join(details)


def criterion_12():
    rps = solve_matrix_game([[0, 1, -1], [-1, 0, 1], [1, -1, 0]])
    ok = (abs(rps.value) <= 1e-9 and np.all(np.abs(rps.minimizer - 1 / 3) <= 1e-9)
          and np.all(np.abs(rps.maximizer - 1 / 3) <= 1e-9))
    rng = np.random.default_rng(1201)
    worst = 0.0
    for _ in range(100):
        M = rng.normal(size=(int(rng.integers(1, 5)), int(rng.integers(1, 5))))
        worst = max(worst, abs(minmax_value(M)[0] - maxmin_value(M)[0]))
    return ok and worst <= 1e-8, f"RPS value={rps.value:.1e}; max |minmax - maxmin| over 100 games {worst:.1e}"


CRITERIA = {
    1: ("duality gap of the split segment set", criterion_1),
    2: ("randomized optimum of the full segment set", criterion_2),
    3: ("common worst-case kernel witness of the factor example", criterion_3),
    4: ("blended set: strong duality, unique policy, probes fail", criterion_4),
    5: ("weak duality on random finite sets", criterion_5),
    6: ("game and static primal agree on rectangular sets", criterion_6),
    7: ("values invariant under state-rectangular enlargement", criterion_7),
    8: ("cost-robust recursion equals its regularized form", criterion_8),
    9: ("AV@R forms agree; nested risk equals robust recursion", criterion_9),
    10: ("noise-induced set probe and single-law collapse", criterion_10),
    11: ("history-dependent controllers match the game value", criterion_11),
    12: ("matrix-game LP sanity", criterion_12),
}


def _line(number, ok, detail, seconds):
    title = CRITERIA[number][0]
    return f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title} [{detail}] ({seconds:.2f}s)"


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    start = time.perf_counter()
    ok, detail = CRITERIA[number][1]()
    with capsys.disabled():
        print("\n" + _line(number, ok, detail, time.perf_counter() - start))
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for number in sorted(CRITERIA):
        start = time.perf_counter()
        ok, detail = CRITERIA[number][1]()
        failures += not ok
        print(_line(number, ok, detail, time.perf_counter() - start))
    sys.exit(1 if failures else 0)
