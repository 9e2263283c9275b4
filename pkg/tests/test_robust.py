import numpy as np
import pytest
from hypothesis import given, strategies as st

from drmdp.ambiguity import FiniteKernelSet, SaRect, Singleton
from drmdp.exceptions import CostStructureError
from drmdp.fixtures import blended_example, factor_example, full_segment_example, split_segment_example
from drmdp.generators import random_instance, random_kernel, random_model
from drmdp.mdp import deterministic_policy, solve_nominal
from drmdp.robust import (check_common_worst_kernel, check_convex_marginal, diagnose, evaluate_policy_robust,
                          solve_dual, solve_primal)
from oracles import frozen, robust_tables


def test_factor_example():
    prob = factor_example()
    rep = diagnose(prob.instance, prob.ambiguity)
    assert rep.primal_values[0][0] == pytest.approx(2 / 3)
    assert rep.gap == pytest.approx(0.0, abs=1e-9)
    assert rep.common_worst.status == "global"
    witness = rep.common_worst.witness(0)[0]
    assert witness[:, 0] == pytest.approx([1.0, 2 / 3], abs=1e-8)
    assert rep.deterministic_policy[0][0] == pytest.approx([0.0, 1.0])


@pytest.mark.parametrize("high,low", [(1.0, 0.0), (3.0, 1.0)])
def test_split_segment_gap(high, low):
    prob = split_segment_example(high, low)
    rep = diagnose(prob.instance, prob.ambiguity)
    spread = high - low
    assert rep.primal_values[0][0] == pytest.approx(low + spread / 2, abs=1e-8)
    assert rep.dual_values[0][0] == pytest.approx(low + spread / 4, abs=1e-8)
    assert rep.gap == pytest.approx(spread / 4, abs=1e-8)
    assert not rep.convex_marginal[0][0].convex
    assert rep.controller_policy[0][0] == pytest.approx([0.5, 0.5], abs=1e-8)


def test_full_segment_randomized_optimum():
    prob = full_segment_example()
    inst, model = prob.instance, prob.ambiguity
    rep = diagnose(inst, model)
    assert rep.primal_values[0][0] == pytest.approx(0.5)
    assert rep.gap == pytest.approx(0.0, abs=1e-9)
    assert rep.unique_policy_at(0, 0)
    assert rep.deterministic_policy is None
    assert rep.common_worst.status == "fails"
    for a in range(2):
        pure = deterministic_policy(inst, [[a]])
        assert evaluate_policy_robust(inst, model, pure)[0][0] == pytest.approx(1.0)


def test_blended_example():
    prob = blended_example()
    rep = diagnose(prob.instance, prob.ambiguity)
    assert rep.primal_values[0][0] == pytest.approx(2 / 3)
    assert rep.gap == pytest.approx(0.0, abs=1e-9)
    assert rep.controller_policy[0][0] == pytest.approx([0.5, 0.5], abs=1e-8)
    assert rep.common_worst.status == "fails"


def _finite_case(rng, hull=False):
    inst = random_instance(rng, (1, 2, 2), 2)
    return inst, random_model(rng, inst, "finite", n_kernels=3, hull=hull)


def test_weak_duality_and_policy_value_on_random_finite_sets():
    rng = np.random.default_rng(77)
    for i in range(200):
        inst, model = _finite_case(rng, hull=bool(i % 2))
        p, d = solve_primal(inst, model), solve_dual(inst, model)
        for t in range(inst.horizon + 1):
            assert np.all(d.values[t] <= p.values[t] + 1e-8)
        worst = evaluate_policy_robust(inst, model, p.policy)
        assert all(np.allclose(a, b, atol=1e-8) for a, b in zip(worst, p.values))


def test_random_finite_sets_against_scipy_recursion():
    rng = np.random.default_rng(78)
    for _ in range(20):
        inst, model = _finite_case(rng)
        pieces = [[model[t].state_pieces(inst, t, s) for s in range(inst.n_states(t))] for t in range(inst.horizon)]
        V, Q = robust_tables(inst, pieces)
        assert solve_primal(inst, model).values[0] == pytest.approx(V[0], abs=1e-8)
        assert solve_dual(inst, model).values[0] == pytest.approx(Q[0], abs=1e-8)


def test_frozen_finite_values():
    rng = np.random.default_rng(20240602)
    for case in frozen()["robust_finite"]:
        inst = random_instance(rng, (1, 2, 2), 2)
        model = random_model(rng, inst, "finite", n_kernels=3)
        assert solve_primal(inst, model).values[0][0] == pytest.approx(case["primal"], abs=1e-8)
        assert solve_dual(inst, model).values[0][0] == pytest.approx(case["dual"], abs=1e-8)


def test_implications_hold_on_random_models():
    rng = np.random.default_rng(79)
    for kind in ["finite", "sa_rect", "s_rect", "r_rect"] * 10:
        inst = random_instance(rng, (1, 2, 2), 2, next_state_free=(kind == "r_rect"))
        model = random_model(rng, inst, kind)
        rep = diagnose(inst, model)
        for imp in rep.implications:
            if imp.premise == "convex state marginals" and not all(v.exact for layer in rep.convex_marginal
                                                                  for v in layer):
                continue
            assert imp.ok, (kind, imp)


def test_rectangular_classes_have_no_gap():
    rng = np.random.default_rng(80)
    for kind in ["sa_rect", "r_rect"] * 10:
        inst = random_instance(rng, (1, 2, 2), 2, next_state_free=(kind == "r_rect"))
        rep = diagnose(inst, random_model(rng, inst, kind))
        assert abs(rep.gap) <= 1e-8
        assert rep.common_worst.holds
        assert rep.deterministic_policy is not None


def test_larger_set_gives_larger_values():
    rng = np.random.default_rng(81)
    for _ in range(30):
        inst = random_instance(rng, (1, 2, 2), 2)
        big = random_model(rng, inst, "finite", n_kernels=4)
        small = [FiniteKernelSet(st.kernels[:2]) for st in big]
        for solver in (solve_primal, solve_dual):
            lo, hi = solver(inst, small).values, solver(inst, big).values
            assert all(np.all(a <= b + 1e-9) for a, b in zip(lo, hi))


def test_singleton_reduces_to_nominal():
    rng = np.random.default_rng(82)
    for _ in range(10):
        inst = random_instance(rng, (1, 3, 2), 3)
        kernel = random_kernel(rng, inst)
        model = [Singleton(k) for k in kernel]
        nominal, _ = solve_nominal(inst, kernel)
        rep = diagnose(inst, model)
        assert np.allclose(rep.primal_values[0], nominal[0]) and np.allclose(rep.dual_values[0], nominal[0])


def test_factor_sets_need_next_state_free_costs():
    rng = np.random.default_rng(83)
    inst = random_instance(rng, (1, 2), 2)
    model = random_model(rng, inst, "r_rect")
    with pytest.raises(CostStructureError):
        solve_primal(inst, model)


def test_convexity_verdicts():
    split = split_segment_example()
    verdict = check_convex_marginal(split.instance, split.ambiguity, 0, 0)
    assert not verdict.convex and verdict.witness is not None
    full = full_segment_example()
    assert check_convex_marginal(full.instance, full.ambiguity, 0, 0).convex


def test_common_worst_statewise_only():
    # Two kernels, each worst at one state only: every state has its own worst point, but no kernel serves both.
    rng = np.random.default_rng(0)
    inst = random_instance(rng, (2, 2), 1)
    inst = inst.with_costs([[np.zeros((1, 2)), np.zeros((1, 2))]], [1.0, 0.0])
    k1 = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])]
    k2 = [np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])]
    verdict = check_common_worst_kernel(inst, [FiniteKernelSet([k1, k2])])
    assert verdict.status == "statewise"
    assert check_common_worst_kernel(inst, [SaRect([[[[1.0, 0.0], [0.0, 1.0]]]] * 2)]).status == "global"


@given(st.integers(0, 10_000))
def test_dual_never_exceeds_primal(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, (1, 2, 2), 2)
    model = random_model(rng, inst, "s_rect")
    p, d = solve_primal(inst, model), solve_dual(inst, model)
    assert np.all(d.values[0] <= p.values[0] + 1e-8)
