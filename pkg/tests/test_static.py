import numpy as np
import pytest

from drmdp.ambiguity import FiniteKernelSet, Singleton
from drmdp.exceptions import EnumerationCapError
from drmdp.fixtures import blended_example, factor_example, full_segment_example, split_segment_example
from drmdp.generators import random_instance, random_kernel, random_model
from drmdp.robust import solve_dual, solve_primal
from drmdp.static import (OracleConfig, check_equivalence, enlargement_invariance, history_dependent_check,
                          static_dual, static_primal)
from oracles import frozen


def test_static_primal_matches_frozen_brute_force():
    rng = np.random.default_rng(20240603)
    cfg = OracleConfig(policy_grid_resolution=6)
    for case in frozen()["static_sa_rect"]:
        inst = random_instance(rng, (1, 2, 2), 2)
        model = random_model(rng, inst, "sa_rect")
        assert static_primal(inst, model, cfg).value == pytest.approx(case["value"], abs=1e-10)


def test_full_segment_static_value():
    prob = full_segment_example()
    res = static_primal(prob.instance, prob.ambiguity, OracleConfig(policy_grid_resolution=100))
    assert res.value == pytest.approx(0.5, abs=1e-12)
    assert res.policy[0][0] == pytest.approx([0.5, 0.5])


def test_singleton_static_equals_nominal():
    rng = np.random.default_rng(4)
    inst = random_instance(rng, (1, 2, 2), 2)
    model = [Singleton(k) for k in random_kernel(rng, inst)]
    value = solve_primal(inst, model).values[0][0]
    assert static_primal(inst, model, OracleConfig(policy_grid_resolution=4)).value == pytest.approx(value)
    assert static_dual(inst, model).value == pytest.approx(value)


def test_split_segment_static_dual_approaches_quarter():
    prob = split_segment_example()
    previous = -np.inf
    for res in [2, 4, 12, 24]:
        lb = static_dual(prob.instance, prob.ambiguity, OracleConfig(kernel_grid_resolution=res)).value
        assert lb <= 0.25 + 1e-12
        assert lb >= previous - 1e-12
        previous = lb
    assert previous == pytest.approx(0.25, abs=1e-12)


def test_static_primal_grid_refinement_is_monotone_on_nested_grids():
    prob = full_segment_example()
    coarse = static_primal(prob.instance, prob.ambiguity, OracleConfig(policy_grid_resolution=5)).value
    fine = static_primal(prob.instance, prob.ambiguity, OracleConfig(policy_grid_resolution=10)).value
    assert fine <= coarse + 1e-12
    assert fine >= solve_primal(prob.instance, prob.ambiguity).values[0][0] - 1e-12


def test_cap_is_enforced():
    prob = full_segment_example()
    with pytest.raises(EnumerationCapError):
        static_primal(prob.instance, prob.ambiguity, OracleConfig(max_enumeration=3))
    with pytest.raises(EnumerationCapError):
        history_dependent_check(prob.instance, prob.ambiguity, OracleConfig(max_enumeration=1))


@pytest.mark.parametrize("builder", [factor_example, full_segment_example, blended_example])
def test_equivalence_on_worked_examples(builder):
    prob = builder()
    rep = check_equivalence(prob.instance, prob.ambiguity, OracleConfig(policy_grid_resolution=40))
    assert rep.certified
    assert rep.passed, rep.verdicts


def test_equivalence_on_random_sa_rect_sets():
    rng = np.random.default_rng(6)
    cfg = OracleConfig(policy_grid_resolution=20, kernel_grid_resolution=4)
    for _ in range(8):
        inst = random_instance(rng, (1, 2, 2), 2)
        rep = check_equivalence(inst, random_model(rng, inst, "sa_rect"), cfg)
        assert rep.certified and rep.passed, rep.verdicts
        assert abs(rep.static_primal - rep.game_primal) <= rep.tolerance


def test_uncertified_models_leave_verdicts_open():
    prob = split_segment_example()
    # A non-convex union is not certified by structure alone once wrapped as a finite point set.
    inst = prob.instance
    kernels = prob.ambiguity[0].extreme_kernels(inst, 0)
    rep = check_equivalence(inst, [FiniteKernelSet(kernels)], OracleConfig(policy_grid_resolution=8))
    assert not rep.certified
    assert rep.verdicts["static primal matches game primal"] is None


def test_enlargement_invariance_on_random_models():
    rng = np.random.default_rng(7)
    for kind in ["finite", "s_rect", "sa_rect", "r_rect"]:
        inst = random_instance(rng, (1, 2, 2), 2, next_state_free=(kind == "r_rect"))
        assert enlargement_invariance(inst, random_model(rng, inst, kind)).invariant


def test_history_dependent_controllers_do_not_help_when_certified():
    prob = factor_example()
    rep = history_dependent_check(prob.instance, prob.ambiguity)
    assert rep.certified
    assert rep.value == pytest.approx(2 / 3, abs=1e-9)
    assert all(v is not False for v in rep.verdicts.values())


def test_history_value_bounded_by_game_values():
    rng = np.random.default_rng(8)
    for _ in range(10):
        inst = random_instance(rng, (1, 2, 2), 2)
        model = random_model(rng, inst, "finite", n_kernels=2)
        rep = history_dependent_check(inst, model)
        assert rep.value >= solve_dual(inst, model).values[0][0] - 1e-8
        assert all(v is not False for v in rep.verdicts.values())
