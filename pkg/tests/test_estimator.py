import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from drmdp.estimator import CostRobustSolver, NestedRiskSolver, RobustMDPSolver, StaticOracle
from drmdp.fixtures import load_fixture


def test_params_and_clone():
    oracle = StaticOracle(policy_grid_resolution=7, history=True)
    assert oracle.get_params()["policy_grid_resolution"] == 7
    copy = clone(oracle)
    assert copy.get_params() == oracle.get_params() and copy is not oracle
    assert clone(NestedRiskSolver(alpha=0.3)).alpha == 0.3


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        RobustMDPSolver().predict([(0, "s_A")])
    with pytest.raises(NotFittedError):
        StaticOracle().passed_


def test_robust_solver_on_problem_file():
    solver = RobustMDPSolver().fit(load_fixture("ex_2_3"))
    assert solver.value() == pytest.approx(0.5)
    assert solver.gap_ == pytest.approx(0.0, abs=1e-9)
    assert solver.predict([(0, "s_A")])[0] == pytest.approx([0.5, 0.5])
    assert solver.deterministic_policy_ is None


def test_robust_solver_with_arguments():
    prob = load_fixture("ex_2_1")
    solver = RobustMDPSolver().fit(prob.instance, prob.ambiguity)
    assert solver.value(0, "s_A") == pytest.approx(2 / 3)
    assert solver.value(1, "s_B") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        RobustMDPSolver().fit(prob.instance)


def test_cost_solver():
    solver = CostRobustSolver().fit(load_fixture("cost_interval"))
    assert solver.value() == pytest.approx(1.2)
    assert np.allclose(solver.regularized_values_[0], solver.values_[0])


def test_risk_solver_level_override():
    prob = load_fixture("avar_demo")
    assert NestedRiskSolver().fit(prob).value() == pytest.approx(0.7)
    neutral = NestedRiskSolver(alpha=1.0).fit(prob)
    # Risk-neutral scores: risky 0.5, safe 0.2 + 0.25.
    assert neutral.value() == pytest.approx(0.45)
    assert neutral.predict([(0, "s1")])[0] == pytest.approx([0.0, 1.0])


def test_static_oracle():
    oracle = StaticOracle(policy_grid_resolution=40, history=True).fit(load_fixture("ex_2_1"))
    assert oracle.passed_
    assert oracle.history_.value == pytest.approx(2 / 3, abs=1e-9)
