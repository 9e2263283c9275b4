import json

import numpy as np
import pytest

from drmdp.ambiguity import Singleton
from drmdp.fixtures import FIXTURES, fixture_names, load_fixture
from drmdp.generators import random_instance, random_kernel, random_model
from drmdp.instance_file import FileFormatError, ProblemFile, dump, dumps, load, loads, to_document
from drmdp.robust import solve_primal


@pytest.mark.parametrize("name", fixture_names())
def test_fixture_round_trip(name):
    problem = FIXTURES[name].build()
    text = dumps(problem)
    assert loads(text) == problem
    assert dumps(loads(text)) == text


@pytest.mark.parametrize("kind", ["finite", "sa_rect", "s_rect", "r_rect", "singleton"])
def test_random_model_round_trip(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    for _ in range(5):
        inst = random_instance(rng, (1, 2, 3), 3, next_state_free=(kind == "r_rect"))
        problem = ProblemFile(inst, ambiguity=random_model(rng, inst, kind))
        again = loads(dumps(problem))
        assert again == problem
        assert np.allclose(solve_primal(again.instance, again.ambiguity).values[0],
                           solve_primal(inst, problem.ambiguity).values[0], atol=0, rtol=0)


def test_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    inst = random_instance(rng)
    problem = ProblemFile(inst, ambiguity=[Singleton(k) for k in random_kernel(rng, inst)])
    path = tmp_path / "p.json"
    dump(problem, path)
    assert load(path) == problem


def _doc(name="ex_2_2"):
    return to_document(load_fixture(name))


def _error(doc):
    with pytest.raises(FileFormatError) as info:
        loads(json.dumps(doc))
    return str(info.value)


def test_unknown_key_reported_at_root():
    doc = _doc()
    doc["bogus"] = 1
    assert "$: unknown key(s) 'bogus'" in _error(doc)


def test_unknown_state_in_actions():
    doc = _doc()
    doc["mdp"]["actions"][0] = {"s_Z": ["a_L"]}
    msg = _error(doc)
    assert msg.startswith("$.mdp.actions[0]")


def test_bad_number_has_path():
    doc = _doc()
    doc["mdp"]["terminal_cost"]["s_B"] = "one"
    assert "$.mdp.terminal_cost" in _error(doc)


def test_bad_vertex_has_path():
    doc = _doc()
    doc["ambiguity"][0]["sets"]["s_A"][0]["vertices"][0] = [0.5, 0.6, 1, 0]
    msg = _error(doc)
    assert msg.startswith("$.ambiguity") and "(1, s_A, a_L): row sums to 1.1" in msg


def test_unknown_model_type():
    doc = _doc()
    doc["ambiguity"][0]["type"] = "hexagonal"
    assert "hexagonal" in _error(doc)


def test_cost_section_rejects_factor_sets():
    doc = _doc("cost_interval")
    doc["cost_ambiguity"][0] = {"type": "r_rect", "factors": [], "coefficients": {}}
    assert "$.cost_ambiguity[0]" in _error(doc)


def test_json_syntax_error_reports_position():
    with pytest.raises(FileFormatError, match="line 2, column 10"):
        loads('{\n  "mdp": ,\n}')


def test_missing_file(tmp_path):
    with pytest.raises(FileFormatError, match="cannot read"):
        load(tmp_path / "nope.json")


def test_shortest_float_repr_and_inline_lists():
    text = dumps(load_fixture("ex_2_1"))
    assert "0.3333333333333333" in text
    assert "[0, 1]" in text


def test_scalar_costs_and_sparse_rows():
    doc = {
        "mdp": {"states": [["s_A"], ["s_B", "s_C"]], "actions": [{"s_A": ["a_L", "a_R"]}],
                "costs": [{"s_A": {"a_L": [0, 0], "a_R": 0.5}}], "terminal_cost": {"s_B": 1, "s_C": 0},
                "initial_state": "s_A"},
        "ambiguity": [{"type": "singleton", "kernel": {"s_A": {"a_L": {"s_B": 1}, "a_R": [0.5, 0.5]}}}],
    }
    problem = loads(json.dumps(doc))
    assert np.array_equal(problem.instance.costs[0][0], [[0.0, 0.0], [0.5, 0.5]])
    assert np.array_equal(problem.ambiguity[0].kernel[0], [[1.0, 0.0], [0.5, 0.5]])


def test_schema_reference_ships_with_package():
    from importlib import resources
    text = resources.files("drmdp").joinpath("data", "schema.md").read_text(encoding="utf-8")
    assert "cost_ambiguity" in text
