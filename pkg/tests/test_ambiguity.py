import numpy as np
import pytest
from hypothesis import given, strategies as st

from drmdp.ambiguity import (FiniteKernelSet, Polytope, RRect, SaRect, Singleton, compose_sr,
                             enumerate_extreme_kernels, marginalize_statewise, require_valid_model,
                             s_rect_enlargement, sa_product_probe, validate_model)
from drmdp.exceptions import EnumerationCapError, ValidationError
from drmdp.fixtures import factor_example, full_segment_example, split_segment_example
from drmdp.generators import random_instance, random_model
from drmdp.mdp import MdpInstance
from drmdp.robust import solve_dual, solve_primal
from oracles import robust_tables


def _sorted_rows(V):
    return np.array(sorted(map(tuple, np.round(V, 12))))


def test_halfspace_box_vertices():
    box = Polytope(A=np.vstack([np.eye(2), -np.eye(2)]), b=[1.0, 2.0, 0.0, -1.0])
    assert np.allclose(_sorted_rows(box.vertices), [[0, 1], [0, 2], [1, 1], [1, 2]])
    assert box.contains([0.5, 1.5]) and not box.contains([1.5, 1.5])


def test_halfspace_simplex_segment():
    seg = Polytope(A=[[-1.0, 0.0], [1.0, 0.0]], b=[-0.25, 0.75], E=[[1.0, 1.0]], f=[1.0])
    assert np.allclose(_sorted_rows(seg.vertices), [[0.25, 0.75], [0.75, 0.25]])


def test_infeasible_and_unbounded_polytopes_rejected():
    with pytest.raises(ValidationError):
        Polytope(A=[[1.0], [-1.0]], b=[0.0, -1.0]).vertices
    with pytest.raises(ValidationError):
        Polytope(A=[[-1.0]], b=[0.0]).vertices


def test_split_segment_has_four_extreme_kernels():
    prob = split_segment_example()
    kernels = enumerate_extreme_kernels(prob.ambiguity, prob.instance, 0)
    assert len(kernels) == 4
    firsts = sorted(float(k[0][0, 0]) for k in kernels)
    assert firsts == pytest.approx([0.0, 0.25, 0.75, 1.0])


def test_sa_rect_extreme_count_is_product():
    inst = MdpInstance([["s", "r"], ["x", "y"]], [[["a", "b"], ["a", "b"]]], [[np.zeros((2, 2))] * 2], [0, 0])
    seg = Polytope([[1.0, 0.0], [0.0, 1.0]])
    model = SaRect([[seg, seg], [seg, seg]])
    assert len(enumerate_extreme_kernels([model], inst, 0)) == 16
    with pytest.raises(EnumerationCapError):
        enumerate_extreme_kernels([model], inst, 0, cap=10)


def test_enlargement_marginals_contain_original_points():
    rng = np.random.default_rng(5)
    for kind in ["finite", "r_rect", "sa_rect", "s_rect"]:
        inst = random_instance(rng, (1, 2, 3), 2)
        model = random_model(rng, inst, kind)
        big = s_rect_enlargement(model, inst)
        for t in range(inst.horizon):
            for K in enumerate_extreme_kernels(model, inst, t):
                for s in range(inst.n_states(t)):
                    assert big[t].sets[s].contains(np.asarray(K[s]).ravel())
            for s in range(inst.n_states(t)):
                a = marginalize_statewise(model, inst, t, s).pooled_vertices()
                b = marginalize_statewise(big, inst, t, s).pooled_vertices()
                assert np.allclose(_sorted_rows(a), _sorted_rows(b))


def test_factor_example_enlargement_is_segment():
    prob = factor_example()
    marg = marginalize_statewise(prob.ambiguity, prob.instance, 0, 0)
    pts = marg.pooled_vertices().reshape(-1, 2, 2)
    assert len(pts) == 2
    firsts = sorted(map(tuple, np.round(pts[:, :, 0], 12)))
    assert np.allclose(firsts, [[0.0, 1 / 3], [1.0, 2 / 3]])
    assert marg.contains(np.array([[0.5, 0.5], [0.5, 0.5]]).ravel())
    assert not marg.contains(np.array([[0.5, 0.5], [1 / 3, 2 / 3]]).ravel())


def test_sa_rect_solves_like_its_state_rect_form():
    rng = np.random.default_rng(9)
    for _ in range(15):
        inst = random_instance(rng, (1, 2, 2), 2)
        model = random_model(rng, inst, "sa_rect")
        big = s_rect_enlargement(model, inst)
        a, b = solve_primal(inst, model), solve_primal(inst, big)
        assert all(np.allclose(x, y, atol=1e-9) for x, y in zip(a.values, b.values))


def test_sa_rect_against_scipy_game_recursion():
    rng = np.random.default_rng(10)
    for _ in range(10):
        inst = random_instance(rng, (1, 2, 2), 2)
        model = random_model(rng, inst, "sa_rect")
        pieces = [[model[t].state_pieces(inst, t, s) for s in range(inst.n_states(t))] for t in range(inst.horizon)]
        V, Q = robust_tables(inst, pieces)
        assert solve_primal(inst, model).values[0] == pytest.approx(V[0], abs=1e-8)
        assert solve_dual(inst, model).values[0] == pytest.approx(Q[0], abs=1e-8)


def test_blend_extremes_reduce_to_parts():
    prob = factor_example()
    inst, r_part = prob.instance, prob.ambiguity[0]
    s_part = full_segment_example().ambiguity[0]
    only_s, only_r = compose_sr(1.0, s_part, r_part, inst), compose_sr(0.0, s_part, r_part, inst)
    for blended, part in [(only_s, s_part), (only_r, r_part)]:
        assert solve_primal(inst, [blended]).values[0] == pytest.approx(solve_primal(inst, [part]).values[0])
        assert solve_dual(inst, [blended]).values[0] == pytest.approx(solve_dual(inst, [part]).values[0])
    assert only_s.state_rectangular and not only_r.state_rectangular
    with pytest.raises(ValidationError):
        compose_sr(1.5, s_part, r_part, inst)


def test_bad_vertex_flagged_with_location():
    inst = MdpInstance([["s"], ["x", "y"]], [[["a"]]], [[np.zeros((1, 2))]], [0, 0])
    model = SaRect([[Polytope([[0.5, 0.6]])]])
    problems = validate_model([model], inst, 0)
    assert problems and problems[0].startswith("(1, s, a): vertex [0.5, 0.6]")
    with pytest.raises(ValidationError):
        require_valid_model([model], inst)


def test_negative_factor_coefficient_rejected():
    inst = MdpInstance([["s"], ["x", "y"]], [[["a"]]], [[np.zeros((1, 2))]], [0, 0])
    model = RRect([[[0.5, 0.5]]], [[[-1.0]]])
    assert any("negative" in p for p in validate_model([model], inst, 0))


def test_finite_set_pieces_follow_hull_flag():
    inst = MdpInstance([["s"], ["x", "y"]], [[["a"]]], [[np.zeros((1, 2))]], [0, 0])
    ks = [[np.array([[1.0, 0.0]])], [np.array([[0.0, 1.0]])]]
    assert len(FiniteKernelSet(ks).state_pieces(inst, 0, 0)) == 2
    assert len(FiniteKernelSet(ks, hull=True).state_pieces(inst, 0, 0)) == 1
    assert Singleton(ks[0]).state_rectangular


def test_sa_product_probe():
    prob = factor_example()
    probe = sa_product_probe(prob.ambiguity, prob.instance, 0, 0)
    assert not probe.is_product and probe.witness is not None
    inst = prob.instance
    sa = SaRect([[Polytope([[1, 0], [0, 1]]), Polytope([[0.5, 0.5]])]])
    assert sa_product_probe([sa], inst, 0, 0).is_product


@given(st.integers(0, 10_000))
def test_enlarged_values_match(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, (1, 2, 2), 2, next_state_free=True)
    model = random_model(rng, inst, "r_rect")
    big = s_rect_enlargement(model, inst)
    assert np.allclose(solve_primal(inst, model).values[0], solve_primal(inst, big).values[0], atol=1e-9)
    assert np.allclose(solve_dual(inst, model).values[0], solve_dual(inst, big).values[0], atol=1e-9)
