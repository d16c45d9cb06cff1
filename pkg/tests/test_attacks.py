import numpy as np
import pytest

import uaplab as u
from uaplab import attacks
from uaplab.attacks import AttackConfig, candidate_steps, solve_max_cosine, solve_min_norm
from uaplab.errors import NoCandidates, ZeroReference

from conftest import binary_line_model


def three_class_instance():
    """Linear model whose candidate set at x + v_bar is exactly
    {(0.5, 0.5) toward class 1, (2.0, 0.1) toward class 2} with v_bar=(1,0).

    The first candidate has the smaller norm, the second the larger cosine
    to v_bar, so the two selection policies must part ways here.
    """
    m = u.build("linear", 2, 3, seed=0)
    m.w[...] = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.1]])
    m.b[...] = np.array([5.0, 4.0, 0.99])
    x = np.array([-1.0, 0.0])
    v_bar = np.array([1.0, 0.0])
    return m, x, v_bar


def test_attack_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(max_inner_iters=0)
    with pytest.raises(ValueError):
        AttackConfig(overshoot=-0.1)
    with pytest.raises(ValueError):
        AttackConfig(top_k=0)
    with pytest.raises(ValueError):
        AttackConfig(policy="random")


def test_single_candidate_matches_hyperplane_displacement():
    w = np.array([0.7, -1.3])
    b = 2.0
    m = binary_line_model(w, b)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(scale=5.0, size=2)
        cands = candidate_steps(m, x, AttackConfig())
        assert len(cands) == 1
        signed = float(w @ x + b)
        expect = -(signed / float(w @ w)) * w
        assert np.allclose(cands[0].step, expect, rtol=1e-12, atol=1e-12)


def test_candidate_count_is_topk_capped():
    m = u.build("linear", 4, 3, seed=1)
    x = np.random.default_rng(1).uniform(0, 255, size=4)
    assert len(candidate_steps(m, x, AttackConfig(top_k=10))) == 2
    assert len(candidate_steps(m, x, AttackConfig(top_k=1))) == 1


def test_candidate_step_zeroes_linearized_gap():
    m = u.build("mlp:16", 12, 6, seed=2)
    x = np.random.default_rng(2).uniform(0, 255, size=12)
    for cand in candidate_steps(m, x, AttackConfig()):
        assert float(cand.direction @ cand.step) == pytest.approx(
            abs(cand.logit_gap), rel=1e-12)
        assert cand.logit_gap >= 0.0


def test_degenerate_directions_raise_no_candidates():
    m = u.build("linear", 3, 3, seed=0)
    m.w[...] = np.ones((3, 3))  # identical rows: every direction cancels
    m.b[...] = np.zeros(3)
    with pytest.raises(NoCandidates):
        candidate_steps(m, np.array([1.0, 2.0, 3.0]), AttackConfig())


def test_min_norm_closed_form_on_binary_line():
    m = binary_line_model((1.0, 0.0), 0.0)
    out = solve_min_norm(m, np.array([2.0, 0.0]), np.zeros(2), AttackConfig())
    assert out.success
    assert out.inner_iters == 1
    assert np.allclose(out.delta, [-2.04, 0.0], atol=1e-12)
    assert out.crossed_class == 0


def test_min_norm_linear_terminates_in_one_iteration():
    rng = np.random.default_rng(3)
    for k in (2, 5):
        for _ in range(10):
            m = u.build("linear", 6, k, seed=int(rng.integers(10_000)))
            x = 127.5 + rng.normal(scale=25.0, size=6)
            out = solve_min_norm(m, x, np.zeros(6), AttackConfig())
            assert out.success
            assert out.inner_iters == 1


def test_min_norm_delta_is_overshot_hyperplane_distance():
    rng = np.random.default_rng(4)
    for k in (2, 5):
        for _ in range(25):
            m = u.build("linear", 8, k, seed=int(rng.integers(10_000)))
            x = 127.5 + rng.normal(scale=25.0, size=8)
            logits = m.forward(x)
            c = int(np.argmax(logits))
            jac = m.input_jacobian(x)
            dist = min((logits[c] - logits[j]) / np.linalg.norm(jac[j] - jac[c])
                       for j in range(k) if j != c)
            out = solve_min_norm(m, x, np.zeros(8), AttackConfig())
            got = float(np.linalg.norm(out.delta))
            want = 1.02 * dist
            assert abs(got - want) <= 1e-6 * want
            assert m.predict(x + out.delta) != c


def test_fooling_condition_is_relative_to_clean_prediction():
    m, x, v_bar = three_class_instance()
    out = solve_min_norm(m, x, v_bar, AttackConfig())
    assert out.success
    assert m.predict(x + v_bar + out.delta) != m.predict(x)


def test_policies_diverge_on_constructed_instance():
    m, x, v_bar = three_class_instance()
    cands = candidate_steps(m, x + v_bar, AttackConfig())
    by_class = {c.class_index: c for c in cands}
    assert np.allclose(by_class[1].step, [0.5, 0.5], atol=1e-12)
    assert np.allclose(by_class[2].step, [2.0, 0.1], atol=1e-12)

    def make_hook(store):
        def hook(iteration, candidates, chosen):
            if iteration == 0:
                store.append(chosen)
        return hook

    min_first = []
    out_min = solve_min_norm(m, x, v_bar, AttackConfig(), hook=make_hook(min_first))
    cos_first = []
    out_cos = solve_max_cosine(m, x, v_bar, AttackConfig(), hook=make_hook(cos_first))
    assert min_first[0].class_index == 1
    assert cos_first[0].class_index == 2
    assert np.allclose(out_min.delta, 1.02 * np.array([0.5, 0.5]), atol=1e-12)
    assert np.allclose(out_cos.delta, 1.02 * np.array([2.0, 0.1]), atol=1e-12)
    assert out_min.success and out_cos.success


def test_max_cosine_requires_nonzero_reference():
    m, x, _ = three_class_instance()
    with pytest.raises(ZeroReference):
        solve_max_cosine(m, x, np.zeros(2), AttackConfig())


def test_single_candidate_makes_policies_identical():
    m = binary_line_model((1.0, -0.5), 1.0)
    x = np.array([4.0, 1.0])
    v_bar = np.array([0.25, 0.0])
    assert m.predict(x + v_bar) == m.predict(x)
    a = solve_min_norm(m, x, v_bar, AttackConfig())
    b = solve_max_cosine(m, x, v_bar, AttackConfig())
    assert np.array_equal(a.delta, b.delta)
    assert a.success == b.success and a.inner_iters == b.inner_iters


def test_max_cosine_selection_dominates_all_candidates(mlp_on_rings, rings_small):
    model = mlp_on_rings
    train_set, _ = rings_small
    v_bar = np.random.default_rng(5).normal(scale=2.0, size=train_set.dim)
    checked = 0
    for i in range(0, 40):
        x = train_set.features[i]
        if model.predict(x + v_bar) != model.predict(x):
            continue

        records = []

        def hook(iteration, candidates, chosen):
            records.append((list(candidates), chosen))

        out = solve_max_cosine(model, x, v_bar, AttackConfig(), hook=hook)
        for candidates, chosen in records:
            chosen_cos = u.cosine(chosen.step, v_bar)
            for cand in candidates:
                if np.any(cand.step):
                    assert chosen_cos >= u.cosine(cand.step, v_bar) - 1e-12
        checked += 1
        if out.success and out.cosine_to_reference is not None:
            assert -1.0 <= out.cosine_to_reference <= 1.0
        if checked >= 8:
            break
    assert checked >= 5


def test_solver_determinism(mlp_on_rings, rings_small):
    model = mlp_on_rings
    train_set, _ = rings_small
    x = train_set.features[0]
    v_bar = np.full(train_set.dim, 0.5)
    a = solve_max_cosine(model, x, v_bar, AttackConfig())
    b = solve_max_cosine(model, x, v_bar, AttackConfig())
    assert np.array_equal(a.delta, b.delta)
    assert (a.success, a.inner_iters, a.crossed_class, a.cosine_to_reference) == \
           (b.success, b.inner_iters, b.crossed_class, b.cosine_to_reference)


def test_failure_is_reported_not_raised():
    # A model the solver cannot flip within the budget: constant logits make
    # candidate_steps degenerate, so the loop exits with success=False.
    m = u.build("linear", 3, 3, seed=0)
    m.w[...] = np.ones((3, 3))
    m.b[...] = np.array([0.0, -1.0, -2.0])
    out = solve_min_norm(m, np.array([10.0, 0.0, 0.0]), np.zeros(3), AttackConfig())
    assert not out.success
    assert out.crossed_class is None
    assert np.array_equal(out.delta, np.zeros(3))


def test_policy_dispatch():
    m, x, v_bar = three_class_instance()
    out_min = attacks.solve(m, x, v_bar, AttackConfig(policy=attacks.MIN_NORM))
    out_cos = attacks.solve(m, x, v_bar, AttackConfig(policy=attacks.MAX_COSINE))
    assert not np.array_equal(out_min.delta, out_cos.delta)
