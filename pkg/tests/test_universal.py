import numpy as np
import pytest

import uaplab as u
from uaplab import universal
from uaplab.attacks import AttackConfig
from uaplab.errors import EmptyDataset, FormatError, NoProgress
from uaplab.universal import (
    FAST_UAP,
    UAP,
    GenConfig,
    PerturbationState,
    fooling_rate,
    generate,
    magnitude_trace,
    mean_step_growth,
)

from conftest import binary_line_model


def quick_cfg(seed=0, delta=0.6, **kw):
    kw.setdefault("max_passes", 8)
    kw.setdefault("eval_every", 20)
    return GenConfig(delta=delta, eps=10.0, seed=seed, **kw)


def test_gen_config_validation():
    with pytest.raises(ValueError):
        GenConfig(delta=0.0)
    with pytest.raises(ValueError):
        GenConfig(delta=1.2)
    with pytest.raises(ValueError):
        GenConfig(eps=0.0)
    with pytest.raises(ValueError):
        GenConfig(max_passes=0)


def test_fooling_rate_zero_perturbation(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    assert fooling_rate(mlp_on_rings, train_set, np.zeros(train_set.dim)) == 0.0


def test_fooling_rate_counts_flips_exactly():
    m = binary_line_model((1.0, 0.0), 0.0)
    feats = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [9.0, 0.0]])
    data = u.Dataset(feats, np.zeros(4, dtype=int), 2, seed=0)
    v = np.array([-4.0, 0.0])  # flips the first three, not the fourth
    assert fooling_rate(m, data, v) == 0.75


def test_fooling_rate_matches_per_sample_loop(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    m = mlp_on_rings
    v = np.random.default_rng(0).normal(scale=3.0, size=train_set.dim)
    subset = u.Dataset(train_set.features[:200], train_set.labels[:200],
                       train_set.class_count, seed=0)
    loop = sum(m.predict(subset.features[i] + v) != m.predict(subset.features[i])
               for i in range(len(subset))) / len(subset)
    assert fooling_rate(m, subset, v) == loop


def test_fooling_rate_empty_dataset():
    class Empty:
        features = np.zeros((0, 4))

        def __len__(self):
            return 0

    with pytest.raises(EmptyDataset):
        fooling_rate(binary_line_model(), Empty(), np.zeros(4))


def test_generate_reaches_target_on_separable_blobs():
    # Two separable blobs with a 3:1 class imbalance.  A single direction can
    # only push one class across the boundary, so >= 60% fooling requires the
    # majority class to sit within the budget's reach: margin ~9 along the
    # separating direction against an l-inf budget of 10 over 16 coordinates.
    rng = np.random.default_rng(3)
    n, d = 400, 16
    axis = np.zeros(d)
    axis[:4] = 0.5  # separation spread over a few coordinates, reachable
    labels = (np.arange(n) % 4 == 0).astype(int)  # 25% minority
    feats = 127.5 + np.where(labels[:, None] == 0, -9.0, 9.0) * axis
    feats = feats + 1.5 * rng.standard_normal((n, d))
    full = u.Dataset(np.clip(feats, 0, 255), labels, 2, seed=3)
    model = u.train(u.build("linear", d, 2, seed=1), full,
                    u.TrainConfig(epochs=120, learning_rate=1.0,
                                  weight_decay=0.0, seed=1))
    assert model.train_accuracy >= 0.99
    state = generate(model, full, quick_cfg(delta=0.6), FAST_UAP)
    assert state.fooling_rate_train >= 0.6
    assert u.linf_norm(state.v) <= 10.0


def test_generate_postconditions(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    state = generate(mlp_on_rings, train_set, quick_cfg(), FAST_UAP)
    assert u.linf_norm(state.v) <= 10.0
    recomputed = fooling_rate(mlp_on_rings, train_set, state.v)
    assert recomputed == state.fooling_rate_train
    assert state.fooling_rate_train >= state.final_fooling_rate - 1e-12
    assert state.algorithm == FAST_UAP
    assert state.target_model_id == mlp_on_rings.model_id
    images = [pt[0] for pt in state.trajectory]
    assert images == sorted(images)


def test_linf_budget_holds_after_every_aggregation(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    violations = []

    def watch(v, images):
        if u.linf_norm(v) > 10.0:
            violations.append((images, u.linf_norm(v)))

    for algorithm in (UAP, FAST_UAP):
        generate(mlp_on_rings, train_set, quick_cfg(max_passes=3), algorithm,
                 on_aggregate=watch)
    assert violations == []


def test_skip_rule_counters(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    state = generate(mlp_on_rings, train_set, quick_cfg(max_passes=3), UAP)
    assert state.attack_calls + state.images_skipped == state.images_consumed
    assert state.attack_successes <= state.attack_calls
    assert state.images_consumed == state.passes_completed * len(train_set)


def test_generation_is_reproducible(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    a = generate(mlp_on_rings, train_set, quick_cfg(seed=4, max_passes=2), FAST_UAP)
    b = generate(mlp_on_rings, train_set, quick_cfg(seed=4, max_passes=2), FAST_UAP)
    assert np.array_equal(a.v, b.v)
    assert a.fooling_rate_train == b.fooling_rate_train
    assert a.images_consumed == b.images_consumed
    assert a.agg_l2 == b.agg_l2


def test_first_image_attack_is_min_norm_for_both(mlp_on_rings, rings_small):
    # With v = 0 both algorithms route the first image through the
    # minimal-norm solver, so the first aggregated magnitude must agree.
    train_set, _ = rings_small
    a = generate(mlp_on_rings, train_set, quick_cfg(seed=9, max_passes=1), UAP)
    b = generate(mlp_on_rings, train_set, quick_cfg(seed=9, max_passes=1), FAST_UAP)
    assert a.agg_l2 and b.agg_l2
    assert a.agg_l2[0] == b.agg_l2[0]


def test_two_class_target_makes_algorithms_identical():
    full = u.make_synthetic_dataset("rings", 36, 2, 500, seed=5)
    model = u.train(u.build("mlp:16", 36, 2, seed=2), full,
                    u.TrainConfig(epochs=20, seed=2))
    a = generate(model, full, quick_cfg(seed=3, delta=0.9, max_passes=4), UAP)
    b = generate(model, full, quick_cfg(seed=3, delta=0.9, max_passes=4), FAST_UAP)
    assert np.array_equal(a.v, b.v)
    assert a.images_consumed == b.images_consumed
    assert a.agg_l2 == b.agg_l2


def test_no_progress_raises():
    m = u.build("linear", 4, 3, seed=0)
    m.w[...] = np.ones((3, 4))  # constant-ranking model, no usable boundary
    m.b[...] = np.array([1.0, 0.0, -1.0])
    data = u.make_synthetic_dataset("blobs", 4, 3, 60, seed=0)
    with pytest.raises(NoProgress):
        generate(m, data, quick_cfg(max_passes=2), UAP)


def test_termination_reasons(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    hit = generate(mlp_on_rings, train_set, quick_cfg(delta=0.3), FAST_UAP)
    assert hit.stop_reason == "target"
    capped = generate(mlp_on_rings, train_set, quick_cfg(delta=1.0, max_passes=1), UAP)
    assert capped.stop_reason == "max_passes"
    assert capped.passes_completed == 1
    stagnant = generate(mlp_on_rings, train_set,
                        quick_cfg(delta=1.0, max_passes=30), FAST_UAP)
    assert stagnant.stop_reason in ("stagnation", "max_passes")
    assert stagnant.passes_completed <= 30


def test_unknown_algorithm_rejected(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    with pytest.raises(ValueError):
        generate(mlp_on_rings, train_set, quick_cfg(), "pgd")


def test_magnitude_trace_empty_for_untouched_state():
    state = PerturbationState(v=np.zeros(4), eps=10.0,
                              target_model_id="m", algorithm=UAP)
    assert magnitude_trace(state) == []
    assert mean_step_growth(state) == 0.0


def test_magnitude_trace_contents(mlp_on_rings, rings_small):
    train_set, _ = rings_small
    state = generate(mlp_on_rings, train_set, quick_cfg(max_passes=2), FAST_UAP)
    trace = magnitude_trace(state)
    assert [i for i, _ in trace] == list(range(1, len(state.agg_l2) + 1))
    assert all(np.isfinite(m) and m >= 0 for _, m in trace)


def test_perturbation_file_round_trip(tmp_path, mlp_on_rings, rings_small):
    train_set, _ = rings_small
    state = generate(mlp_on_rings, train_set, quick_cfg(max_passes=2), FAST_UAP)
    path = tmp_path / "pert.json"
    universal.save_perturbation(state, path)
    doc = universal.load_perturbation(path)
    assert np.array_equal(doc["v"], state.v)
    assert doc["model_id"] == state.target_model_id
    assert doc["algorithm"] == FAST_UAP
    assert doc["eps"] == state.eps
    assert doc["passes"] == state.passes_completed
    assert doc["fooling_rate_train"] == state.fooling_rate_train


def test_perturbation_file_header_keys(tmp_path):
    state = PerturbationState(v=np.zeros(3), eps=10.0,
                              target_model_id="m", algorithm=UAP)
    path = tmp_path / "pert.json"
    universal.save_perturbation(state, path)
    import json
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert set(doc) == {"format_version", "model_id", "algorithm", "eps", "d",
                        "passes", "images_consumed", "fooling_rate_train", "v"}


def test_perturbation_file_errors(tmp_path):
    state = PerturbationState(v=np.zeros(3), eps=10.0,
                              target_model_id="m", algorithm=UAP)
    path = tmp_path / "pert.json"
    universal.save_perturbation(state, path)
    garbled = tmp_path / "bad.json"
    garbled.write_text(path.read_text()[:25], encoding="utf-8")
    with pytest.raises(FormatError):
        universal.load_perturbation(garbled)
    import json
    doc = json.loads(path.read_text())
    doc["d"] = 7
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(FormatError):
        universal.load_perturbation(wrong)


def test_trajectory_csv_round_trip(tmp_path, mlp_on_rings, rings_small):
    train_set, _ = rings_small
    state = generate(mlp_on_rings, train_set, quick_cfg(max_passes=2), UAP)
    path = tmp_path / "traj.csv"
    universal.save_trajectory(state, path)
    rows = universal.load_trajectory(path)
    assert len(rows) == len(state.trajectory)
    for got, want in zip(rows, state.trajectory):
        assert got[0] == want[0]
        assert got[1] == want[1]
        assert got[2] == want[2]
        assert got[3] == want[3]
