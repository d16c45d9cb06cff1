"""Universal perturbation generation: the outer loops over the image set.

Both generators run the same pass structure: shuffle the training images,
walk them in order, attack every image the current perturbation does not
already fool, aggregate the returned delta into v, and clip v back into the
l-inf budget.  The fooling-rate gate is checked at the end of every pass.
The only difference between the two algorithms is the per-image solver once
v is nonzero:

  uap        always the minimal-norm boundary crossing;
  fast-uap   the crossing best aligned with the current v (the very first
             attack, at v = 0, has no reference orientation and uses the
             minimal-norm solver as its initialization).

Mid-pass fooling-rate checkpoints (every cfg.eval_every images) are recorded
into the trajectory so that time-to-target and images-to-target can be read
off at a finer grain than whole passes; termination decisions only ever look
at pass-end rates.
"""

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import attacks, models
from .errors import EmptyDataset, NoProgress
from .numerics import Vec, clip_linf, l2_norm

PERTURBATION_FORMAT_VERSION = 1
TRAJECTORY_HEADER = ["images", "seconds", "fooling_rate", "l2_norm"]

UAP = "uap"
FAST_UAP = "fast-uap"
ALGORITHMS = (UAP, FAST_UAP)


@dataclass
class GenConfig:
    """Settings for one generation run; delta is the target fooling rate."""

    delta: float = 0.8
    eps: float = 10.0
    attack: attacks.AttackConfig = field(default_factory=attacks.AttackConfig)
    max_passes: int = 20
    stagnation_window: int = 3
    stagnation_threshold: float = 0.005
    seed: int = 0
    eval_every: int = 100

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")
        if self.eval_every < 0:
            raise ValueError(f"eval_every must be >= 0, got {self.eval_every}")


@dataclass
class PerturbationState:
    """Result of a generation run.

    v is the best-fooling-rate snapshot observed at any pass boundary (the
    clip step can make later passes worse); final_v is whatever the loop
    ended with.  agg_l2 holds |v| after every aggregation+clip, which is the
    magnitude-growth trace.  trajectory rows are
    (images_consumed, wall_seconds, fooling_rate, l2_norm).
    """

    v: Vec
    eps: float
    target_model_id: str
    algorithm: str
    passes_completed: int = 0
    images_consumed: int = 0
    fooling_rate_train: float = 0.0
    trajectory: list = field(default_factory=list)
    agg_l2: list = field(default_factory=list)
    final_v: Vec | None = None
    final_fooling_rate: float = 0.0
    attack_calls: int = 0
    attack_successes: int = 0
    images_skipped: int = 0
    stop_reason: str = ""

    @property
    def dim(self) -> int:
        return self.v.shape[0]


def fooling_rate(classifier, data: models.Dataset, v: Vec,
                 clamp_input: bool = False) -> float:
    """Fraction of samples whose predicted class flips when v is added.

    Measured against the model's own clean predictions, not ground truth.
    """
    if len(data) == 0:
        raise EmptyDataset("fooling rate needs at least one sample")
    clean = classifier.predict_batch(data.features)
    fooled = classifier.predict_batch(models.perturbed(data.features, v, clamp_input))
    return float(np.mean(clean != fooled))


def _generate(classifier, data: models.Dataset, cfg: GenConfig, algorithm: str,
              on_aggregate=None) -> PerturbationState:
    if len(data) == 0:
        raise EmptyDataset("generation needs a non-empty training set")
    n = len(data)
    feats = data.features
    clamp = cfg.attack.clamp_input
    clean_pred = classifier.predict_batch(feats)

    state = PerturbationState(
        v=np.zeros(data.dim), eps=cfg.eps,
        target_model_id=classifier.model_id, algorithm=algorithm,
    )
    v = state.v
    best_v = v.copy()
    best_rate = 0.0
    best_history = []
    rng = np.random.default_rng(cfg.seed)
    rate = 0.0
    t0 = time.monotonic()

    def checkpoint(current_rate):
        state.trajectory.append(
            (state.images_consumed, time.monotonic() - t0, current_rate, l2_norm(v)))

    while True:
        if state.passes_completed >= cfg.max_passes:
            state.stop_reason = "max_passes"
            break
        order = rng.permutation(n)
        successes_this_pass = 0
        for j, idx in enumerate(order):
            x = feats[idx]
            state.images_consumed += 1
            if classifier.predict(models.perturbed(x, v, clamp)) != clean_pred[idx]:
                state.images_skipped += 1
            else:
                state.attack_calls += 1
                if algorithm == FAST_UAP and np.any(v):
                    outcome = attacks.solve_max_cosine(classifier, x, v, cfg.attack)
                else:
                    outcome = attacks.solve_min_norm(classifier, x, v, cfg.attack)
                if outcome.success:
                    successes_this_pass += 1
                    state.attack_successes += 1
                    v = clip_linf(v + outcome.delta, cfg.eps)
                    state.agg_l2.append(l2_norm(v))
                    if on_aggregate is not None:
                        on_aggregate(v, state.images_consumed)
            if cfg.eval_every and (j + 1) % cfg.eval_every == 0 and j + 1 < n:
                checkpoint(fooling_rate(classifier, data, v, clamp))

        state.passes_completed += 1
        rate = fooling_rate(classifier, data, v, clamp)
        checkpoint(rate)
        if successes_this_pass == 0 and rate == 0.0:
            raise NoProgress(
                f"pass {state.passes_completed}: no successful attack and fooling rate 0")
        if rate > best_rate:
            best_rate = rate
            best_v = v.copy()
        best_history.append(best_rate)
        if rate >= cfg.delta:
            state.stop_reason = "target"
            break
        w = cfg.stagnation_window
        if len(best_history) > w and best_history[-1] - best_history[-1 - w] < cfg.stagnation_threshold:
            state.stop_reason = "stagnation"
            break

    state.final_v = v
    state.final_fooling_rate = rate
    state.v = best_v
    state.fooling_rate_train = best_rate
    return state


def generate_fast_uap(classifier, data: models.Dataset, cfg: GenConfig,
                      on_aggregate=None) -> PerturbationState:
    """Max-cosine-aggregation universal perturbation (fast-uap)."""
    return _generate(classifier, data, cfg, FAST_UAP, on_aggregate)


def generate_uap_baseline(classifier, data: models.Dataset, cfg: GenConfig,
                          on_aggregate=None) -> PerturbationState:
    """Minimal-norm-aggregation universal perturbation (uap baseline)."""
    return _generate(classifier, data, cfg, UAP, on_aggregate)


def generate(classifier, data: models.Dataset, cfg: GenConfig, algorithm: str,
             on_aggregate=None) -> PerturbationState:
    """Dispatch by algorithm name ('uap' or 'fast-uap')."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    return _generate(classifier, data, cfg, algorithm, on_aggregate)


def magnitude_trace(state: PerturbationState) -> list[tuple[int, float]]:
    """(aggregation index, |v| after that aggregation) pairs, 1-based."""
    return [(i + 1, m) for i, m in enumerate(state.agg_l2)]


def mean_step_growth(state: PerturbationState) -> float:
    """Mean per-aggregation growth of |v|; 0.0 when nothing was aggregated."""
    if not state.agg_l2:
        return 0.0
    diffs = np.diff(np.concatenate([[0.0], state.agg_l2]))
    return float(np.mean(diffs))


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def save_perturbation(state: PerturbationState, path) -> None:
    """Perturbation file: JSON header plus the inline float64 vector.

    Contains no wall-clock fields, so identical runs write identical bytes.
    """
    doc = {
        "format_version": PERTURBATION_FORMAT_VERSION,
        "model_id": state.target_model_id,
        "algorithm": state.algorithm,
        "eps": state.eps,
        "d": int(state.dim),
        "passes": state.passes_completed,
        "images_consumed": state.images_consumed,
        "fooling_rate_train": state.fooling_rate_train,
        "v": np.asarray(state.v, dtype=np.float64).tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_perturbation(path) -> dict:
    """Read a perturbation file; returns its fields with v as a float64 array."""
    from .errors import FormatError
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"unreadable perturbation file {path}: {exc}") from exc
    for key in ("format_version", "model_id", "algorithm", "eps", "d", "v"):
        if key not in doc:
            raise FormatError(f"perturbation file {path} missing field {key!r}")
    if doc["format_version"] != PERTURBATION_FORMAT_VERSION:
        raise FormatError(f"unsupported perturbation format version {doc['format_version']}")
    doc["v"] = np.asarray(doc["v"], dtype=np.float64)
    if doc["v"].shape != (doc["d"],):
        raise FormatError(f"perturbation file {path}: vector length does not match d")
    return doc


def save_trajectory(state: PerturbationState, path) -> None:
    """Trajectory CSV: images,seconds,fooling_rate,l2_norm."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for images, seconds, rate, norm in state.trajectory:
            writer.writerow([images, seconds, rate, norm])


def load_trajectory(path) -> list[tuple[int, float, float, float]]:
    from .errors import FormatError
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise FormatError(f"bad trajectory header in {path}: {header}")
        return [(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in reader]
