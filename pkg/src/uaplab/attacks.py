"""Per-image boundary-crossing solvers.

Both solvers run the same inner loop: linearize the decision boundaries of
the top-ranked competitor classes at the current point, take one candidate
step, re-linearize, and stop once the prediction would flip.  They differ
only in which candidate gets taken:

  min-norm    the candidate with the smallest step norm (the quickest exit
              for this one image);
  max-cosine  the candidate whose step is best aligned with the accumulated
              universal perturbation, so that aggregating it grows the
              aggregate's magnitude as much as possible.

The flip test applies the overshoot factor, i.e. it asks whether the scaled
delta that would be returned already crosses the boundary; this makes the
loop exit in exactly one iteration on a purely linear classifier instead of
stalling on the boundary itself.
"""

from dataclasses import dataclass

import numpy as np

from . import models
from .errors import NoCandidates, ZeroReference
from .numerics import Vec, cosine, l2_norm

DEGENERATE_DIRECTION_NORM = 1e-12

MIN_NORM = "min-norm"
MAX_COSINE = "max-cosine"


@dataclass
class AttackConfig:
    max_inner_iters: int = 50
    overshoot: float = 0.02
    top_k: int = 10
    policy: str = MIN_NORM
    clamp_input: bool = False

    def __post_init__(self):
        if self.max_inner_iters < 1:
            raise ValueError(f"max_inner_iters must be >= 1, got {self.max_inner_iters}")
        if self.overshoot < 0:
            raise ValueError(f"overshoot must be >= 0, got {self.overshoot}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.policy not in (MIN_NORM, MAX_COSINE):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class CandidateStep:
    """One linearized boundary crossing toward a competitor class."""

    class_index: int
    direction: Vec        # gradient difference toward the competitor
    logit_gap: float      # current-class logit minus competitor logit, >= 0
    step: Vec             # (|logit_gap| / |direction|^2) * direction


@dataclass
class AttackOutcome:
    delta: Vec
    success: bool
    inner_iters: int
    crossed_class: int | None = None
    cosine_to_reference: float | None = None


def candidate_steps(classifier, x_cur: Vec, cfg: AttackConfig) -> list[CandidateStep]:
    """Linearized boundary-crossing steps from x_cur toward each of the
    top-ranked competitor classes.

    Competitors are the non-predicted classes ranked by logit, truncated to
    cfg.top_k.  Candidates whose gradient-difference direction is degenerate
    (norm < 1e-12) are dropped; if every candidate is degenerate the point
    gives the solver nothing to work with and NoCandidates is raised.
    """
    logits = classifier.forward(x_cur)
    c_hat = int(np.argmax(logits))
    ranked = [k for k in np.argsort(-logits, kind="stable") if k != c_hat]
    jac = classifier.input_jacobian(x_cur)
    g_hat = jac[c_hat]
    out = []
    for k in ranked[:cfg.top_k]:
        w = jac[k] - g_hat
        norm_sq = float(np.dot(w, w))
        if norm_sq < DEGENERATE_DIRECTION_NORM ** 2:
            continue
        gap = float(logits[c_hat] - logits[k])
        out.append(CandidateStep(
            class_index=int(k),
            direction=w,
            logit_gap=gap,
            step=(abs(gap) / norm_sq) * w,
        ))
    if not out:
        raise NoCandidates("all boundary directions degenerate at this point")
    return out


def _reference_cosine(cand: CandidateStep, v_bar: Vec) -> float:
    # The step is a non-negative multiple of the direction, so fall back to
    # the direction when the step has zero length (gap exactly 0).
    if np.any(cand.step):
        return cosine(cand.step, v_bar)
    return cosine(cand.direction, v_bar)


def _select_min_norm(cands, v_bar):
    return min(cands, key=lambda c: (l2_norm(c.step), c.class_index))


def _select_max_cosine(cands, v_bar):
    return max(cands, key=lambda c: (_reference_cosine(c, v_bar), -l2_norm(c.step), -c.class_index))


def _solve(classifier, x: Vec, v_bar: Vec, cfg: AttackConfig, select, hook=None) -> AttackOutcome:
    orig = classifier.predict(x)
    scale = 1.0 + cfg.overshoot
    delta_raw = np.zeros_like(x)
    iters = 0
    while iters < cfg.max_inner_iters:
        probe = models.perturbed(x, v_bar + scale * delta_raw, cfg.clamp_input)
        if classifier.predict(probe) != orig:
            break
        point = models.perturbed(x, v_bar + delta_raw, cfg.clamp_input)
        try:
            cands = candidate_steps(classifier, point, cfg)
        except NoCandidates:
            break
        chosen = select(cands, v_bar)
        if hook is not None:
            hook(iters, cands, chosen)
        delta_raw = delta_raw + chosen.step
        iters += 1

    delta = scale * delta_raw
    final_class = int(classifier.predict(models.perturbed(x, v_bar + delta, cfg.clamp_input)))
    success = final_class != orig
    ref_cos = None
    if np.any(v_bar) and np.any(delta):
        ref_cos = cosine(delta, v_bar)
    return AttackOutcome(
        delta=delta,
        success=success,
        inner_iters=iters,
        crossed_class=final_class if success else None,
        cosine_to_reference=ref_cos,
    )


def solve_min_norm(classifier, x: Vec, v_bar: Vec, cfg: AttackConfig, hook=None) -> AttackOutcome:
    """Boundary-crossing perturbation of minimal step norm at each iteration.

    Caller must ensure the image is not already fooled at x + v_bar.
    Failure to cross within the iteration budget is reported as
    success=False, never an exception.
    """
    return _solve(classifier, x, v_bar, cfg, _select_min_norm, hook)


def solve_max_cosine(classifier, x: Vec, v_bar: Vec, cfg: AttackConfig, hook=None) -> AttackOutcome:
    """Boundary-crossing perturbation whose steps align with v_bar.

    At every inner iteration the candidate with the largest cosine to v_bar
    wins; ties fall back to the smaller step norm, then the lower class
    index.  Requires a nonzero reference: the degenerate start belongs to
    solve_min_norm.
    """
    if not np.any(v_bar):
        raise ZeroReference("max-cosine selection needs a nonzero reference perturbation")
    return _solve(classifier, x, v_bar, cfg, _select_max_cosine, hook)


def solve(classifier, x: Vec, v_bar: Vec, cfg: AttackConfig, hook=None) -> AttackOutcome:
    """Dispatch on cfg.policy."""
    if cfg.policy == MAX_COSINE:
        return solve_max_cosine(classifier, x, v_bar, cfg, hook)
    return solve_min_norm(classifier, x, v_bar, cfg, hook)
