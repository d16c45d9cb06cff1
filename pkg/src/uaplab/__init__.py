"""Universal adversarial perturbation workbench.

Generates image-agnostic perturbations against small self-trained
classifiers with two per-image candidate-selection policies (minimal-norm
and maximal-cosine-alignment) and benchmarks their speed, image budget, and
white-/black-box fooling rates.
"""

from .attacks import (
    AttackConfig,
    AttackOutcome,
    CandidateStep,
    candidate_steps,
    solve_max_cosine,
    solve_min_norm,
)
from .harness import (
    DatasetSpec,
    ExperimentSpec,
    RunRecord,
    TargetResult,
    TransferMatrix,
    emit_reports,
    run_speed_comparison,
    run_transfer_matrix,
)
from .models import (
    Classifier,
    Dataset,
    Sample,
    TrainConfig,
    build,
    load,
    make_synthetic_dataset,
    save,
    train,
)
from .numerics import (
    add,
    aggregate_magnitude,
    clip_linf,
    cosine,
    dot,
    l2_norm,
    linf_norm,
)
from .universal import (
    FAST_UAP,
    UAP,
    GenConfig,
    PerturbationState,
    fooling_rate,
    generate,
    generate_fast_uap,
    generate_uap_baseline,
    load_perturbation,
    magnitude_trace,
    save_perturbation,
    save_trajectory,
)

__version__ = "0.1.0"
