"""Experiment driver: speed and image-budget comparisons between the two
generation policies, white-box/black-box transfer matrices, and report
emission (CSV + text summary + figures).

Experiments are fully determined by an ExperimentSpec (JSON-serializable):
a roster of (architecture, train seed) victims, one synthetic dataset split
into generation and held-out halves, target fooling rates, generation seeds,
and the attack/generation knobs.  Timing uses a monotonic clock around the
generation loop only; model training and dataset construction never count.
"""

import csv
import json
import statistics
from dataclasses import dataclass, field

from . import models, universal
from .attacks import AttackConfig
from .errors import EmptyRoster, FormatError, NoProgress
from .universal import ALGORITHMS, GenConfig

SPEED_HEADER = ["algorithm", "model_id", "seed", "target", "seconds", "images", "reached"]
TRANSFER_HEADER = ["source", "victim", "algorithm", "fooling_rate"]

DEFAULT_ROSTER = (("linear", 3), ("mlp:48", 3), ("mlp:64x32", 3), ("conv:6", 3))


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------

@dataclass
class DatasetSpec:
    """A synthetic dataset plus its train/held-out split point."""

    kind: str = "rings"
    dim: int = 64
    classes: int = 10
    n_train: int = 2200
    n_test: int = 800
    seed: int = 11
    spread: float | None = None
    noise: float | None = None

    def build(self) -> tuple[models.Dataset, models.Dataset]:
        """(generation set, held-out set) drawn from one distribution."""
        full = models.make_synthetic_dataset(
            self.kind, self.dim, self.classes, self.n_train + self.n_test,
            self.seed, spread=self.spread, noise=self.noise)
        return full.split(self.n_train)

    @classmethod
    def from_string(cls, text: str) -> "DatasetSpec":
        """Parse "kind,d=64,k=10,n=3000,seed=11,split=2200[,spread=..][,noise=..]"."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty dataset spec")
        spec = cls(kind=parts[0])
        total = spec.n_train + spec.n_test
        split = spec.n_train
        keys = {"d": int, "k": int, "n": int, "seed": int, "split": int,
                "spread": float, "noise": float}
        for part in parts[1:]:
            key, _, value = part.partition("=")
            key = key.strip().lower()
            if key not in keys or not value:
                raise ValueError(f"bad dataset spec field {part!r}")
            parsed = keys[key](value)
            if key == "d":
                spec.dim = parsed
            elif key == "k":
                spec.classes = parsed
            elif key == "n":
                total = parsed
            elif key == "seed":
                spec.seed = parsed
            elif key == "split":
                split = parsed
            elif key == "spread":
                spec.spread = parsed
            elif key == "noise":
                spec.noise = parsed
        if not 0 < split < total:
            raise ValueError(f"split {split} must be inside (0, {total})")
        spec.n_train = split
        spec.n_test = total - split
        return spec


@dataclass
class ExperimentSpec:
    roster: tuple = DEFAULT_ROSTER
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    targets: tuple = (0.5, 0.6, 0.7, 0.8)
    seeds: tuple = (0, 1, 2, 3, 4)
    eps: float = 10.0
    delta: float = 1.0
    max_passes: int = 20
    eval_every: int = 20
    overshoot: float = 0.02
    top_k: int = 10
    max_inner_iters: int = 50
    clamp_input: bool = False
    outdir: str = "reports"

    def gen_config(self, seed: int, delta: float | None = None) -> GenConfig:
        return GenConfig(
            delta=self.delta if delta is None else delta,
            eps=self.eps,
            attack=AttackConfig(max_inner_iters=self.max_inner_iters,
                                overshoot=self.overshoot, top_k=self.top_k,
                                clamp_input=self.clamp_input),
            max_passes=self.max_passes,
            seed=seed,
            eval_every=self.eval_every,
        )

    def to_dict(self) -> dict:
        doc = {
            "roster": [list(entry) for entry in self.roster],
            "dataset": vars(self.dataset).copy(),
            "targets": list(self.targets),
            "seeds": list(self.seeds),
        }
        for key in ("eps", "delta", "max_passes", "eval_every", "overshoot",
                    "top_k", "max_inner_iters", "clamp_input", "outdir"):
            doc[key] = getattr(self, key)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        spec = cls()
        if "roster" in doc:
            spec.roster = tuple((str(a), int(s)) for a, s in doc["roster"])
        if "dataset" in doc:
            spec.dataset = DatasetSpec(**doc["dataset"])
        if "targets" in doc:
            spec.targets = tuple(float(t) for t in doc["targets"])
        if "seeds" in doc:
            spec.seeds = tuple(int(s) for s in doc["seeds"])
        for key in ("eps", "delta", "max_passes", "eval_every", "overshoot",
                    "top_k", "max_inner_iters", "clamp_input", "outdir"):
            if key in doc:
                setattr(spec, key, type(getattr(spec, key))(doc[key]))
        return spec

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise FormatError(f"unreadable experiment spec {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass
class TargetResult:
    """First trajectory point at or above one target rate; censored targets
    carry reached=False and infinite seconds/images."""

    target: float
    seconds: float
    images: float
    reached: bool


@dataclass
class RunRecord:
    algorithm: str
    model_id: str
    seed: int
    targets: list
    final_train_rate: float
    final_test_rate: float
    agg_l2: tuple = ()
    trajectory: tuple = ()

    def result_for(self, target: float) -> TargetResult:
        for res in self.targets:
            if res.target == target:
                return res
        raise KeyError(f"no result for target {target}")


@dataclass
class TransferMatrix:
    """Median held-out fooling rates per (source, victim, algorithm) cell.

    The diagonal is the white-box case; everything else is transfer.
    """

    model_ids: list
    cells: dict

    def cell(self, source: str, victim: str, algorithm: str) -> float:
        return self.cells[(source, victim, algorithm)]

    def increment(self, source: str, victim: str) -> float:
        return (self.cells[(source, victim, universal.FAST_UAP)]
                - self.cells[(source, victim, universal.UAP)])

    def row_mean(self, source: str, algorithm: str) -> float:
        return statistics.fmean(self.cells[(source, vic, algorithm)]
                                for vic in self.model_ids)

    def white_box(self, algorithm: str) -> dict:
        return {m: self.cells[(m, m, algorithm)] for m in self.model_ids}

    def mean_increment(self, *, diagonal: bool) -> float:
        values = [self.increment(s, v)
                  for s in self.model_ids for v in self.model_ids
                  if (s == v) == diagonal]
        return statistics.fmean(values)

    def to_rows(self) -> list:
        rows = []
        for src in self.model_ids:
            for vic in self.model_ids:
                for alg in ALGORITHMS:
                    rows.append((src, vic, alg, self.cells[(src, vic, alg)]))
        return rows


# ---------------------------------------------------------------------------
# Model preparation
# ---------------------------------------------------------------------------

def default_train_config(architecture, seed: int) -> models.TrainConfig:
    """Per-architecture SGD settings that reach high accuracy on the
    synthetic families.  The linear model needs large radial weights for the
    shell geometry, so it trains longer, faster, and without weight decay."""
    arch = models.parse_architecture(architecture)
    if arch["type"] == "linear":
        return models.TrainConfig(epochs=150, learning_rate=1.0,
                                  weight_decay=0.0, seed=seed)
    if arch["type"] == "conv":
        return models.TrainConfig(epochs=60, learning_rate=0.2, seed=seed)
    return models.TrainConfig(epochs=45, learning_rate=0.15, seed=seed)


def train_roster(spec: ExperimentSpec, train_set: models.Dataset) -> dict:
    """Build and train every roster model; keyed by model_id, roster order."""
    trained = {}
    for architecture, seed in spec.roster:
        model = models.build(architecture, spec.dataset.dim, spec.dataset.classes, seed)
        model = models.train(model, train_set, default_train_config(architecture, seed))
        trained[model.model_id] = model
    return trained


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _target_results(state: universal.PerturbationState, targets) -> list:
    out = []
    for target in targets:
        hit = next((pt for pt in state.trajectory if pt[2] >= target), None)
        if hit is None:
            out.append(TargetResult(target, float("inf"), float("inf"), False))
        else:
            out.append(TargetResult(target, float(hit[1]), float(hit[0]), True))
    return out


def run_speed_comparison(spec: ExperimentSpec, trained: dict | None = None,
                         progress=None) -> list:
    """One generation per (model, seed, algorithm), recording the first
    trajectory crossing of every target rate plus final train/test rates."""
    if not spec.roster:
        raise EmptyRoster("speed comparison needs at least one model")
    train_set, test_set = spec.dataset.build()
    if trained is None:
        trained = train_roster(spec, train_set)
    delta = max(spec.targets)
    records = []
    for model_id, model in trained.items():
        for seed in spec.seeds:
            for algorithm in ALGORITHMS:
                if progress:
                    progress(f"generate {algorithm} for {model_id} seed {seed}")
                cfg = spec.gen_config(seed, delta=delta)
                try:
                    state = universal.generate(model, train_set, cfg, algorithm)
                except NoProgress:
                    records.append(RunRecord(algorithm, model_id, seed,
                                             _target_results_empty(spec.targets),
                                             0.0, 0.0))
                    continue
                records.append(RunRecord(
                    algorithm, model_id, seed,
                    _target_results(state, spec.targets),
                    state.fooling_rate_train,
                    universal.fooling_rate(model, test_set, state.v, spec.clamp_input),
                    agg_l2=tuple(state.agg_l2),
                    trajectory=tuple(state.trajectory),
                ))
    return records


def _target_results_empty(targets) -> list:
    return [TargetResult(t, float("inf"), float("inf"), False) for t in targets]


def run_transfer_matrix(spec: ExperimentSpec, trained: dict | None = None,
                        progress=None) -> TransferMatrix:
    """Generate per (source model, algorithm, seed) at the spec's delta gate,
    then evaluate every perturbation against every victim on held-out data.
    Cells are medians over seeds."""
    if len(spec.roster) < 2:
        raise EmptyRoster("transfer experiments need a roster of at least 2 models")
    train_set, test_set = spec.dataset.build()
    if trained is None:
        trained = train_roster(spec, train_set)
    ids = list(trained)
    samples = {(src, vic, alg): [] for src in ids for vic in ids for alg in ALGORITHMS}
    for src_id, src_model in trained.items():
        for algorithm in ALGORITHMS:
            for seed in spec.seeds:
                if progress:
                    progress(f"generate {algorithm} for {src_id} seed {seed}")
                cfg = spec.gen_config(seed)
                state = universal.generate(src_model, train_set, cfg, algorithm)
                for vic_id, vic_model in trained.items():
                    rate = universal.fooling_rate(vic_model, test_set, state.v,
                                                  spec.clamp_input)
                    samples[(src_id, vic_id, algorithm)].append(rate)
    cells = {key: float(statistics.median(vals)) for key, vals in samples.items()}
    return TransferMatrix(ids, cells)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def write_speed_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPEED_HEADER)
        for rec in records:
            for res in rec.targets:
                writer.writerow([rec.algorithm, rec.model_id, rec.seed, res.target,
                                 res.seconds, res.images, res.reached])


def parse_speed_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SPEED_HEADER:
            raise FormatError(f"bad speed.csv header: {header}")
        return [(r[0], r[1], int(r[2]), float(r[3]), float(r[4]), float(r[5]),
                 r[6] == "True") for r in reader]


def write_transfer_csv(matrix: TransferMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRANSFER_HEADER)
        for row in matrix.to_rows():
            writer.writerow(row)


def parse_transfer_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRANSFER_HEADER:
            raise FormatError(f"bad transfer.csv header: {header}")
        return [(r[0], r[1], r[2], float(r[3])) for r in reader]


def _median_or_inf(values):
    return statistics.median(values) if values else float("inf")


def summarize(records, matrix, targets=()) -> str:
    """Human-readable digest: per-target medians by algorithm and model,
    then transfer means and the fast-uap minus uap increments."""
    lines = []
    if records:
        lines.append("speed comparison (medians over seeds)")
        model_ids = sorted({r.model_id for r in records})
        targets = targets or sorted({res.target for r in records for res in r.targets})
        for model_id in model_ids:
            for target in targets:
                parts = []
                for alg in ALGORITHMS:
                    secs = [res.seconds for r in records
                            if r.model_id == model_id and r.algorithm == alg
                            for res in r.targets if res.target == target]
                    imgs = [res.images for r in records
                            if r.model_id == model_id and r.algorithm == alg
                            for res in r.targets if res.target == target]
                    reached = sum(res.reached for r in records
                                  if r.model_id == model_id and r.algorithm == alg
                                  for res in r.targets if res.target == target)
                    parts.append(f"{alg}: {_median_or_inf(secs):.3g}s"
                                 f"/{_median_or_inf(imgs):.6g} images"
                                 f" ({reached} reached)")
                lines.append(f"  {model_id} target {target:.0%}: " + "; ".join(parts))
        lines.append("")
    if matrix is not None:
        lines.append("transfer matrix (held-out fooling rates, medians over seeds)")
        for alg in ALGORITHMS:
            wb = matrix.white_box(alg)
            lines.append(f"  {alg} white-box mean: "
                         f"{statistics.fmean(wb.values()):.4f}")
        lines.append(f"  white-box increment (fast-uap - uap): "
                     f"{matrix.mean_increment(diagonal=True):+.4f}")
        lines.append(f"  black-box increment (fast-uap - uap): "
                     f"{matrix.mean_increment(diagonal=False):+.4f}")
        for src in matrix.model_ids:
            cells = " ".join(
                f"{matrix.cell(src, vic, universal.UAP):.2f}/"
                f"{matrix.cell(src, vic, universal.FAST_UAP):.2f}"
                for vic in matrix.model_ids)
            lines.append(f"  {src}: {cells}")
    return "\n".join(lines) + "\n"


def emit_reports(records, matrix, outdir, figures: bool = True) -> list:
    """Write speed.csv, transfer.csv, summary.txt, and (optionally) the
    figure files into outdir; returns the written paths.

    records=None skips speed.csv entirely (so a matrix-only run does not
    clobber an earlier comparison in the same directory); an empty list
    writes a headers-only file.
    """
    import os
    os.makedirs(outdir, exist_ok=True)
    written = []
    if records is not None:
        speed_path = os.path.join(outdir, "speed.csv")
        write_speed_csv(records, speed_path)
        written.append(speed_path)
    if matrix is not None:
        transfer_path = os.path.join(outdir, "transfer.csv")
        write_transfer_csv(matrix, transfer_path)
        written.append(transfer_path)
    summary_path = os.path.join(outdir, "summary.txt")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(summarize(records or [], matrix))
    written.append(summary_path)
    if figures:
        from . import figures as figs
        written.extend(figs.render_report_figures(records or [], matrix, outdir))
    return written
