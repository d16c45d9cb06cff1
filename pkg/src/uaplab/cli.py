"""Command-line interface.

Subcommands: train, generate, evaluate, compare, matrix, selftest.  Every
run is reproducible from its flags; errors exit nonzero with a one-line
diagnostic on stderr.
"""

import argparse
import os
import sys

import numpy as np

from . import harness, models, universal
from .errors import UapLabError
from .harness import DatasetSpec, ExperimentSpec
from .universal import ALGORITHMS, GenConfig

DEFAULT_DATASET = "rings,d=64,k=10,n=3000,seed=11,split=2200"


def _add_dataset_flag(parser):
    parser.add_argument("--dataset", default=DEFAULT_DATASET,
                        help="dataset spec: kind,d=..,k=..,n=..,seed=..,split=.."
                             "[,spread=..][,noise=..] (default: %(default)s)")


def _add_gen_flags(parser):
    parser.add_argument("--eps", type=float, default=10.0,
                        help="l-inf budget for the perturbation (default 10)")
    parser.add_argument("--delta", type=float, default=None,
                        help="target fooling rate gate")
    parser.add_argument("--max-passes", type=int, default=20)
    parser.add_argument("--eval-every", type=int, default=20,
                        help="images between mid-pass fooling-rate checkpoints")
    parser.add_argument("--clamp-input", action="store_true",
                        help="clamp perturbed inputs back into [0, 255] before the model")


def _gen_config(args, delta_default: float) -> GenConfig:
    from .attacks import AttackConfig
    return GenConfig(
        delta=args.delta if args.delta is not None else delta_default,
        eps=args.eps,
        attack=AttackConfig(clamp_input=args.clamp_input),
        max_passes=args.max_passes,
        seed=args.seed,
        eval_every=args.eval_every,
    )


def _split_for(args, spec: DatasetSpec):
    train_set, test_set = spec.build()
    return {"train": train_set, "test": test_set}


def cmd_train(args) -> int:
    spec = DatasetSpec.from_string(args.dataset)
    train_set, _ = spec.build()
    model = models.build(args.arch, spec.dim, spec.classes, args.seed)
    cfg = harness.default_train_config(args.arch, args.seed)
    if args.epochs:
        cfg.epochs = args.epochs
    model = models.train(model, train_set, cfg)
    models.save(model, args.out)
    print(f"trained {model.model_id}: accuracy {model.train_accuracy:.4f} -> {args.out}")
    return 0


def cmd_generate(args) -> int:
    model = models.load(args.model)
    spec = DatasetSpec.from_string(args.dataset)
    train_set, _ = spec.build()
    cfg = _gen_config(args, delta_default=0.8)
    state = universal.generate(model, train_set, cfg, args.algorithm)
    os.makedirs(args.out, exist_ok=True)
    stem = f"{args.algorithm}_{model.model_id}_s{args.seed}".replace(":", "-")
    pert_path = os.path.join(args.out, stem + ".json")
    traj_path = os.path.join(args.out, stem + "_trajectory.csv")
    universal.save_perturbation(state, pert_path)
    universal.save_trajectory(state, traj_path)
    written = [pert_path, traj_path]
    if not args.no_figures:
        from . import figures
        written.append(figures.plot_generation(
            state, os.path.join(args.out, stem + ".png")))
    print(f"{args.algorithm} on {model.model_id}: train fooling rate "
          f"{state.fooling_rate_train:.4f} after {state.passes_completed} passes "
          f"({state.stop_reason}); wrote {', '.join(written)}")
    return 0


def cmd_evaluate(args) -> int:
    model = models.load(args.model)
    doc = universal.load_perturbation(args.perturbation)
    spec = DatasetSpec.from_string(args.dataset)
    data = _split_for(args, spec)[args.split]
    rate = universal.fooling_rate(model, data, doc["v"], args.clamp_input)
    print(f"fooling rate {rate:.4f} ({args.split} split, model {model.model_id}, "
          f"perturbation for {doc['model_id']} via {doc['algorithm']})")
    return 0


def _experiment_spec(args, delta: float) -> ExperimentSpec:
    if args.spec:
        spec = ExperimentSpec.load(args.spec)
        if args.out:
            spec.outdir = args.out
        return spec
    roster = tuple((arch, args.seed) for arch in args.arch) if args.arch \
        else harness.DEFAULT_ROSTER
    return ExperimentSpec(
        roster=roster,
        dataset=DatasetSpec.from_string(args.dataset),
        targets=tuple(float(t) for t in args.targets.split(",")),
        seeds=tuple(range(args.seed, args.seed + args.num_seeds)),
        eps=args.eps,
        delta=args.delta if args.delta is not None else delta,
        max_passes=args.max_passes,
        eval_every=args.eval_every,
        clamp_input=args.clamp_input,
        outdir=args.out or "reports",
    )


def _progress(message: str) -> None:
    print(f"  .. {message}", flush=True)


def cmd_compare(args) -> int:
    spec = _experiment_spec(args, delta=max(float(t) for t in args.targets.split(",")))
    records = harness.run_speed_comparison(spec, progress=_progress if args.verbose else None)
    written = harness.emit_reports(records, None, spec.outdir,
                                   figures=not args.no_figures)
    print(f"wrote {', '.join(written)}")
    return 0


def cmd_matrix(args) -> int:
    spec = _experiment_spec(args, delta=1.0)
    matrix = harness.run_transfer_matrix(spec, progress=_progress if args.verbose else None)
    written = harness.emit_reports(None, matrix, spec.outdir,
                                   figures=not args.no_figures)
    print(f"white-box increment {matrix.mean_increment(diagonal=True):+.4f}, "
          f"black-box increment {matrix.mean_increment(diagonal=False):+.4f}")
    print(f"wrote {', '.join(written)}")
    return 0


def cmd_selftest(args) -> int:
    failures = 0
    for name, fn in _selftests():
        try:
            fn()
            print(f"PASS {name}")
        except AssertionError as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
    if failures:
        print(f"{failures} selftest(s) failed")
        return 1
    print("all selftests passed")
    return 0


def _selftests():
    from . import attacks, numerics

    def aggregation_identity():
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = int(rng.integers(2, 256))
            a, b = rng.normal(size=d), rng.normal(size=d)
            lhs = numerics.aggregate_magnitude(a, b)
            rhs = numerics.l2_norm(a + b)
            assert abs(lhs - rhs) <= 1e-9 * (1.0 + rhs), f"{lhs} vs {rhs}"

    def clip_contract():
        rng = np.random.default_rng(1)
        for _ in range(50):
            v = rng.normal(scale=20, size=32)
            c = numerics.clip_linf(v, 10.0)
            assert numerics.linf_norm(c) <= 10.0
            assert np.array_equal(numerics.clip_linf(c, 10.0), c)

    def gradient_check():
        ds = models.make_synthetic_dataset("blobs", 36, 4, 200, seed=2)
        rng = np.random.default_rng(3)
        for arch in ("linear", "mlp:24", "conv:4"):
            m = models.train(models.build(arch, 36, 4, 0), ds,
                             models.TrainConfig(epochs=8, seed=0))
            for _ in range(5):
                x = ds.features[rng.integers(len(ds))] + rng.normal(size=36)
                k = int(rng.integers(4))
                g = m.class_gradients(x, [k])[0]
                h = 1e-4
                fd = np.array([(m.forward(x + h * e)[k] - m.forward(x - h * e)[k]) / (2 * h)
                               for e in np.eye(36)])
                denom = max(float(np.max(np.abs(fd))), 1e-9)
                assert np.max(np.abs(g - fd)) / denom < 1e-4, arch

    def closed_form_attack():
        from .attacks import AttackConfig, solve_min_norm
        rng = np.random.default_rng(4)
        for _ in range(10):
            m = models.build("linear", 8, 5, int(rng.integers(1000)))
            x = 127.5 + rng.normal(scale=20, size=8)
            jac = m.input_jacobian(x)
            logits = m.forward(x)
            c = int(np.argmax(logits))
            dists = [(logits[c] - logits[k]) / np.linalg.norm(jac[k] - jac[c])
                     for k in range(5) if k != c]
            out = solve_min_norm(m, x, np.zeros(8), AttackConfig())
            assert out.success
            want = 1.02 * min(dists)
            got = float(np.linalg.norm(out.delta))
            assert abs(got - want) <= 1e-6 * want, f"{got} vs {want}"

    def fooling_rate_oracle():
        ds = models.make_synthetic_dataset("blobs", 16, 3, 120, seed=5)
        m = models.train(models.build("mlp:16", 16, 3, 0), ds,
                         models.TrainConfig(epochs=5, seed=0))
        v = np.random.default_rng(6).normal(scale=4, size=16)
        loops = sum(m.predict(ds.features[i] + v) != m.predict(ds.features[i])
                    for i in range(len(ds))) / len(ds)
        assert universal.fooling_rate(m, ds, v) == loops
        assert universal.fooling_rate(m, ds, np.zeros(16)) == 0.0

    return [("aggregation magnitude identity", aggregation_identity),
            ("l-inf clip contract", clip_contract),
            ("input gradients vs finite differences", gradient_check),
            ("min-norm solver vs closed form", closed_form_attack),
            ("fooling rate vs counting loop", fooling_rate_oracle)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uaplab",
        description="universal perturbation workbench: train victims, generate "
                    "perturbations with the uap or fast-uap policy, and compare them")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="build, train, and save a classifier")
    p.add_argument("--arch", required=True, help="linear | mlp:H[xH2..] | conv:C")
    _add_dataset_flag(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None, help="override epoch count")
    p.add_argument("--out", required=True, help="model file path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("generate", help="run uap or fast-uap against a saved model")
    p.add_argument("--model", required=True)
    _add_dataset_flag(p)
    p.add_argument("--algorithm", choices=list(ALGORITHMS), default="fast-uap")
    p.add_argument("--seed", type=int, default=0)
    _add_gen_flags(p)
    p.add_argument("--out", default="reports", help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("evaluate", help="fooling rate of a saved perturbation")
    p.add_argument("--model", required=True)
    p.add_argument("--perturbation", required=True)
    _add_dataset_flag(p)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--clamp-input", action="store_true")
    p.set_defaults(fn=cmd_evaluate)

    for name, fn, help_text in (
            ("compare", cmd_compare, "speed/image-budget comparison over the roster"),
            ("matrix", cmd_matrix, "white-box/black-box transfer matrix")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--spec", default=None, help="experiment spec JSON (overrides flags)")
        _add_dataset_flag(p)
        p.add_argument("--arch", action="append", default=None,
                       help="roster architecture (repeatable; default: built-in roster)")
        p.add_argument("--targets", default="0.5,0.6,0.7,0.8")
        p.add_argument("--seed", type=int, default=0, help="first generation seed")
        p.add_argument("--num-seeds", type=int, default=5)
        _add_gen_flags(p)
        p.add_argument("--out", default=None, help="report directory (default reports)")
        p.add_argument("--no-figures", action="store_true")
        p.add_argument("--verbose", action="store_true")
        p.set_defaults(fn=fn)

    p = sub.add_parser("selftest", help="run the built-in invariant suite")
    p.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (UapLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
