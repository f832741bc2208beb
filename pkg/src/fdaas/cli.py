"""Command-line entry point: ``fdaas <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

STRATEGY_NAMES = {"none": "None", "ins": "INS", "ens": "ENS", "ros": "ROS", "smote": "SMOTE", "gan": "GAN"}


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _print_table(title: str, table: dict[str, dict[str, float | None]]) -> None:
    strategies = list(dict.fromkeys(s for row in table.values() for s in row))
    print(f"# {title}")
    print("\t".join(["architecture", *strategies]))
    for arch, row in table.items():
        cells = ["" if row.get(s) is None else f"{100 * row[s]:.2f}" for s in strategies]
        print("\t".join([arch, *cells]))


def cmd_simulate(args) -> int:
    from .simulator import generate_dataset, save_sessions

    sessions = generate_dataset(args.participants, args.seed, args.difficulty)
    manifest = save_sessions(sessions, args.out)
    print(manifest)
    return 0


def cmd_preprocess(args) -> int:
    from .preprocessing import apply_standardizer, fit_standardizer, stratified_split, windows_from_sessions
    from .simulator import load_sessions

    windows = windows_from_sessions(load_sessions(args.manifest))
    split = stratified_split(windows, args.train_fraction, args.seed)
    stats = fit_standardizer(split.train)
    out = Path(args.out)
    apply_standardizer(stats, split.train).save(out / "train")
    apply_standardizer(stats, split.test).save(out / "test")
    _write_json(out / "stats.json", stats.to_dict())
    print(f"train {split.train.counts()}\ttest {split.test.counts()}")
    return 0


def apply_strategy(train_set, strategy: str, seed: int, beta: float = 0.9999, gamma: float = 2.0,
                   gan_epochs: int = 150, out: Path | None = None):
    """Balanced training windows or loss weights for one strategy; returns (windows, meta)."""
    from .imbalance import EnsConfig, GanConfig, augment_to_balance, ens_weights, ins_weights, train_ts_generator
    from .metrics import avg_cosine_similarity
    from .preprocessing import FALL

    meta: dict = {"strategy": strategy, "seed": seed, "class_weights": None}
    if strategy == "INS":
        meta["class_weights"] = ins_weights(train_set.counts()).to_dict()
    elif strategy == "ENS":
        meta["class_weights"] = ens_weights(train_set.counts(), EnsConfig(beta, gamma)).to_dict()
    elif strategy == "GAN":
        falls = train_set.X[train_set.y == FALL]
        generator = train_ts_generator(falls, GanConfig(epochs=gan_epochs, seed=seed))
        if out is not None:
            generator.save(out / "generator.pt")
        synth = generator.sample(len(falls), seed=seed + 1)
        meta["gan_fidelity"] = avg_cosine_similarity(generator.scale_in(falls), generator.scale_in(synth), seed=seed)
        train_set = augment_to_balance(train_set, "GAN", seed=seed, generator=generator)
    elif strategy in ("ROS", "SMOTE"):
        train_set = augment_to_balance(train_set, strategy, seed=seed)
    if meta["class_weights"] is not None:
        meta["gamma"] = gamma
    return train_set, meta


def cmd_augment(args) -> int:
    from .preprocessing import WindowSet

    src, out = Path(args.inp), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_set, meta = apply_strategy(WindowSet.load(src / "train"), STRATEGY_NAMES[args.strategy], args.seed,
                                     args.beta, args.gamma, args.gan_epochs, out)
    train_set.save(out / "train")
    if src.resolve() != out.resolve():
        for name in ("test.npz", "test.json", "stats.json"):
            shutil.copyfile(src / name, out / name)
    _write_json(out / "augment.json", meta)
    fidelity = f"\tfidelity {meta['gan_fidelity']:.4f}" if "gan_fidelity" in meta else ""
    print(f"{meta['strategy']}\ttrain {train_set.counts()}{fidelity}")
    return 0


def cmd_train(args) -> int:
    from .imbalance import ClassWeights
    from .models import TrainConfig, build_model, save_detector, train
    from .preprocessing import StandardizationStats, WindowSet

    src = Path(args.data)
    strategy = STRATEGY_NAMES[args.augment]
    train_set = WindowSet.load(src / "train")
    if (src / "augment.json").exists():
        meta = json.loads((src / "augment.json").read_text())
        if meta["strategy"] != strategy:
            print(f"error: {src} holds {meta['strategy']} data, not {strategy}", file=sys.stderr)
            return 2
    else:
        train_set, meta = apply_strategy(train_set, strategy, args.seed)
    weights = ClassWeights.from_dict(meta["class_weights"]) if meta.get("class_weights") else None
    cfg = TrainConfig(
        batch_size=args.batch_size,
        weight_decay=args.weight_decay,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        class_weights=weights,
        gamma=meta.get("gamma") if weights else None,
    )
    stats = StandardizationStats.from_dict(json.loads((src / "stats.json").read_text()))
    detector = train(build_model(args.arch, seed=args.seed), train_set, cfg, stats, args.arch)
    out = Path(args.out or src / f"{args.arch}__{strategy}.pt")
    save_detector(detector, out)
    print(f"{out}\tfinal loss {detector.history[-1]:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    from .metrics import MetricsReport
    from .models import load_detector, predict
    from .preprocessing import WindowSet

    detector = load_detector(args.detector)
    test_stem = Path(args.test)
    if test_stem.is_dir():
        test_stem = test_stem / "test"
    test = WindowSet.load(test_stem)
    report = MetricsReport.from_labels(test.y, predict(detector, test), detector.architecture, args.strategy or "")
    if args.report:
        _write_json(Path(args.report), report.to_dict())
    print("metric\tvalue")
    for k in ("sensitivity", "specificity", "f1", "balanced_accuracy", "precision", "f1_pr"):
        v = getattr(report, k)
        print(f"{k}\t{'' if v is None else f'{v:.6f}'}")
    return 0


def _collect_runs(runs: Path) -> dict[str, dict[str, dict]]:
    cells: dict[str, dict[str, dict]] = {}
    for p in sorted(runs.glob("*.json")):
        d = json.loads(p.read_text())
        if "confusion" not in d:
            continue
        cells.setdefault(d.get("architecture") or p.stem, {})[d.get("strategy") or "?"] = d
    return cells


def cmd_report(args) -> int:
    from .plotting import plot_grid_bars, plot_grid_heatmap, plot_projection

    cells = _collect_runs(Path(args.runs))
    if not cells:
        print(f"no run reports in {args.runs}", file=sys.stderr)
        return 1
    tables = {
        metric: {a: {s: r.get(metric) for s, r in row.items()} for a, row in cells.items()}
        for metric in ("balanced_accuracy", "f1")
    }
    out = Path(args.out)
    _write_json(out, tables)
    _print_table("balanced accuracy (%)", tables["balanced_accuracy"])
    _print_table("F1, harmonic mean of sensitivity and specificity (%)", tables["f1"])
    fig_dir = Path(args.figures or out.parent)
    figures = [
        plot_grid_bars(tables["balanced_accuracy"], fig_dir / "balanced_accuracy.png", "Balanced accuracy"),
        plot_grid_bars(tables["f1"], fig_dir / "f1.png", "F1"),
        plot_grid_heatmap(tables["f1"], fig_dir / "f1_heatmap.png", "F1 (%)"),
    ]
    if args.gan:
        from .imbalance import GeneratorArtifact
        from .preprocessing import FALL, WindowSet

        gan_dir = Path(args.gan)
        gen = GeneratorArtifact.load(gan_dir / "generator.pt")
        train_set = WindowSet.load(gan_dir / "train")
        real = train_set.X[(train_set.y == FALL) & ~train_set.synthetic]
        synth = gen.sample(len(real), seed=args.seed)
        for method in ("PCA", "tSNE"):
            figures.append(plot_projection(gen.scale_in(real), gen.scale_in(synth),
                                           fig_dir / f"projection_{method.lower()}.png", method, args.seed))
    for f in figures:
        print(f"figure\t{f}")
    return 0


def cmd_grid(args) -> int:
    from .experiment import GridConfig, directional_check, run_grid

    overrides = json.loads(args.config) if args.config else {}
    cfg = GridConfig(**overrides)
    out = Path(args.out)
    result = run_grid(cfg, out_dir=out / "runs")
    result.save(out / "grid.json")
    _print_table("F1 (%)", result.table("f1"))
    check = directional_check(result)
    print(f"gan_fidelity\t{result.gan_fidelity:.4f}" if result.gan_fidelity is not None else "gan_fidelity\t")
    print(f"directional_check\t{'pass' if check['passed'] else 'fail'}")
    return 0


def cmd_serve(args) -> int:
    from .service import run_service

    metrics = run_service(args.config)
    print(json.dumps({k: v for k, v in metrics.items() if k != "alert_latencies"}, sort_keys=True))
    return 0


def cmd_replay(args) -> int:
    from .service import ServiceConfig, run_service

    cfg = ServiceConfig.load(args.config)
    cfg.input = {"type": "file", "path": str(Path(args.session)), "rate": args.rate}
    metrics = run_service(cfg)
    print(json.dumps({k: v for k, v in metrics.items() if k != "alert_latencies"}, sort_keys=True))
    return 0


def cmd_select(args) -> int:
    from .core import ResidentContext
    from .prompt import select_model, selection_table

    if args.table:
        print("age_group\thealth_condition\tresource_availability\tarchitecture")
        for row in selection_table():
            print(f"{row['age_group']}\t{row['health_condition']}\t{row['resource_availability']}\t{row['architecture']}")
        return 0
    if not (args.age_group and args.health_condition and args.resources):
        print("select needs --age-group, --health-condition and --resources (or --table)", file=sys.stderr)
        return 2
    decision = select_model(ResidentContext(args.age_group, args.health_condition, args.resources))
    print(f"{decision.architecture}\t{decision.rationale}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdaas", description="Radar fall detection: data, training and edge service.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate annotated radar sessions")
    s.add_argument("--participants", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--difficulty", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("preprocess", help="window, split and standardize a session manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--train-fraction", type=float, default=0.8)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("augment", help="apply an imbalance strategy to the training split")
    s.add_argument("--strategy", choices=sorted(STRATEGY_NAMES), required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--beta", type=float, default=0.9999)
    s.add_argument("--gamma", type=float, default=2.0)
    s.add_argument("--gan-epochs", type=int, default=150)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("train", help="train a detector on an augmented split")
    s.add_argument("--arch", choices=["FCN", "ResNet", "LSTM", "InceptionTime"], required=True)
    s.add_argument("--augment", choices=sorted(STRATEGY_NAMES), default="none")
    s.add_argument("--data", required=True, help="directory written by 'preprocess' or 'augment'")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--lr", type=float, default=1e-5)
    s.add_argument("--batch-size", type=int, default=64)
    s.add_argument("--weight-decay", type=float, default=1e-4)
    s.add_argument("--out")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a detector on a test split")
    s.add_argument("--detector", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--report")
    s.add_argument("--strategy", help="label recorded in the report")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="tabulate run reports and render figures")
    s.add_argument("--runs", required=True)
    s.add_argument("--out", required=True, help="tables JSON path")
    s.add_argument("--figures", help="figure directory (default: next to --out)")
    s.add_argument("--gan", help="augment directory holding generator.pt, for projection plots")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("grid", help="run the architecture x strategy grid")
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="JSON object overriding grid settings")
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("serve", help="run the edge service")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("replay", help="replay a record file through the service")
    s.add_argument("--session", required=True)
    s.add_argument("--rate", type=float, default=1.0, help="speed-up factor; 0 replays unpaced")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("select", help="show which detector a resident context gets")
    s.add_argument("--age-group", choices=["Elderly80Plus", "Other"])
    s.add_argument("--health-condition", choices=["Critical", "Stable"])
    s.add_argument("--resources", choices=["Limited", "Ample"])
    s.add_argument("--table", action="store_true", help="print every context")
    s.set_defaults(func=cmd_select)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .errors import FdaasError

    try:
        return args.func(args)
    except (FdaasError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
