"""Command-line entry point: ``reachlearn <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, ExperimentConfig, load_config
from .seeding import stream

log = logging.getLogger("reachlearn")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INPUT, EXIT_EXISTS = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _config(args) -> ExperimentConfig:
    if args.config is None:
        return ExperimentConfig()
    if not Path(args.config).exists():
        raise CliError(EXIT_INPUT, f"config file not found: {args.config}")
    try:
        return load_config(args.config)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"bad config: {exc}") from exc


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = os.environ.get("REACHLEARN_OUT", cfg.output_dir)
        out = Path(root) / f"{args.command}-{cfg.hash()[:8]}"
    out.mkdir(parents=True, exist_ok=True)
    echo = out / f"config-{cfg.hash()[:8]}.json"
    if not echo.exists():
        io.atomic_write_text(echo, cfg.to_json())
    return out


def _fresh(path: Path) -> Path:
    if path.exists():
        raise CliError(EXIT_EXISTS, f"refusing to overwrite {path}")
    return path


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise CliError(EXIT_INPUT, f"missing input file: {path}")
    return path


def cmd_gen_data(args, cfg):
    from .pipeline import build_corpus

    n = args.n if args.n is not None else cfg.experiment.n_trajectories
    if n < 1:
        raise CliError(EXIT_CONFIG, "bad config: experiment.corpus_size: must be > 0")
    corpus = build_corpus(cfg, args.condition, args.seed, n)
    out = _out_dir(args, cfg)
    path = _fresh(out / f"corpus-{args.condition}-s{args.seed}.bin")
    io.save_corpus(path, corpus, cfg.hash())
    if args.csv:
        io.atomic_write_text(_fresh(path.with_suffix(".csv")), io.corpus_to_csv(corpus))
    print(path)


def cmd_train(args, cfg):
    from .pipeline import fit_model

    try:
        corpus = io.load_corpus(_require(args.corpus))
    except io.FormatError as exc:
        raise CliError(EXIT_INPUT, f"unreadable corpus: {exc}") from exc
    if len(corpus) == 0:
        raise CliError(EXIT_INPUT, "empty corpus")
    seed = corpus.seed if args.seed is None else args.seed
    model = fit_model(cfg, corpus, seed)
    out = _out_dir(args, cfg)
    tag = f"{corpus.condition}-s{seed}"
    ckpt = _fresh(out / f"model-{tag}.ckpt")
    io.save_checkpoint(ckpt, model, cfg.hash())
    prov = io.provenance_line(cfg.hash(), cfg.root_seed, condition=corpus.condition, seed=seed)
    rows = [{"epoch": i + 1, "loss": v} for i, v in enumerate(model.train_report_.loss_curve)]
    io.write_csv(_fresh(out / f"loss-{tag}.csv"), rows, ["epoch", "loss"], prov)
    print(f"{ckpt} final_error_cm={model.train_report_.final_error_cm:.4f}")


def cmd_test(args, cfg):
    from .pipeline import evaluate

    try:
        model = io.load_checkpoint(_require(args.checkpoint))
    except io.FormatError as exc:
        raise CliError(EXIT_INPUT, f"unreadable checkpoint: {exc}") from exc
    condition = model.metadata_.get("condition") or "unknown"
    seed = int(model.metadata_.get("seed", model.random_state))
    n_blocks = args.blocks if args.blocks is not None else cfg.experiment.n_blocks
    table = evaluate(cfg, {(condition, seed): model}, n_blocks)
    out = _out_dir(args, cfg)
    tag = f"{condition}-s{seed}"
    prov = io.provenance_line(cfg.hash(), cfg.root_seed, condition=condition, seed=seed)
    io.write_csv(_fresh(out / f"metrics-{tag}.csv"), table.rows, provenance=prov)
    traj_rows = []
    for keys, cursors in table.trajectories:
        row0 = next(r for r in table.rows if all(r[k] == v for k, v in keys.items()))
        for step, (x, y) in enumerate(cursors):
            traj_rows.append({**keys, "goal_x": row0["goal_x"], "goal_y": row0["goal_y"],
                              "step": step, "x": float(x), "y": float(y)})
    io.write_csv(_fresh(out / f"trajectories-{tag}.csv"), traj_rows, provenance=prov)
    err_rows = [
        {"condition": condition, "seed": seed, "walk": w, "step": s, "error": float(e)}
        for (_, _), errs in table.model_errors.items()
        for w, series in enumerate(errs) for s, e in enumerate(series)
    ]
    io.write_csv(_fresh(out / f"modelerr-{tag}.csv"), err_rows, provenance=prov)
    pen = np.mean([r["cumulative_penalty"] for r in table.rows])
    print(f"{out} mean_cumulative_penalty={pen:.3f}")


def cmd_baseline(args, cfg):
    from .experiment import bootstrap_ci
    from .pipeline import baseline

    n = args.episodes if args.episodes is not None else cfg.experiment.baseline_episodes
    mean, stderr, pens = baseline(cfg, n)
    _, lo, hi = bootstrap_ci(pens, cfg.experiment.bootstrap_resamples)
    out = _out_dir(args, cfg)
    io.write_json(_fresh(out / "baseline.json"), {
        "mean_cumulative_penalty": mean, "stderr": stderr, "ci_lo": lo, "ci_hi": hi,
        "episodes": n, "format_version": io.TABLE_VERSION, "config_hash": cfg.hash(),
        "root_seed": cfg.root_seed,
    })
    print(f"random policy mean cumulative penalty {mean:.3f} +/- {stderr:.3f}")


def cmd_report(args, cfg):
    from .report import build_report

    metric_rows, error_rows, traj_rows, baseline = [], [], [], None
    for d in args.inputs:
        d = _require(d)
        files = sorted(d.glob("*.csv")) if d.is_dir() else [d]
        for f in files:
            if f.name.startswith("metrics-"):
                metric_rows += io.read_csv(f)[0]
            elif f.name.startswith("modelerr-"):
                error_rows += io.read_csv(f)[0]
            elif f.name.startswith("trajectories-"):
                traj_rows += io.read_csv(f)[0]
        if d.is_dir() and (d / "baseline.json").exists():
            import json

            baseline = json.loads((d / "baseline.json").read_text())
    if not metric_rows:
        raise CliError(EXIT_INPUT, "no metrics-*.csv files found in inputs")
    tables, summary = build_report(metric_rows, error_rows, traj_rows, baseline,
                                   cfg.experiment.bootstrap_resamples, cfg.episode.max_steps)
    out = _out_dir(args, cfg)
    prov = io.provenance_line(cfg.hash(), cfg.root_seed)
    for name, rows in tables.items():
        io.write_csv(_fresh(out / f"{name}.csv"), rows, provenance=prov)
    summary.update(format_version=io.TABLE_VERSION, config_hash=cfg.hash(), root_seed=cfg.root_seed)
    io.write_json(_fresh(out / "summary.json"), summary)
    print(out)


def cmd_gradcheck(args, cfg):
    from .neural import finite_diff_check, random_instance

    worst = 0.0
    for i in range(args.instances):
        rng = stream(cfg.root_seed, "gradcheck", i)
        w, batch = random_instance(rng, hidden=args.hidden, steps=args.steps, n_seq=args.sequences)
        worst = max(worst, finite_diff_check(w, batch, step=args.step))
    print(f"{worst:.3e}")
    if worst >= 1e-4:
        raise CliError(EXIT_FAIL, f"gradient check failed: max relative error {worst:.3e}")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "test": cmd_test,
    "baseline": cmd_baseline,
    "report": cmd_report,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reachlearn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="experiment config (JSON); defaults apply when omitted")
        sp.add_argument("--out", help="output directory (default: $REACHLEARN_OUT or config.output_dir)")
        sp.add_argument("--threads", type=int, default=1, help="BLAS threads (1 = bit-exact mode)")
        return sp

    sp = add("gen-data", "write a random-walk training corpus")
    sp.add_argument("--condition", choices=["rot", "rotplus"], required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, help="trajectory count (default corpus_size * corpus_scale)")
    sp.add_argument("--csv", action="store_true", help="also export the corpus as CSV")

    sp = add("train", "fit a forward model to a corpus")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--seed", type=int, help="training seed (default: the corpus seed)")

    sp = add("test", "run frozen-weight test blocks")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--blocks", type=int)

    sp = add("baseline", "uniform random policy penalty")
    sp.add_argument("--episodes", type=int)

    sp = add("report", "aggregate test outputs into figure tables")
    sp.add_argument("inputs", nargs="+", help="directories or CSV files from `test`/`baseline`")

    sp = add("gradcheck", "finite-difference check of the BPTT gradients")
    sp.add_argument("--instances", type=int, default=20)
    sp.add_argument("--hidden", type=int, default=4)
    sp.add_argument("--steps", type=int, default=5)
    sp.add_argument("--sequences", type=int, default=2)
    sp.add_argument("--step", type=float, default=1e-5)
    return p


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"reachlearn {args.command}: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
