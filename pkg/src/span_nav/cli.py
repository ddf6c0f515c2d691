"""Command-line entry points.

Subcommands: fit, train, predict, simulate, evaluate, baseline.
Exit codes: 0 success, 2 usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import crowd, harness, occupancy, predictor
from .sp import BasisSpec, fit_weights


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="span-nav")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit trajectory weights to a recorded track")
    p_fit.add_argument("--input", required=True, help="CSV corpus (t,agent_id,x,y)")
    p_fit.add_argument("--agent", default=None, help="agent id (default: first)")
    p_fit.add_argument("--m", type=int, default=8)
    p_fit.add_argument("--gamma", type=float, default=0.01)
    p_fit.add_argument("--horizon", type=float, default=4.0)
    p_fit.add_argument("--lam", type=float, default=1e-4)
    p_fit.add_argument("--output", default=None, help="write report CSV here (default stdout)")

    p_train = sub.add_parser("train", help="train a predictor on a trajectory corpus")
    p_train.add_argument("--corpus", required=True)
    p_train.add_argument("--output", required=True, help="model file to write")
    p_train.add_argument("--loss-csv", default=None, help="per-epoch loss curve CSV")
    p_train.add_argument("--m", type=int, default=8)
    p_train.add_argument("--gamma", type=float, default=0.01)
    p_train.add_argument("--horizon", type=float, default=4.0)
    p_train.add_argument("--p", type=int, default=5)
    p_train.add_argument("--dt", type=float, default=0.1)
    p_train.add_argument("--lam", type=float, default=1e-4)
    p_train.add_argument("--hidden", type=int, nargs="+", default=[100, 100, 100])
    p_train.add_argument("--epochs", type=int, default=200)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--momentum", type=float, default=0.9)
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--grad-clip", type=float, default=10.0,
                         help="global gradient-norm clip (0 disables)")
    p_train.add_argument("--seed", type=int, default=0)

    p_pred = sub.add_parser("predict", help="query a trained model on one window")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--window", required=True, help="CSV of p rows x,y (oldest first)")
    p_pred.add_argument("--samples", type=int, default=0, help="sampled trajectories to append")
    p_pred.add_argument("--dt", type=float, default=0.1, help="output time step")
    p_pred.add_argument("--seed", type=int, default=0)
    p_pred.add_argument("--output", default=None)

    for name, help_text in (
        ("simulate", "run one scenario with the anticipatory controller"),
        ("baseline", "run one scenario with a baseline controller"),
    ):
        p_sim = sub.add_parser(name, help=help_text)
        p_sim.add_argument("--scenario", required=True)
        p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p_sim.add_argument("--output-dir", required=True)
        p_sim.add_argument("--plot-data", action="store_true", help="also write plot.csv")
        if name == "baseline":
            p_sim.add_argument("--mode", choices=["reactive"], default="reactive")

    p_eval = sub.add_parser("evaluate", help="recompute metrics from a saved log")
    p_eval.add_argument("--log", required=True)
    p_eval.add_argument("--map", default=None, help="occupancy map for static collision flags")
    p_eval.add_argument("--output", default=None, help="metrics JSON path (default stdout)")

    return parser


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_fit(args) -> int:
    tracks = crowd.load_tracks(args.input)
    if args.agent is not None:
        matching = [t for t in tracks if t.agent_id == args.agent]
        if not matching:
            raise ValueError(f"no agent {args.agent!r} in {args.input}")
        track = matching[0]
    else:
        track = tracks[0]
    basis = BasisSpec(m=args.m, horizon=args.horizon, gamma=args.gamma)
    times = track.times - track.times[0]
    W = fit_weights(times, track.points, basis, args.lam)
    lines = ["wx,wy"] + [f"{float(w[0])!r},{float(w[1])!r}" for w in W]
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _cmd_train(args) -> int:
    tracks = crowd.load_tracks(args.corpus)
    basis = BasisSpec(m=args.m, horizon=args.horizon, gamma=args.gamma)
    X, targets, skipped = predictor.build_dataset(
        [(t.times, t.points) for t in tracks], dt=args.dt, p=args.p, basis=basis, lam=args.lam
    )
    if skipped:
        print(f"skipped {skipped} tracks shorter than the window + horizon", file=sys.stderr)
    if X.shape[0] == 0:
        raise ValueError("corpus produced no training pairs")
    rng = np.random.default_rng(args.seed)
    model = predictor.PredictorModel(p=args.p, basis=basis, hidden=tuple(args.hidden), rng=rng)
    cfg = predictor.TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        epochs=args.epochs,
        grad_clip=args.grad_clip,
    )
    curve = predictor.train(model, X, targets, cfg, rng)
    predictor.save_model(model, args.output)
    if args.loss_csv:
        lines = ["epoch,mean_nll"] + [f"{i},{v!r}" for i, v in enumerate(curve)]
        Path(args.loss_csv).write_text("\n".join(lines) + "\n")
    print(f"trained on {X.shape[0]} pairs; final mean NLL {curve[-1]:.4f}" if curve else
          f"wrote initialized model ({X.shape[0]} pairs, 0 epochs)")
    return 0


def _cmd_predict(args) -> int:
    model = predictor.load_model(args.model)
    rows = []
    for lineno, line in enumerate(Path(args.window).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("x"):
            continue
        try:
            x, y = (float(tok) for tok in line.split(","))
        except ValueError:
            raise ValueError(f"{args.window}:{lineno}: expected 'x,y'") from None
        rows.append((x, y))
    window = np.asarray(rows)
    pred = predictor.predict(model, window)

    steps = int(round(model.basis.horizon / args.dt))
    ts = args.dt * np.arange(1, steps + 1)
    means = pred.mean_at(ts)
    covs = pred.cov_at(ts)
    samples = None
    if args.samples > 0:
        rng = np.random.default_rng(args.seed)
        samples = pred.sample_paths(rng, ts, size=args.samples)

    header = "t,mean_x,mean_y,cov_xx,cov_xy,cov_yy"
    if samples is not None:
        header += "," + ",".join(f"s{i}_x,s{i}_y" for i in range(args.samples))
    lines = [header]
    for i, t in enumerate(ts):
        row = [
            repr(float(t)),
            repr(float(means[i, 0])),
            repr(float(means[i, 1])),
            repr(float(covs[i, 0, 0])),
            repr(float(covs[i, 0, 1])),
            repr(float(covs[i, 1, 1])),
        ]
        if samples is not None:
            for s in range(args.samples):
                row += [repr(float(samples[s, i, 0])), repr(float(samples[s, i, 1]))]
        lines.append(",".join(row))
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _cmd_simulate(args, reactive: bool) -> int:
    scenario = harness.load_scenario(args.scenario, seed_override=args.seed)
    log = harness.run_scenario(scenario, reactive=reactive)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    scenario_hash = scenario.hash()
    harness.write_log(log, out / "log.csv", seed=scenario.seed, scenario_hash=scenario_hash)
    harness.write_timing(log, out / "timing.csv")
    result = harness.metrics(log, grid=scenario.grid)
    result["seed"] = scenario.seed
    result["scenario_hash"] = scenario_hash
    (out / "metrics.json").write_text(json.dumps(result, indent=2) + "\n")
    if args.plot_data:
        harness.write_plot_data(log, out / "plot.csv")
    print(f"{log.outcome}: {len(log.steps)} steps, metrics in {out / 'metrics.json'}")
    return 0


def _cmd_evaluate(args) -> int:
    log, meta = harness.read_log(args.log)
    grid = None
    map_ref = args.map or (log.map_path if log.map_path else None)
    if map_ref:
        map_path = Path(map_ref)
        if not map_path.is_absolute():
            candidate = Path(args.log).parent / map_path
            map_path = candidate if candidate.exists() else map_path
        if map_path.exists():
            grid = occupancy.load(map_path)
    result = harness.metrics(log, grid=grid)
    if "seed" in meta:
        result["seed"] = int(meta["seed"])
    if "scenario_hash" in meta:
        result["scenario_hash"] = meta["scenario_hash"]
    _emit(json.dumps(result, indent=2) + "\n", args.output)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "predict":
            return _cmd_predict(args)
        if args.command == "simulate":
            return _cmd_simulate(args, reactive=False)
        if args.command == "baseline":
            return _cmd_simulate(args, reactive=(args.mode == "reactive"))
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        raise AssertionError(f"unhandled command {args.command}")
    except Exception as exc:  # runtime failures map to exit code 3
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
