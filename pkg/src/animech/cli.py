"""Command-line entry points tying the stack into reproducible workflows.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="animech",
        description="Planar animatronic character stack: identify, train, "
        "evaluate, ablate, export, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-thermal", help="identify thermal params from a CSV")
    p.add_argument("csv_in", help="columns: time_s, temperature_C, torque_Nm")
    p.add_argument("json_out")
    p.add_argument("--holdout", type=float, default=0.33, help="tail fraction")

    p = sub.add_parser("train", help="train a policy with the ES optimizer")
    _common_args(p)
    p.add_argument("--mode", choices=("standing", "walking"), default="standing")
    p.add_argument("--iterations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--episode-s", type=float)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("eval", help="evaluate a checkpoint (or print weights)")
    _common_args(p)
    p.add_argument("--checkpoint")
    p.add_argument("--episodes", type=int, default=3)
    p.add_argument("--horizon-s", type=float, default=10.0)
    p.add_argument("--show-weights", action="store_true")
    p.add_argument("--self-check", action="store_true")

    p = sub.add_parser("ablate", help="train and compare reward-term arms")
    _common_args(p)
    p.add_argument(
        "--toggle",
        action="append",
        choices=("thermal", "impact", "heel_toe"),
        help="repeatable; defaults to all",
    )
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--iterations", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("export", help="roll out a policy and export the trace")
    _common_args(p)
    p.add_argument("--checkpoint")
    p.add_argument("--mode", choices=("standing", "walking"))
    p.add_argument("--horizon-s", type=float, default=10.0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("serve", help="run the puppeteering service")
    _common_args(p)
    p.add_argument("--port", type=int, default=7845)
    p.add_argument("--ws-port", type=int, help="also serve a WebSocket bridge")
    p.add_argument("--checkpoint", action="append", default=[],
                   help="repeatable; standing and/or walking checkpoints")
    p.add_argument("--character")
    p.add_argument("--clips-dir", default="clips")
    p.add_argument("--as-fast-as-possible", action="store_true")
    p.add_argument("--max-ticks", type=int)

    p = sub.add_parser("plot", help="render SVG line plots from a trace CSV")
    p.add_argument("csv_in")
    p.add_argument("svg_out")
    p.add_argument("--columns", required=True, help="comma-separated y columns")
    p.add_argument("--x", default="time_s")
    p.add_argument("--title", default="")
    p.add_argument("--hline", action="append", default=[],
                   help="name=value reference lines, repeatable")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run-config JSON (strict keys)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def _load_run_config(args):
    from animech.config import ConfigError, load_config

    try:
        cfg = load_config(getattr(args, "config", None))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        raise SystemExit(EXIT_DATA)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
    if getattr(args, "character", None):
        cfg.character_path = args.character
    return cfg


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "fit-thermal":
        return cmd_fit_thermal(args)
    if cmd == "train":
        return cmd_train(args)
    if cmd == "eval":
        return cmd_eval(args)
    if cmd == "ablate":
        return cmd_ablate(args)
    if cmd == "export":
        return cmd_export(args)
    if cmd == "serve":
        return cmd_serve(args)
    if cmd == "plot":
        return cmd_plot(args)
    return EXIT_USAGE


# ---------------------------------------------------------------------------


def cmd_fit_thermal(args) -> int:
    from animech.thermal import UnidentifiableError, fit_thermal, simulate_temperature

    path = Path(args.csv_in)
    if not path.exists():
        print(f"error: no such file: {path}", file=sys.stderr)
        return EXIT_DATA
    times, temps, torques = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            print("error: empty CSV", file=sys.stderr)
            return EXIT_DATA
        required = ["time_s", "temperature_C", "torque_Nm"]
        try:
            cols = [header.index(c) for c in required]
        except ValueError as e:
            missing = [c for c in required if c not in header]
            print(f"error: missing column(s): {', '.join(missing)}", file=sys.stderr)
            return EXIT_DATA
        for ln, row in enumerate(reader, start=2):
            try:
                times.append(float(row[cols[0]]))
                temps.append(float(row[cols[1]]))
                torques.append(float(row[cols[2]]))
            except (ValueError, IndexError):
                print(f"error: malformed CSV at line {ln}", file=sys.stderr)
                return EXIT_DATA
    if len(times) < 2:
        print("error: need at least two samples", file=sys.stderr)
        return EXIT_DATA
    temps = np.array(temps)
    torques = np.array(torques)
    dt = float(np.median(np.diff(times)))

    split = int(len(temps) * (1.0 - args.holdout))
    try:
        fit = fit_thermal(temps[:split], torques[:split], dt)
    except (UnidentifiableError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    rollout = simulate_temperature(temps[split], torques[split:-1], fit.params, dt)
    mae = float(np.mean(np.abs(rollout - temps[split:])))
    doc = {
        "alpha": fit.params.alpha,
        "beta": fit.params.beta,
        "t_ambient": fit.params.t_ambient,
        "fit_residual_rms": fit.residual_rms,
        "holdout_mae_C": mae,
        "samples": len(temps),
        "dt_s": dt,
    }
    Path(args.json_out).write_text(json.dumps(doc, indent=2) + "\n")
    print(
        f"alpha={fit.params.alpha:.6g} beta={fit.params.beta:.6g} "
        f"t_ambient={fit.params.t_ambient:.4f}"
    )
    print(f"held-out tail ({args.holdout:.0%}) rollout MAE: {mae:.3f} C")
    return EXIT_OK


def cmd_train(args) -> int:
    from animech.optim import es
    from animech.optim.policy import save_checkpoint

    run = _load_run_config(args)
    extra = {}
    for key in ("iterations", "population", "workers"):
        if getattr(args, key, None) is not None:
            extra[key] = getattr(args, key)
    if args.episode_s is not None:
        extra["episode_s"] = args.episode_s
    cfg = run.train_config(args.mode, **extra)
    desc = run.character()
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = es.train(desc, cfg, out_dir=out)
    env = es.build_env(desc, cfg)
    ckpt = out / f"policy_{args.mode}.json"
    save_checkpoint(
        ckpt,
        result.policy,
        args.mode,
        env.observation_layout(),
        extra={"config_hash": run.config_hash(), "best_return": result.best_return},
    )
    curve_path = out / f"curve_{args.mode}.csv"
    with open(curve_path, "w", newline="") as fh:
        fh.write(f"# config_hash={run.config_hash()}\n")
        writer = csv.DictWriter(
            fh,
            fieldnames=["iteration", "mean_return", "eval_return", "best_return", "grad_norm"],
        )
        writer.writeheader()
        writer.writerows(result.curve)
    print(f"checkpoint: {ckpt}")
    print(f"learning curve: {curve_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from animech import rewards

    if args.show_weights:
        print(rewards.format_weight_table())
        return EXIT_OK
    run = _load_run_config(args)
    if args.self_check:
        failures = _self_check(run)
        if failures:
            for f in failures:
                print(f"INVARIANT FAIL: {f}", file=sys.stderr)
            return EXIT_INVARIANT
        print("self-check: all invariants hold")
        return EXIT_OK
    if not args.checkpoint:
        print("error: --checkpoint required (or --show-weights)", file=sys.stderr)
        return EXIT_USAGE
    from animech.optim import es
    from animech.optim.policy import load_checkpoint

    try:
        policy, doc = load_checkpoint(args.checkpoint)
    except (ValueError, KeyError) as e:
        print(f"error: bad checkpoint: {e}", file=sys.stderr)
        return EXIT_DATA
    run = _load_run_config(args)
    desc = run.character()
    cfg = run.train_config(doc["mode"])
    env = es.build_env(desc, cfg)
    if env.observation_layout() != doc["obs_layout"]:
        print("error: checkpoint observation layout does not match character",
              file=sys.stderr)
        return EXIT_DATA
    rows = []
    for ep in range(args.episodes):
        r = es.rollout(
            env,
            es._policy_act_fn(policy, policy.params),
            args.horizon_s,
            np.random.default_rng(run.seed + ep),
            training=False,
            sampler=es.CommandSampler(env, cfg, np.random.default_rng(run.seed + 1000 + ep)),
        )
        rows.append(r)
        print(
            f"episode {ep}: return {r.reward_sum:9.1f}  survival {r.survival_s:5.1f} s"
            f"  track {np.degrees(r.track_err):5.2f} deg  peak T {r.peak_temp:5.1f} C"
            f"  peak dv {r.peak_dv:.2f} m/s"
        )
    print(
        f"mean: return {np.mean([r.reward_sum for r in rows]):.1f}, "
        f"tracking {np.degrees(np.mean([r.track_err for r in rows])):.2f} deg"
    )
    return EXIT_OK


def _self_check(run) -> list[str]:
    """Fast invariant sweep used by `eval --self-check`."""
    from animech.core.character import validate_character
    from animech.core import rotations
    from animech.thermal import ThermalParams, feasible_gamma
    from animech.runtime.filters import lowpass_alpha

    failures = []
    desc = run.character()
    problems = validate_character(desc)
    if problems:
        failures += [f"character: {p}" for p in problems]
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = rng.normal(0, 1, 3)
        r = r / np.linalg.norm(r) * rng.uniform(0, 3.0)
        q = rotations.exp_map(r)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            failures.append("rotations: exp_map output not unit norm")
            break
    g = feasible_gamma(ThermalParams(0.038, 0.377, 43.94), 80.0, 85.0)
    if abs(g - 0.312056) > 1e-6:
        failures.append(f"thermal: feasible gamma {g} != 0.312056")
    a = lowpass_alpha(1.0 / 600.0, 37.5)
    if abs(a - 0.2820) > 1e-4:
        failures.append(f"runtime: low-pass coefficient {a} != 0.2820")
    return failures


def cmd_ablate(args) -> int:
    from animech.optim import ablate, es

    run = _load_run_config(args)
    desc = run.character()
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    toggles = args.toggle or ["thermal", "impact", "heel_toe"]
    seeds = tuple(int(s) for s in args.seeds.split(","))
    extra = {}
    if args.iterations is not None:
        extra["iterations"] = args.iterations
    if args.workers is not None:
        extra["workers"] = args.workers
    reports = []
    if "heel_toe" in toggles:
        reports.append(ablate.heel_toe_comparison(desc))
    if "thermal" in toggles:
        base = run.train_config("standing", **extra)
        reports.append(ablate.run_thermal_ablation(desc, base, seeds=seeds))
    if "impact" in toggles:
        base = run.train_config("walking", **extra)
        reports.append(ablate.run_impact_ablation(desc, base, seeds=seeds))
    ablate.write_report(out / "ablation_report.md", reports, run.config_hash())
    ablate.save_json(out / "ablation_report.json", reports, run.config_hash())
    print(f"report: {out / 'ablation_report.md'}")
    ok = all(r.get("majority", r.get("meets_1p5_amplitude", True)) for r in reports)
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_export(args) -> int:
    from animech.optim import es
    from animech.optim.policy import load_checkpoint
    from animech.optim.teacher import ReferenceController
    from animech.trace import TraceRecorder

    run = _load_run_config(args)
    desc = run.character()
    mode = args.mode or "standing"
    if args.checkpoint:
        try:
            policy, doc = load_checkpoint(args.checkpoint)
        except (ValueError, KeyError) as e:
            print(f"error: bad checkpoint: {e}", file=sys.stderr)
            return EXIT_DATA
        mode = doc["mode"]
        cfg = run.train_config(mode)
        env = es.build_env(desc, cfg)
        act = es._policy_act_fn(policy, policy.params)
    else:
        cfg = run.train_config(mode)
        env = es.build_env(desc, cfg)
        act = es.teacher_act_fn(ReferenceController(env))
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    recorder = TraceRecorder(env, run.config_hash())
    state = env.reset(np.random.default_rng(run.seed))
    obs = env.observe(state)
    sampler = es.CommandSampler(env, cfg, np.random.default_rng(run.seed + 1))
    steps = int(args.horizon_s / env.cfg.control_dt)
    for _ in range(steps):
        env.set_control(sampler.advance(env.cfg.control_dt))
        action = act(obs, state)
        result = env.step(state, action)
        recorder.record(result.state, action, result)
        state, obs = result.state, result.observation
        if result.terminated:
            break
    path = out / f"trace_{mode}.{args.format}"
    if args.format == "csv":
        recorder.write_csv(path)
    else:
        recorder.write_json(path)
    print(f"trace: {path} ({len(recorder.rows)} steps)")
    return EXIT_OK


def cmd_serve(args) -> int:
    from animech.optim import es
    from animech.optim.policy import load_checkpoint
    from animech.optim.teacher import ReferenceController
    from animech.runtime.clips import load_clip_directory
    from animech.runtime.server import RuntimeServer
    from animech.runtime.session import RuntimeSession

    run = _load_run_config(args)
    desc = run.character()
    env = es.build_env(desc, run.train_config("standing"))
    actors = {}
    for path in args.checkpoint:
        try:
            policy, doc = load_checkpoint(path)
        except (ValueError, KeyError) as e:
            print(f"error: bad checkpoint '{path}': {e}", file=sys.stderr)
            return EXIT_DATA
        actors[doc["mode"]] = es._policy_act_fn(policy, policy.params)
    teacher = es.teacher_act_fn(ReferenceController(env))
    for mode in ("standing", "walking"):
        if mode not in actors:
            actors[mode] = teacher
            print(f"note: no {mode} checkpoint, serving the reference controller")
    clips = load_clip_directory(args.clips_dir)
    session = RuntimeSession(env, actors, clips=clips, seed=run.seed)
    server = RuntimeServer(
        session,
        port=args.port,
        as_fast_as_possible=args.as_fast_as_possible,
        max_ticks=args.max_ticks,
        ws_port=args.ws_port,
    )
    print(f"serving on 127.0.0.1:{args.port} "
          f"({'as fast as possible' if args.as_fast_as_possible else 'real time'})")
    try:
        server.run()
    except KeyboardInterrupt:
        server.stop()
    return EXIT_OK


def cmd_plot(args) -> int:
    from animech.svgplot import line_plot
    from animech.trace import read_trace_csv

    path = Path(args.csv_in)
    if not path.exists():
        print(f"error: no such file: {path}", file=sys.stderr)
        return EXIT_DATA
    header, data, config_hash = read_trace_csv(path)
    if data.size == 0:
        print("error: empty trace", file=sys.stderr)
        return EXIT_DATA
    if args.x not in header:
        print(f"error: x column '{args.x}' not in CSV", file=sys.stderr)
        return EXIT_DATA
    x = data[:, header.index(args.x)]
    series = {}
    for col in args.columns.split(","):
        col = col.strip()
        if col not in header:
            print(f"error: column '{col}' not in CSV", file=sys.stderr)
            return EXIT_DATA
        series[col] = data[:, header.index(col)]
    hlines = {}
    for spec in args.hline:
        name, _, value = spec.partition("=")
        hlines[name] = float(value)
    line_plot(
        args.svg_out,
        x,
        series,
        title=args.title or f"{path.name} [{config_hash}]",
        x_label=args.x,
        hlines=hlines or None,
    )
    print(f"plot: {args.svg_out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
