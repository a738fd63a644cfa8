"""Command-line front end: ``generate``, ``run``, ``oracle`` and ``sweep``.

Defaults: alpha 0.6, lambda 0.1, mu 1, offloading cost 1.0, beta sqrt(2),
exits 3,6,...,18,20 and ten seeds.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys
from pathlib import Path

import numpy as np

from .bandit import PolicyKind, run_policy
from .model import DEFAULT_EXITS, CostParams, ExitProfile, SplitSimError, Trace, ValidationError
from .oracle import per_arm_means
from .tracegen import GeneratorConfig, drift_trace, generate_trace
from .traceio import (
    format_csv,
    read_trace,
    summary_row,
    write_csv,
    write_report,
    write_trace,
)

METRICS = ("accuracy", "accuracy_delta_vs_final_pct", "cost", "cost_delta_vs_final_pct", "final_regret", "reward")


class UsageError(SplitSimError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _seeds(args) -> list[int]:
    """``--seeds N`` means seeds 0..N-1; ``--seeds 4,7`` lists them; ``--seed S`` pins one."""
    if args.seeds is not None:
        text = args.seeds.strip()
        seeds = list(range(int(text))) if "," not in text else _int_list(text)
    elif args.seed is not None:
        seeds = [args.seed]
    else:
        seeds = list(range(10))
    if not seeds:
        raise ValidationError("seed list must be non-empty")
    return seeds


def _params(args, offload: float | None = None) -> CostParams:
    return CostParams(
        alpha=args.alpha,
        mu=args.mu,
        offload_cost=args.offload if offload is None else offload,
        beta=args.beta,
    )


def _profile(args) -> ExitProfile:
    return ExitProfile(tuple(_int_list(args.exits)), args.lam)


def _gen_config(args, sigma: float, seed: int) -> GeneratorConfig:
    gain = _float_list(args.depth_gain)
    return GeneratorConfig(
        profile=_profile(args),
        n_samples=args.samples,
        sigma=sigma,
        base=args.base,
        depth_gain=gain[0] if len(gain) == 1 else tuple(gain),
        noise_penalty=args.noise_penalty,
        concentration=args.concentration,
        difficulty=args.difficulty,
        seed=seed,
    )


def _load(path) -> Trace:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"trace file not found: {path}")
    _, trace, _ = read_trace(path)
    return trace


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trace", help="trace file to replay instead of generating one")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--alpha", type=float, default=0.6, help="confidence threshold")
    p.add_argument("--beta", type=float, default=math.sqrt(2.0), help="UCB exploration weight (>= 1)")
    p.add_argument("--mu", type=float, default=1.0, help="cost-to-confidence conversion factor")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1, help="compute cost per layer")
    p.add_argument("--offload", type=float, default=1.0, help="offloading cost")
    p.add_argument("--exits", default=",".join(map(str, DEFAULT_EXITS)), help="comma list of exit layers")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seeds", default=None, help="seed count N (0..N-1) or comma list")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--sigma", type=float, default=0.0, help="distortion level of generated traces")
    p.add_argument("--policy", default="isplitee", help="isplitee | final | random | cascade")
    g = p.add_argument_group("generator shape")
    g.add_argument("--base", type=float, default=GeneratorConfig.base)
    g.add_argument("--depth-gain", default=str(GeneratorConfig.depth_gain),
                   help="scalar or comma list of per-exit increments")
    g.add_argument("--noise-penalty", type=float, default=GeneratorConfig.noise_penalty)
    g.add_argument("--concentration", type=float, default=GeneratorConfig.concentration)
    g.add_argument("--difficulty", type=float, default=GeneratorConfig.difficulty)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splitsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a synthetic trace file")
    _common(gen)
    gen.add_argument("--sigma-b", type=float, default=None, help="distortion after the switch point")
    gen.add_argument("--switch-at", type=int, default=None, help="index of the first drifted sample")

    run = sub.add_parser("run", help="run a policy over one or more seeds")
    _common(run)
    run.add_argument("--shuffle", action="store_true",
                     help="replay a trace file in a seed-dependent order")

    orc = sub.add_parser("oracle", help="per-arm expected reward and gaps of a trace")
    _common(orc)

    sweep = sub.add_parser("sweep", help="sigma x offload x policy grid")
    _common(sweep)
    sweep.add_argument("--sigmas", default="0,0.5,1,1.5,2,2.5,3")
    sweep.add_argument("--offloads", default="0.2,0.4,0.6,0.8,1.0")
    sweep.add_argument("--policies", default="isplitee,final,random,cascade")
    return parser


def cmd_generate(args) -> int:
    if not args.out:
        raise ValidationError("generate needs --out")
    seed = args.seed if args.seed is not None else 0
    config = _gen_config(args, args.sigma, seed)
    if args.sigma_b is not None or args.switch_at is not None:
        if args.sigma_b is None or args.switch_at is None:
            raise ValidationError("drift needs both --sigma-b and --switch-at")
        trace = drift_trace(config, _gen_config(args, args.sigma_b, seed), args.switch_at)
    else:
        trace = generate_trace(config)
    path = write_trace(trace, args.out)
    summary = {"path": str(path), "samples": len(trace), "exit_layers": list(trace.profile.exit_layers),
               "lambda": trace.profile.lam, **trace.metadata}
    print(json.dumps(summary, sort_keys=True))
    return 0


def aggregate(rows: list[dict], keys: dict | None = None) -> dict:
    """Seed-mean and sample standard deviation of every numeric summary metric."""
    out = dict(keys or {})
    out["policy"] = rows[0]["policy"]
    out["n_seeds"] = len(rows)
    names = list(METRICS) + sorted((k for k in rows[0] if k.startswith("pulls_")),
                                   key=lambda k: int(k.split("_", 1)[1]))
    for name in names:
        values = [float(r[name]) for r in rows]
        out[f"{name}_mean"] = statistics.fmean(values)
        out[f"{name}_std"] = statistics.stdev(values) if len(values) > 1 else 0.0
    return out


def _run_cell(policy: PolicyKind, traces: dict, params: CostParams, seeds: list[int],
              rounds_dir: Path | None = None, shuffle: bool = False) -> list[dict]:
    """Run ``policy`` once per seed. ``traces`` maps seed -> trace (shared traces allowed)."""
    rows = []
    oracles = {}
    for seed in seeds:
        trace = traces[seed]
        # per-arm means do not depend on sample order, so shuffled replays share them
        if id(trace) not in oracles:
            oracles[id(trace)] = per_arm_means(trace, trace.profile, params)
        oracle = oracles[id(trace)]
        if shuffle:
            order = np.random.default_rng(seed).permutation(len(trace))
            trace = Trace(trace.profile, trace.confidence[order], trace.correct[order], None, trace.metadata)
        report = run_policy(policy, trace, trace.profile, params, seed)
        if rounds_dir is not None:
            row = write_report(report, oracle, rounds_dir / f"rounds_{policy.value}_seed{seed}.csv")
        else:
            row = summary_row(report, oracle)
        rows.append(row)
    return rows


def _traces_for(args, sigma: float, seeds: list[int]) -> dict[int, Trace]:
    if args.trace:
        trace = _load(args.trace)
        return {s: trace for s in seeds}
    return {s: generate_trace(_gen_config(args, sigma, s)) for s in seeds}


def cmd_run(args) -> int:
    policy = PolicyKind.parse(args.policy)
    seeds = _seeds(args)
    params = _params(args)
    out = Path(args.out or "splitsim_run")
    out.mkdir(parents=True, exist_ok=True)
    traces = _traces_for(args, args.sigma, seeds)
    rows = _run_cell(policy, traces, params, seeds, out, args.shuffle)
    write_csv(rows, out / "summary.csv")
    agg = aggregate(rows)
    write_csv([agg], out / "aggregate.csv", list(agg))
    sys.stdout.write(format_csv([agg], list(agg)))
    return 0


def cmd_oracle(args) -> int:
    if args.trace:
        trace = _load(args.trace)
    else:
        trace = generate_trace(_gen_config(args, args.sigma, args.seed if args.seed is not None else 0))
    profile = trace.profile
    result = per_arm_means(trace, profile, _params(args))
    rows = [
        {"arm": arm, "gamma": profile.gamma(arm), "mean_reward": result.mean_reward[arm],
         "gap": result.gaps[arm], "best": arm == result.best_arm}
        for arm in profile.exit_layers
    ]
    columns = ["arm", "gamma", "mean_reward", "gap", "best"]
    if args.out:
        write_csv(rows, args.out, columns)
    sys.stdout.write(format_csv(rows, columns))
    return 0


def cmd_sweep(args) -> int:
    sigmas = _float_list(args.sigmas)
    offloads = _float_list(args.offloads)
    policies = [PolicyKind.parse(p) for p in args.policies.split(",") if p.strip()]
    if not sigmas or not offloads or not policies:
        raise ValidationError("sweep grid is empty")
    if args.trace:
        sigmas = [math.nan]
    seeds = _seeds(args)
    out_rows = []
    for sigma in sigmas:
        traces = _traces_for(args, sigma, seeds)
        for offload in offloads:
            params = _params(args, offload)
            for policy in policies:
                rows = _run_cell(policy, traces, params, seeds)
                keys = {"sigma": "" if args.trace else sigma, "offload": offload}
                out_rows.append(aggregate(rows, keys))
    columns = list(out_rows[0])
    if args.out:
        write_csv(out_rows, args.out, columns)
    sys.stdout.write(format_csv(out_rows, columns))
    return 0


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "oracle": cmd_oracle, "sweep": cmd_sweep}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (SplitSimError, ValueError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
