"""Command-line front end: trajectories, budget sweeps, order studies.

Subcommands:

* ``run``           one spec, one seed; dumps the trajectory as CSV.
* ``sweep``         specs/presets x budget units x seeds; batch quality
                    metrics against the oracle's ground truth, CSV plus an
                    optional SVG of metric versus evaluation budget.
* ``convergence``   endpoint-error order study per sampler on the Gaussian
                    oracle.
* ``selfcheck``     run every property suite; exit 0 iff all pass.

All output is deterministic given the flags; ``--no-timing`` drops the one
wall-clock column so repeated sweeps are byte-identical.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from samplersched import selfcheck as selfcheck_mod
from samplersched.metrics import SampleBatch, batch_moments, fit_convergence_order, sliced_w2, w2_gaussian
from samplersched.oracle import DenoiserOracle, GmmSpec, exact_gaussian_ode_endpoint, gaussian_denoiser, gmm_denoiser, sample_gmm
from samplersched.rng import Purpose, derive_stream
from samplersched.samplers import SamplerKind, nfe_cost
from samplersched.scheduler import (
    PRESETS,
    ScheduleOptions,
    nfe_total,
    parse_schedule_spec,
    preset,
    run_scheduler,
    sample_batch,
)
from samplersched.svgplot import line_chart

RUN_CSV_COLUMNS = (
    "run_id", "spec_text", "seed", "dim", "oracle_label",
    "nfe", "metric_name", "metric_value", "wall_time_ms",
)

# Single-sampler budgets: steps per budget unit N so that every entry
# costs exactly 6N evaluations (without a terminal zero step).
SINGLE_SAMPLER_BUDGETS = {
    kind: 6 // nfe_cost(kind, False) for kind in SamplerKind
}


@dataclass(frozen=True)
class OracleConfig:
    oracle: DenoiserOracle
    label: str
    sigma_data: float | None = None
    gmm: GmmSpec | None = None


def parse_oracle(text: str) -> OracleConfig:
    kind, _, arg = text.partition(":")
    if kind == "gaussian":
        sigma_data = float(arg) if arg else 1.0
        return OracleConfig(gaussian_denoiser(sigma_data), text, sigma_data=sigma_data)
    if kind == "gmm":
        if not arg:
            raise argparse.ArgumentTypeError("gmm oracle needs a file path: gmm:PATH")
        spec = GmmSpec.from_file(arg)
        return OracleConfig(gmm_denoiser(spec), text, gmm=spec)
    raise argparse.ArgumentTypeError(
        f"unknown oracle {text!r}; expected gaussian:SIGMA_DATA or gmm:PATH"
    )


def parse_int_list(text: str) -> list[int]:
    """"1,2,3" or "0..31" (inclusive range)."""
    text = text.strip()
    m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or LO..HI, got {text!r}") from None


_TEMPLATE_STEP_RE = re.compile(r"(?<=:)\s*(\d*)N\b")


def instantiate_template(template: str, n: int) -> str:
    """Resolve step tokens like ``6N``/``N`` against the budget unit n."""

    def repl(m: re.Match) -> str:
        mult = int(m.group(1)) if m.group(1) else 1
        return str(mult * n)

    return _TEMPLATE_STEP_RE.sub(repl, template)


def schedule_options(args) -> ScheduleOptions:
    return ScheduleOptions(
        sigma_min=args.sigma_min,
        sigma_max=args.sigma_max,
        rho=args.rho,
        mode=args.schedule_mode,
        append_zero=args.terminal_zero,
    )


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


class _RunCsv:
    """Buffered RunRecord rows, emitted in deterministic order."""

    def __init__(self, with_timing: bool):
        self.with_timing = with_timing
        self.rows: list[list[str]] = []

    def add(self, spec_text, seed, dim, oracle_label, nfe, metric_name, metric_value, wall_ms):
        row = [
            spec_text, str(seed), str(dim), oracle_label, str(nfe),
            metric_name, repr(float(metric_value)),
        ]
        if self.with_timing:
            row.append(f"{wall_ms:.3f}")
        self.rows.append(row)

    def render(self) -> str:
        cols = RUN_CSV_COLUMNS if self.with_timing else RUN_CSV_COLUMNS[:-1]
        out = io.StringIO()
        out.write(",".join(cols) + "\n")
        for idx, row in enumerate(self.rows):
            out.write(",".join([f"{idx:05d}"] + row) + "\n")
        return out.getvalue()


def cmd_run(args) -> int:
    opts = schedule_options(args)
    if args.spec:
        spec = parse_schedule_spec(args.spec, opts)
    elif args.preset:
        spec = preset(args.preset, args.N, opts)
    else:
        print("error: run needs --spec or --preset", file=sys.stderr)
        return 2
    config = args.oracle
    start = time.perf_counter()
    traj = run_scheduler(spec, config.oracle, args.seed, args.dim, carry_history=args.carry_history)
    wall_ms = (time.perf_counter() - start) * 1e3
    _write_text(args.out, traj.to_csv())
    print(
        f"run spec={spec.text} seed={args.seed} dim={args.dim} oracle={config.label} "
        f"nfe={traj.nfe} wall_ms={wall_ms:.3f}",
        file=sys.stderr,
    )
    return 0


def _sweep_configs(args, opts: ScheduleOptions) -> list[tuple[str, str]]:
    """(label, spec template) pairs in the order they will be emitted."""
    configs: list[tuple[str, str]] = []
    for template in args.spec or []:
        configs.append((template, template))
    preset_names: list[str] = []
    for name in args.preset or []:
        preset_names.extend(sorted(PRESETS) if name == "all" else [name])
    for name in preset_names:
        spec = preset(name, 1, opts)
        template = "+".join(
            f"{seg.kind.value}:{seg.steps}N" for seg in spec.segments
        )
        configs.append((name, template))
    if args.singles:
        for kind in SamplerKind:
            configs.append((kind.value, f"{kind.value}:{SINGLE_SAMPLER_BUDGETS[kind]}N"))
    if not configs:
        raise ValueError("sweep needs --spec, --preset, or --singles")
    return configs


def cmd_sweep(args) -> int:
    opts = schedule_options(args)
    config = args.oracle
    configs = _sweep_configs(args, opts)
    seeds = args.seeds
    n_values = args.N

    truth: SampleBatch | None = None
    if config.gmm is not None:
        truth_stream = derive_stream(args.truth_seed, Purpose.INIT_NOISE, 0)
        truth = SampleBatch(sample_gmm(config.gmm, args.samples, truth_stream))

    tasks = [
        (ci, ni, si)
        for ci in range(len(configs))
        for ni in range(len(n_values))
        for si in range(len(seeds))
    ]

    def execute(task):
        ci, ni, si = task
        label, template = configs[ci]
        spec = parse_schedule_spec(instantiate_template(template, n_values[ni]), opts)
        seed = seeds[si]
        start = time.perf_counter()
        final = sample_batch(
            spec, config.oracle, seed, args.dim, args.samples, carry_history=args.carry_history
        )
        batch = SampleBatch(final, seed_range=str(seed))
        if truth is not None:
            value = sliced_w2(batch, truth, args.projections, args.metric_seed)
            metric = "sliced_w2_vs_truth"
        else:
            mean, std = batch_moments(batch)
            value = w2_gaussian(mean, float(np.mean(std)), np.zeros(args.dim), config.sigma_data)
            metric = "w2_gaussian_vs_truth"
        wall_ms = (time.perf_counter() - start) * 1e3
        return task, spec.text, metric, value, nfe_total(spec), wall_ms

    results = {}
    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for task, *rest in pool.map(execute, tasks):
                results[task] = rest
    else:
        for task in tasks:
            task, *rest = execute(task)
            results[task] = rest

    csv = _RunCsv(with_timing=not args.no_timing)
    series: dict[str, dict[int, list[float]]] = {}
    for task in tasks:
        spec_text, metric, value, nfe, wall_ms = results[task]
        ci, ni, si = task
        csv.add(spec_text, seeds[si], args.dim, config.label, nfe, metric, value, wall_ms)
        series.setdefault(configs[ci][0], {}).setdefault(nfe, []).append(value)

    _write_text(args.out, csv.render())
    if args.svg:
        chart = [
            (label, [(nfe, float(np.mean(vals))) for nfe, vals in sorted(by_nfe.items())])
            for label, by_nfe in series.items()
        ]
        Path(args.svg).write_text(
            line_chart(
                chart,
                title="sample quality vs evaluation budget",
                x_label="denoiser evaluations (NFE)",
                y_label=("sliced W2" if truth is not None else "Gaussian W2"),
                log_y=True,
            )
        )
    return 0


def cmd_convergence(args) -> int:
    opts = schedule_options(args)
    if opts.append_zero:
        print("error: convergence study needs a positive final level", file=sys.stderr)
        return 2
    oracle_cfg = args.oracle
    if oracle_cfg.sigma_data is None:
        print("error: convergence study needs the gaussian oracle", file=sys.stderr)
        return 2
    kinds = [SamplerKind.from_name(name) for name in args.samplers.split(",") if name.strip()]
    csv = _RunCsv(with_timing=not args.no_timing)
    series = []
    for kind in kinds:
        errors = []
        for n in args.steps:
            spec = parse_schedule_spec(f"{kind.value}:{n}", opts)
            start = time.perf_counter()
            traj = run_scheduler(spec, oracle_cfg.oracle, args.seed, args.dim)
            exact = exact_gaussian_ode_endpoint(
                traj.states[0].x, opts.sigma_max, opts.sigma_min, oracle_cfg.sigma_data
            )
            err = float(np.linalg.norm(traj.final_x - exact) / np.linalg.norm(exact))
            wall_ms = (time.perf_counter() - start) * 1e3
            errors.append(err)
            csv.add(
                spec.text, args.seed, args.dim, oracle_cfg.label, traj.nfe,
                "endpoint_rel_error", err, wall_ms,
            )
        order = fit_convergence_order(args.steps, errors)
        csv.add(
            f"{kind.value}:*", args.seed, args.dim, oracle_cfg.label,
            0, "convergence_order", order, 0.0,
        )
        series.append((kind.value, [(float(n), e) for n, e in zip(args.steps, errors)]))
        print(f"{kind.value}: order {order:.3f}", file=sys.stderr)
    _write_text(args.out, csv.render())
    if args.svg:
        Path(args.svg).write_text(
            line_chart(
                series,
                title="endpoint error vs step count",
                x_label="steps",
                y_label="relative error",
                log_x=True,
                log_y=True,
            )
        )
    return 0


def cmd_selfcheck(args) -> int:
    results = selfcheck_mod.run_all()
    failed = 0
    for r in results:
        print(f"[{'PASS' if r.ok else 'FAIL'}] {r.name}: {r.detail}")
        failed += 0 if r.ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _common_parent() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--dim", type=int, default=2, help="state dimension")
    common.add_argument(
        "--oracle", type=parse_oracle, default=parse_oracle("gaussian:1.0"),
        help="gaussian:SIGMA_DATA or gmm:PATH (default gaussian:1.0)",
    )
    common.add_argument("--out", default=None, help="output CSV path (default stdout)")
    common.add_argument(
        "--no-timing", action="store_true",
        help="omit the wall_time_ms column for byte-identical reruns",
    )
    return common


def _sched_parent(sigma_min: float = 0.002, sigma_max: float = 80.0) -> argparse.ArgumentParser:
    sched = argparse.ArgumentParser(add_help=False)
    sched.add_argument("--sigma-min", type=float, default=sigma_min)
    sched.add_argument("--sigma-max", type=float, default=sigma_max)
    sched.add_argument("--rho", type=float, default=7.0)
    sched.add_argument("--schedule-mode", choices=("regenerate", "slice"), default="regenerate")
    sched.add_argument(
        "--terminal-zero", action="store_true",
        help="append a final exact-0 level (one extra contraction step)",
    )
    sched.add_argument(
        "--carry-history", action="store_true",
        help="keep multistep history across segment boundaries",
    )
    return sched


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samplersched",
        description="Sampler update rules, sampler scheduling, and oracle-based checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run", parents=[_common_parent(), _sched_parent()], help="run one trajectory"
    )
    p_run.add_argument("--spec", help='schedule spec, e.g. "heun:10+dpmpp2m:20"')
    p_run.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
    p_run.add_argument("--N", type=int, default=1, help="preset budget unit")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser(
        "sweep",
        parents=[_common_parent(), _sched_parent()],
        help="specs x budgets x seeds quality grid",
    )
    p_sweep.add_argument(
        "--spec", action="append",
        help='spec template; step counts may use N, e.g. "euler:6N" (repeatable)',
    )
    p_sweep.add_argument(
        "--preset", action="append",
        help='preset name or "all" (repeatable)',
    )
    p_sweep.add_argument(
        "--singles", action="store_true",
        help="include all nine single samplers at the 6N budget",
    )
    p_sweep.add_argument("--N", type=parse_int_list, default=[4], help='budget units, "1,2,3"')
    p_sweep.add_argument("--seeds", type=parse_int_list, default=[0], help='"0..31" or "0,1,2"')
    p_sweep.add_argument("--samples", type=int, default=10_000, help="samples per (spec, N, seed)")
    p_sweep.add_argument("--projections", type=int, default=64, help="sliced-W2 directions")
    p_sweep.add_argument("--metric-seed", type=int, default=0)
    p_sweep.add_argument("--truth-seed", type=int, default=999_983)
    p_sweep.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    p_sweep.add_argument("--svg", default=None, help="write metric-vs-NFE chart here")
    p_sweep.set_defaults(func=cmd_sweep)

    p_conv = sub.add_parser(
        "convergence",
        parents=[_common_parent(), _sched_parent(sigma_min=0.1, sigma_max=10.0)],
        help="order study on the Gaussian oracle",
    )
    p_conv.add_argument(
        "--samplers", default="euler,heun,dpm2,dpmpp2m", help="comma-separated sampler names"
    )
    p_conv.add_argument("--steps", type=parse_int_list, default=[8, 16, 32, 64, 128, 256])
    p_conv.add_argument("--svg", default=None, help="write log-log error chart here")
    p_conv.set_defaults(func=cmd_convergence)

    p_check = sub.add_parser("selfcheck", help="run all property suites")
    p_check.set_defaults(func=cmd_selfcheck)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
