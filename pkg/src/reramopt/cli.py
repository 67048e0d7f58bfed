"""Command-line campaign runner and utilities.

Subcommands: run, evaluate, train-one, noise-hist, hv, emit-defaults.
Every artifact embeds the effective config hash and seed on its first
line; rerunning with the same (config, seed) pair reproduces the bytes
exactly. Measured wall/CPU times are deliberately kept out of the run
artifacts for that reason (train-one, a measurement utility, is the one
exception). CSVs are UTF-8 with LF endings and shortest round-trip float
formatting.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .crossbar import NoiseSpec
from .design_space import ReramDesign
from .mesmo import Budget, CampaignResult, TraceRow, run_cf_mesmo, run_mesmo, run_random
from .noise import NoiseContext, prog_sigma, rtn_amplitude, shot_sigma, thermal_sigma
from .objectives import MooProblem
from .pareto import FrontSet, dominated_hypervolume, hypervolume, nsga2
from .resna import epochs_for_fidelity, infer, make_dataset, train

_TAG_NSGA_EVAL = 23


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _design_fields(space, x: np.ndarray) -> list:
    d = space.decode(x)
    return [d.res_cell, d.freq_hz, d.temperature_k, d.xbar_size]


def _trace_csv(result: CampaignResult, problem: MooProblem, space, hash_: str) -> list[str]:
    k = problem.n_obj
    d = problem.dim
    cols = ["iteration", "phase"]
    cols += [f"x{i}" for i in range(d)]
    if space is not None:
        cols += ["res_cell", "freq_hz", "temperature_k", "xbar_size"]
    cols += [f"z{j + 1}" for j in range(k)]
    cols += [f"y{j + 1}" for j in range(k)]
    cols += ["cost", "cum_cost", "hypervolume", "ok"]
    lines = [f"# config_hash={hash_} seed={result.seed}", ",".join(cols)]
    for row in result.trace:
        vals = [row.iteration, row.phase]
        vals += list(row.x)
        if space is not None:
            vals += _design_fields(space, row.x)
        vals += list(row.z)
        vals += list(row.y) if row.y is not None else [""] * k
        vals += [row.cost, row.cum_cost, row.hypervolume, row.ok]
        lines.append(",".join(_fmt(v) if v != "" else "" for v in vals))
    return lines


def _front_csv(result: CampaignResult, problem: MooProblem, space, hash_: str) -> list[str]:
    k = problem.n_obj
    d = problem.dim
    cols = [f"x{i}" for i in range(d)]
    if space is not None:
        cols += ["res_cell", "freq_hz", "temperature_k", "xbar_size"]
    cols += [f"y{j + 1}" for j in range(k)]
    lines = [f"# config_hash={hash_} seed={result.seed}", ",".join(cols)]
    for x, y in zip(result.pareto_x, result.pareto_y):
        vals = list(x)
        if space is not None:
            vals += _design_fields(space, x)
        vals += list(y)
        lines.append(",".join(_fmt(v) for v in vals))
    return lines


def _campaign_json(result: CampaignResult, cfg, hash_: str) -> str:
    payload = {
        "config_hash": hash_,
        "seed": result.seed,
        "problem": result.problem_name,
        "optimizer": result.optimizer,
        "budget": cfg.budget.total_cost,
        "total_cost": result.total_cost,
        "truncated": result.truncated,
        "converged": result.converged,
        "n_evaluations": len(result.trace),
        "pareto_set": [list(map(float, x)) for x in result.pareto_x],
        "pareto_front": [list(map(float, y)) for y in result.pareto_y],
        "gp_hyperparameters": None
        if result.model_params is None
        else [
            {
                "signal_var": p.signal_var,
                "lengthscales": list(p.lengthscales),
                "noise_var": p.noise_var,
            }
            for p in result.model_params
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def _hv_at_costs(result: CampaignResult, grid: np.ndarray) -> np.ndarray:
    costs = np.array([r.cum_cost for r in result.trace])
    hvs = np.array([r.hypervolume for r in result.trace])
    out = np.zeros(len(grid))
    for i, c in enumerate(grid):
        idx = np.searchsorted(costs, c, side="right") - 1
        out[i] = hvs[idx] if idx >= 0 else 0.0
    return out


def _aggregate_csv(results: list[CampaignResult], budget: float, hash_: str) -> list[str]:
    grid = np.linspace(0.0, budget, 121)
    curves = np.stack([_hv_at_costs(r, grid) for r in results])
    med = np.median(curves, axis=0)
    q25 = np.quantile(curves, 0.25, axis=0)
    q75 = np.quantile(curves, 0.75, axis=0)
    lines = [f"# config_hash={hash_} seed=all", "cost,hv_median,hv_q25,hv_q75"]
    for c, m, a, b in zip(grid, med, q25, q75):
        lines.append(",".join(_fmt(v) for v in (c, m, a, b)))
    return lines


def _fidelity_csv(
    results: list[CampaignResult], problem: MooProblem, hash_: str
) -> list[str]:
    bearing = [j for j, b in enumerate(problem.fidelity_mask) if b]
    lines = [f"# config_hash={hash_} seed=all", "seed,iteration,mean_fidelity"]
    for result in results:
        opt_rows = [r for r in result.trace if r.phase == "opt"]
        for i, row in enumerate(opt_rows):
            zbar = float(np.mean([row.z[j] for j in bearing])) if bearing else 1.0
            lines.append(",".join(_fmt(v) for v in (result.seed, i, zbar)))
    return lines


def run_nsga2_baseline(
    problem: MooProblem, budget: Budget, seed: int, n2cfg, n_obj_cost: float | None = None
) -> CampaignResult:
    """Outer NSGA-II baseline: generations sized to the evaluation budget.

    Every individual is evaluated at z*; each evaluation costs
    problem.cost(x, z*). The trace is reconstructed from the evaluation
    order so hypervolume-vs-cost curves are comparable with the other
    optimizers.
    """
    z_star = problem.z_star()
    cost_star = problem.cost(np.zeros(problem.dim), z_star) if n_obj_cost is None else n_obj_cost
    max_evals = int(budget.total_cost // cost_star)
    trace: list[TraceRow] = []
    xs, ys = [], []
    cum = 0.0

    def _record(x: np.ndarray) -> np.ndarray:
        nonlocal cum
        rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_NSGA_EVAL, len(trace)]))
        y = np.asarray(problem.evaluate(x, z_star, rng), dtype=float)
        cum += cost_star
        xs.append(np.asarray(x, dtype=float))
        ys.append(y)
        trace.append(
            TraceRow(
                iteration=len(trace),
                phase="opt",
                x=np.asarray(x, dtype=float),
                z=z_star.copy(),
                y=y,
                cost=cost_star,
                cum_cost=cum,
                hypervolume=dominated_hypervolume(np.asarray(ys), problem.hv_ref),
                ok=True,
            )
        )
        return y

    def evaluator(batch: np.ndarray) -> np.ndarray:
        return np.stack([_record(row) for row in np.atleast_2d(batch)])

    pop = min(n2cfg.pop, max_evals)
    if pop >= 2:
        gens = max(0, max_evals // pop - 1)
        bounds = np.tile([0.0, 1.0], (problem.dim, 1))
        nsga2(
            evaluator,
            bounds,
            pop=pop,
            gens=gens,
            seed=seed,
            crossover_prob=n2cfg.crossover_prob,
            crossover_eta=n2cfg.crossover_eta,
            mutation_eta=n2cfg.mutation_eta,
            mutation_prob=n2cfg.mutation_prob,
        )
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_NSGA_EVAL]))
        for _ in range(max_evals):
            _record(rng.random(problem.dim))

    if ys:
        front = FrontSet.from_points(np.asarray(xs), np.asarray(ys))
        px, py = front.x, front.y
    else:
        px = np.empty((0, problem.dim))
        py = np.empty((0, problem.n_obj))
    return CampaignResult(
        problem_name=problem.name,
        optimizer="nsga2",
        seed=seed,
        pareto_x=px,
        pareto_y=py,
        trace=trace,
        total_cost=cum,
        truncated=max_evals == 0,
        converged=False,
    )


def run_one_seed(cfg: cfgmod.CampaignConfig, seed: int) -> CampaignResult:
    problem = cfgmod.build_problem(cfg)
    budget = cfgmod.build_budget(cfg)
    mcfg = cfgmod.build_mesmo_config(cfg)
    if cfg.optimizer == "cf-mesmo":
        return run_cf_mesmo(problem, budget, seed, mcfg)
    if cfg.optimizer == "mesmo":
        return run_mesmo(problem, budget, seed, mcfg)
    if cfg.optimizer == "random":
        return run_random(problem, budget, seed, mcfg)
    return run_nsga2_baseline(problem, budget, seed, cfgmod.build_nsga2_config(cfg))


def _seed_worker(cfg_text: str, seed: int) -> CampaignResult:
    return run_one_seed(cfgmod.parse_config(cfg_text), seed)


def run_campaign(cfg: cfgmod.CampaignConfig, out_dir: Path) -> int:
    """Execute all seeds and write the artifact set; 0 iff all completed."""
    out_dir.mkdir(parents=True, exist_ok=True)
    hash_ = cfgmod.config_hash(cfg)
    problem = cfgmod.build_problem(cfg)
    space = cfgmod.build_space(cfg) if cfg.problem.name == "reram" else None

    _write_lines(out_dir / "effective_config.yaml", [f"# config_hash={hash_}", cfgmod.dump_config(cfg).rstrip()])

    results: list[CampaignResult] = []
    cfg_text = cfgmod.dump_config(cfg)
    try:
        if cfg.workers > 1 and len(cfg.seeds) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(_seed_worker, cfg_text, s) for s in cfg.seeds]
                results = [f.result() for f in futures]
        else:
            for s in cfg.seeds:
                results.append(run_one_seed(cfg, s))
    except Exception as exc:  # noqa: BLE001 - campaign must report, not crash
        print(f"campaign failed: {exc}", file=sys.stderr)
        return 1

    for result in results:
        _write_lines(out_dir / f"trace_seed{result.seed}.csv", _trace_csv(result, problem, space, hash_))
        _write_lines(out_dir / f"front_seed{result.seed}.csv", _front_csv(result, problem, space, hash_))
        (out_dir / f"campaign_seed{result.seed}.json").write_text(
            _campaign_json(result, cfg, hash_) + "\n", encoding="utf-8", newline="\n"
        )
    _write_lines(out_dir / "hv_vs_cost.csv", _aggregate_csv(results, cfg.budget.total_cost, hash_))
    _write_lines(out_dir / "fidelity_trace.csv", _fidelity_csv(results, problem, hash_))
    return 0


def _add_design_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--res-cell", type=int, default=8)
    p.add_argument("--freq", type=float, default=5.0e8, help="operating frequency in Hz")
    p.add_argument("--temp", type=float, default=350.0, help="temperature in K")
    p.add_argument("--xbar", type=int, default=64)


def _design_from_args(cfg: cfgmod.CampaignConfig, args) -> ReramDesign:
    space = cfgmod.build_space(cfg)
    return ReramDesign(
        res_cell=args.res_cell,
        freq_hz=args.freq,
        temperature_k=args.temp,
        xbar_size=args.xbar,
        **space.constants,
    )


def _load_cfg(args) -> cfgmod.CampaignConfig:
    if getattr(args, "config", None):
        return cfgmod.load_config(args.config)
    return cfgmod.parse_config("")


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    overrides = {}
    if args.optimizer:
        overrides["optimizer"] = args.optimizer
    if args.budget is not None:
        overrides["budget"] = cfgmod.BudgetSection(
            total_cost=args.budget,
            max_iterations=cfg.budget.max_iterations,
            converge_eps=cfg.budget.converge_eps,
            converge_window=cfg.budget.converge_window,
        )
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if overrides:
        import dataclasses

        cfg = dataclasses.replace(cfg, **overrides)
    out = args.out or os.environ.get("RERAMOPT_OUT") or cfg.out_dir
    workers_env = os.environ.get("RERAMOPT_WORKERS")
    if workers_env:
        import dataclasses

        cfg = dataclasses.replace(cfg, workers=int(workers_env))
    cfgmod._validate(cfg)
    return run_campaign(cfg, Path(out))


def _cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    problem = cfgmod.build_problem(cfg)
    if cfg.problem.name == "reram":
        space = cfgmod.build_space(cfg)
        x = space.encode(_design_from_args(cfg, args))
    else:
        if not args.x:
            print("synthetic problems need --x", file=sys.stderr)
            return 1
        x = np.array([float(v) for v in args.x.split(",")])
    z_vals = [float(v) for v in args.z.split(",")]
    if len(z_vals) == 1:
        z = np.where(problem.fidelity_mask, z_vals[0], 1.0)
    elif len(z_vals) == problem.n_obj:
        z = np.array(z_vals)
    else:
        print(f"--z needs 1 or {problem.n_obj} values", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    y = problem.evaluate(x, z, rng)
    print(
        json.dumps(
            {"y": [float(v) for v in y], "cost": problem.cost(x, z), "z": [float(v) for v in z]},
            sort_keys=True,
        )
    )
    return 0


def _cmd_train_one(args) -> int:
    import time

    cfg = _load_cfg(args)
    design = _design_from_args(cfg, args)
    dataset = make_dataset(cfgmod.build_dataset_spec(cfg), cfg.resna.data_seed)
    mlp = cfgmod.build_mlp(cfg)
    noise = cfgmod.build_noise(cfg)
    epochs = epochs_for_fidelity(args.z, cfg.resna.min_epochs, cfg.resna.max_epochs)
    rng = np.random.default_rng(args.seed)
    t0 = time.process_time()
    state = train(mlp, design, dataset, epochs, rng, noise=noise)
    per_run = infer(
        state,
        design,
        dataset,
        runs=cfg.resna.infer_runs,
        voting=cfg.resna.voting,
        rng=rng,
        noise=noise,
        return_per_run=True,
    )
    seconds = time.process_time() - t0
    print(
        json.dumps(
            {
                "accuracy": float(np.mean(per_run)),
                "epochs": epochs,
                "cost_seconds": seconds,
                "per_run_accuracies": per_run,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_noise_hist(args) -> int:
    cfg = _load_cfg(args)
    design = _design_from_args(cfg, args)
    spec = cfgmod.build_noise(cfg)
    rng = np.random.default_rng(args.seed)
    n_levels = 1 << design.res_cell
    levels = np.arange(n_levels)
    g_levels = design.g_min + levels * (design.g_max - design.g_min) / (n_levels - 1)
    if args.levels:
        g_levels = g_levels[: args.levels]
    lines = [
        f"# config_hash={cfgmod.config_hash(cfg)} seed={args.seed}",
        "level,g,source,bin_lo,bin_hi,count",
    ]
    for level, g in enumerate(g_levels):
        ctx = NoiseContext(
            g=np.full(args.samples, g),
            v=design.v_r,
            freq_hz=design.freq_hz,
            temperature_k=design.temperature_k,
            sigma_prog=design.sigma_prog,
            g_min=design.g_min,
            rtn=spec.rtn_params,
        )
        draws = {
            "thermal": rng.standard_normal(args.samples) * thermal_sigma(ctx),
            "shot": rng.standard_normal(args.samples) * shot_sigma(ctx),
            "rtn": np.where(
                rng.random(args.samples) < spec.rtn_params.p_occupancy, rtn_amplitude(ctx), 0.0
            ),
            "prog": rng.standard_normal(args.samples) * prog_sigma(ctx),
        }
        draws["total"] = sum(draws.values())
        for source, dg in draws.items():
            rel = dg / g
            counts, edges = np.histogram(rel, bins=args.bins)
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                lines.append(
                    ",".join(_fmt(v) for v in (level, g, source, lo, hi, int(c)))
                )
    if args.out:
        _write_lines(Path(args.out), lines)
    else:
        print("\n".join(lines))
    return 0


def _cmd_hv(args) -> int:
    rows = []
    with open(args.front, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                continue  # header row
    ref = np.array([float(v) for v in args.ref.split(",")])
    print(_fmt(hypervolume(np.array(rows), ref)))
    return 0


def _cmd_emit_defaults(args) -> int:
    text = cfgmod.emit_defaults()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        print(text, end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="reramopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a campaign per the config file")
    p_run.add_argument("--config")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--optimizer", choices=("cf-mesmo", "mesmo", "random", "nsga2"))
    p_run.add_argument("--budget", type=float)
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("evaluate", help="evaluate the objective vector at (design, z)")
    p_eval.add_argument("--config")
    _add_design_flags(p_eval)
    p_eval.add_argument("--x", help="comma-separated coordinates for synthetic problems")
    p_eval.add_argument("--z", default="1.0")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_train = sub.add_parser("train-one", help="train one design at one fidelity")
    p_train.add_argument("--config")
    _add_design_flags(p_train)
    p_train.add_argument("--z", type=float, default=1.0)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=_cmd_train_one)

    p_hist = sub.add_parser("noise-hist", help="dump relative-noise histograms per level")
    p_hist.add_argument("--config")
    _add_design_flags(p_hist)
    p_hist.add_argument("--samples", type=int, default=10000)
    p_hist.add_argument("--bins", type=int, default=50)
    p_hist.add_argument("--levels", type=int, help="restrict to the first N conductance levels")
    p_hist.add_argument("--seed", type=int, default=0)
    p_hist.add_argument("--out")
    p_hist.set_defaults(func=_cmd_noise_hist)

    p_hv = sub.add_parser("hv", help="hypervolume of a front CSV against a reference point")
    p_hv.add_argument("--front", required=True)
    p_hv.add_argument("--ref", required=True)
    p_hv.set_defaults(func=_cmd_hv)

    p_def = sub.add_parser("emit-defaults", help="print the default config as YAML")
    p_def.add_argument("--out")
    p_def.set_defaults(func=_cmd_emit_defaults)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
