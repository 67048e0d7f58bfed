"""Cost-aware max-value entropy search over designs and fidelities.

Each iteration samples S highest-fidelity Pareto fronts from the
surrogates (posterior function draws solved by the cheap inner NSGA-II),
then picks the (design, fidelity) pair maximizing

    alpha(x, z) = sum_j sum_s [ g*phi(g)/(2*Phi(g)) - ln Phi(g) ] / (C(x,z)*S)

with g = (f_s^{j*} - mu_j(x, z_j)) / sigma_j(x, z_j): the expected entropy
reduction of the front's per-objective maxima per unit normalized cost.
The same loop with the fidelity pinned to z* is the single-fidelity
baseline, and a random-search baseline shares the bookkeeping.

The outer loop is sequential by nature; within an iteration every random
draw comes from an indexed substream of the campaign seed, so reruns are
exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr

from .gp import CfGpModel, GpConfig, GpParams, fit, posterior, sample_function
from .objectives import MooProblem
from .pareto import FrontSet, Nsga2Config, dominated_hypervolume, nsga2

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Substream tags for indexed, order-independent seeding.
_TAG_INIT, _TAG_EVAL, _TAG_FRONT, _TAG_POOL = 11, 13, 17, 19


def entropy_term(gamma):
    """Entropy reduction of one truncated Gaussian: g*phi/(2*Phi) - ln Phi.

    Equals the differential-entropy gap between a standard Gaussian and
    the same Gaussian truncated above at gamma; nonnegative, decreasing in
    gamma, ln 2 at gamma=0 and 0 in the no-truncation limit. The ratio
    phi/Phi is evaluated in log space so the expression stays finite and
    accurate for arbitrarily negative gamma.
    """
    g = np.asarray(gamma, dtype=float)
    log_pdf = -0.5 * g * g - _HALF_LOG_2PI
    log_cdf = log_ndtr(g)
    hazard = np.exp(log_pdf - log_cdf)
    out = np.maximum(0.5 * g * hazard - log_cdf, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ParetoFrontSample:
    """A sampled highest-fidelity front with cached per-objective maxima."""

    values: np.ndarray  # (l, k), mutually non-dominated
    maxima: np.ndarray  # (k,)
    designs: np.ndarray | None = None  # inputs achieving the sampled front

    @classmethod
    def from_front(cls, front: FrontSet) -> "ParetoFrontSample":
        return cls(values=front.y, maxima=front.y.max(axis=0), designs=front.x)


@dataclass(frozen=True)
class MesmoConfig:
    n_front_samples: int = 10
    pool_size: int = 2000
    fidelity_levels: int = 10
    n_init: int = 5
    rff_features: int = 500
    gp_refit_every: int = 3  # hyperparameter re-optimization cadence (conditioning is per-iteration)
    gp: GpConfig = field(default_factory=GpConfig)
    # Inner solver sized for sampled-function fronts; the outer NSGA-II
    # baseline keeps the full (100, 100) defaults.
    inner_nsga2: Nsga2Config = field(default_factory=lambda: Nsga2Config(pop=64, gens=40))


@dataclass(frozen=True)
class Budget:
    total_cost: float
    max_iterations: int = 100
    converge_eps: float = 1e-3
    converge_window: int = 10

    def __post_init__(self):
        if self.total_cost <= 0 or self.max_iterations < 1:
            raise ValueError("budget and iteration cap must be positive")


@dataclass
class TraceRow:
    iteration: int
    phase: str  # "init" or "opt"
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray | None
    cost: float
    cum_cost: float
    hypervolume: float
    ok: bool


@dataclass
class CampaignResult:
    problem_name: str
    optimizer: str
    seed: int
    pareto_x: np.ndarray
    pareto_y: np.ndarray
    trace: list[TraceRow]
    total_cost: float
    truncated: bool
    converged: bool
    model_params: list[GpParams] | None = None


def sample_pareto_fronts(
    models: list[CfGpModel],
    n_samples: int,
    dim: int,
    seed,
    inner: Nsga2Config = Nsga2Config(),
    rff_features: int = 500,
) -> list[ParetoFrontSample]:
    """Draw S independent front samples by optimizing sampled functions.

    Sample s draws one highest-fidelity function per objective and solves
    the cheap deterministic MOO over them with NSGA-II on [0,1]^dim.
    """
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    fronts = []
    bounds = np.tile([0.0, 1.0], (dim, 1))
    for s in range(n_samples):
        funcs = [
            sample_function(m, base.spawn(1)[0], n_features=rff_features) for m in models
        ]

        def evaluator(x: np.ndarray) -> np.ndarray:
            return np.stack([f(x) for f in funcs], axis=1)

        nsga_seed = int(np.random.default_rng(base.spawn(1)[0]).integers(2**31))
        front = nsga2(evaluator, bounds, seed=nsga_seed, config=inner)
        fronts.append(ParetoFrontSample.from_front(front))
    return fronts


_SIGMA_FLOOR = 1e-9


def acquisition(
    models: list[CfGpModel],
    x: np.ndarray,
    z: np.ndarray,
    fronts: list[ParetoFrontSample],
    cost,
) -> np.ndarray:
    """Information gain about the optimal front per unit cost, batched.

    ``x`` is (m, d) or (d,), ``z`` is (m, k) or (k,), ``cost`` a scalar or
    (m,) vector of normalized evaluation costs C(x, z) > 0.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = np.tile(z, (len(x), 1))
    total = np.zeros(len(x))
    for j, model in enumerate(models):
        mu, sigma = posterior(model, x, z[:, j])
        sigma = np.maximum(sigma, _SIGMA_FLOOR)
        maxima = np.array([f.maxima[j] for f in fronts])
        gamma = (maxima[None, :] - mu[:, None]) / sigma[:, None]
        total += entropy_term(gamma).sum(axis=1)
    alpha = total / (np.asarray(cost, dtype=float) * len(fronts))
    return alpha


def fidelity_vectors(problem: MooProblem, levels: np.ndarray) -> np.ndarray:
    """Grid of fidelity vectors: one shared level for the fidelity-bearing
    objectives, non-bearing objectives pinned at z*=1."""
    mask = np.asarray(problem.fidelity_mask)
    return np.where(mask[None, :], levels[:, None], 1.0)


def select_next(
    models: list[CfGpModel],
    fronts: list[ParetoFrontSample],
    problem: MooProblem,
    pool: int = 2000,
    fidelity_levels: int = 10,
    seed=0,
    single_fidelity: bool = False,
    extra_candidates: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Arg-max of the acquisition over a candidate pool x fidelity grid.

    The pool is ``default_rng(seed).random((pool, dim))`` plus any
    ``extra_candidates`` (the campaign passes the sampled-front designs
    and the evaluation history, giving the argmax a sharp discretization
    near the believed Pareto set). The grid holds ``fidelity_levels``
    evenly spaced shared fidelity values (the bearing objectives move
    together, everything else stays pinned at z*). Posteriors are
    evaluated once per (candidate, level, objective) and recombined,
    which is equivalent to scoring every (x, z) pair. Exact ties go to
    the cheaper pair, then to the lower (candidate, level) index.
    """
    if pool < 1:
        raise ValueError("pool must hold at least one candidate")
    rng = np.random.default_rng(seed)
    candidates = rng.random((pool, problem.dim))
    if extra_candidates is not None and len(extra_candidates):
        candidates = np.vstack([candidates, np.atleast_2d(extra_candidates)])
        pool = len(candidates)
    levels = np.array([1.0]) if single_fidelity else np.linspace(0.0, 1.0, fidelity_levels)
    z_grid = fidelity_vectors(problem, levels)  # (L, k)
    grid_costs = np.array([problem.cost(candidates[0], zv) for zv in z_grid])

    n_s = len(fronts)
    gains = np.zeros((pool, len(levels)))
    for j, model in enumerate(models):
        lv = np.unique(z_grid[:, j])
        x_rep = np.repeat(candidates, len(lv), axis=0)
        z_rep = np.tile(lv, pool)
        mu, sigma = posterior(model, x_rep, z_rep)
        sigma = np.maximum(sigma, _SIGMA_FLOOR)
        maxima = np.array([f.maxima[j] for f in fronts])
        gamma = (maxima[None, :] - mu[:, None]) / sigma[:, None]
        terms = entropy_term(gamma).sum(axis=1).reshape(pool, len(lv))
        # Map each grid row to its level column for this objective.
        col_of = np.searchsorted(lv, z_grid[:, j])
        gains += terms[:, col_of]

    alpha = gains / (grid_costs[None, :] * n_s)
    best = alpha.max()
    tied = np.argwhere(alpha == best)
    costs_tied = grid_costs[tied[:, 1]]
    order = np.lexsort((tied[:, 1], tied[:, 0], costs_tied))
    pick_pool, pick_level = tied[order[0]]
    return candidates[pick_pool], z_grid[pick_level]


def _fit_models(history_x, history_z, history_y, cfg: MesmoConfig, warm, optimize: bool):
    x = np.asarray(history_x)
    z = np.asarray(history_z)
    y = np.asarray(history_y)
    models = []
    for j in range(y.shape[1]):
        init = warm[j] if warm else None
        models.append(
            fit(x, z[:, j], y[:, j], config=cfg.gp, init_params=init, optimize=optimize)
        )
    return models


def run_cf_mesmo(
    problem: MooProblem, budget: Budget, seed: int, cfg: MesmoConfig = MesmoConfig()
) -> CampaignResult:
    """Full continuous-fidelity campaign (Pareto set, front and trace)."""
    return _run_campaign(problem, budget, seed, cfg, optimizer="cf-mesmo")


def run_mesmo(
    problem: MooProblem, budget: Budget, seed: int, cfg: MesmoConfig = MesmoConfig()
) -> CampaignResult:
    """Single-fidelity variant: every evaluation runs at z*."""
    return _run_campaign(problem, budget, seed, cfg, optimizer="mesmo")


def run_random(
    problem: MooProblem, budget: Budget, seed: int, cfg: MesmoConfig = MesmoConfig()
) -> CampaignResult:
    """Uniform random designs at z* until the budget is exhausted."""
    return _run_campaign(problem, budget, seed, cfg, optimizer="random")


def _run_campaign(
    problem: MooProblem, budget: Budget, seed: int, cfg: MesmoConfig, optimizer: str
) -> CampaignResult:
    k = problem.n_obj
    z_star = problem.z_star()
    trace: list[TraceRow] = []
    hist_x, hist_z, hist_y = [], [], []
    star_y, star_x = [], []  # highest-fidelity evaluations feeding the front
    cum = 0.0

    def _hv() -> float:
        if not star_y:
            return 0.0
        return dominated_hypervolume(np.asarray(star_y), problem.hv_ref)

    def _evaluate(x, z, tag, index, phase) -> bool:
        nonlocal cum
        rng = np.random.default_rng(np.random.SeedSequence([seed, tag, index]))
        cost = problem.cost(x, z)
        try:
            y = np.asarray(problem.evaluate(x, z, rng), dtype=float)
            ok = True
        except Exception:
            y, ok = None, False
        cum += cost
        if ok:
            hist_x.append(np.asarray(x, dtype=float))
            hist_z.append(np.asarray(z, dtype=float))
            hist_y.append(y)
            bearing = [j for j, b in enumerate(problem.fidelity_mask) if b]
            if all(z[j] >= 1.0 for j in bearing):
                star_x.append(np.asarray(x, dtype=float))
                star_y.append(y)
        trace.append(
            TraceRow(
                iteration=len(trace),
                phase=phase,
                x=np.asarray(x, dtype=float),
                z=np.asarray(z, dtype=float),
                y=y,
                cost=cost,
                cum_cost=cum,
                hypervolume=_hv(),
                ok=ok,
            )
        )
        return ok

    init_rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_INIT]))
    for i in range(cfg.n_init):
        _evaluate(init_rng.random(problem.dim), z_star.copy(), _TAG_INIT, i, "init")

    truncated = cum > budget.total_cost
    converged = False
    warm = None
    model_params = None
    hv_series: list[float] = []

    bearing = [j for j, b in enumerate(problem.fidelity_mask) if b]
    if not truncated and optimizer in ("cf-mesmo", "mesmo"):
        t = 0
        while cum <= budget.total_cost and t < budget.max_iterations and not converged:
            if len(hist_y) < 2:
                break
            optimize_hypers = warm is None or (t % max(cfg.gp_refit_every, 1) == 0)
            models = _fit_models(hist_x, hist_z, hist_y, cfg, warm, optimize_hypers)
            warm = [m.params for m in models]
            model_params = warm
            fronts = sample_pareto_fronts(
                models,
                cfg.n_front_samples,
                problem.dim,
                np.random.SeedSequence([seed, _TAG_FRONT, t]),
                inner=cfg.inner_nsga2,
                rff_features=cfg.rff_features,
            )
            x, z = select_next(
                models,
                fronts,
                problem,
                pool=cfg.pool_size,
                fidelity_levels=cfg.fidelity_levels,
                seed=np.random.SeedSequence([seed, _TAG_POOL, t]),
                single_fidelity=(optimizer == "mesmo"),
            )
            _evaluate(x, z, _TAG_EVAL, t, "opt")
            # The front only moves on highest-fidelity evaluations, so the
            # convergence window advances on those alone; cheap evaluations
            # must not be mistaken for stagnation.
            if all(z[j] >= 1.0 for j in bearing):
                hv_series.append(trace[-1].hypervolume)
                converged = _has_converged(hv_series, budget)
            t += 1
    elif not truncated and optimizer == "random":
        sel_rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_POOL]))
        t = 0
        while cum <= budget.total_cost and t < budget.max_iterations and not converged:
            _evaluate(sel_rng.random(problem.dim), z_star.copy(), _TAG_EVAL, t, "opt")
            hv_series.append(trace[-1].hypervolume)
            converged = _has_converged(hv_series, budget)
            t += 1
    elif not truncated:
        raise ValueError(f"unknown optimizer {optimizer!r}")

    if star_y:
        front = FrontSet.from_points(np.asarray(star_x), np.asarray(star_y))
        pareto_x, pareto_y = front.x, front.y
    else:
        pareto_x = np.empty((0, problem.dim))
        pareto_y = np.empty((0, k))

    return CampaignResult(
        problem_name=problem.name,
        optimizer=optimizer,
        seed=seed,
        pareto_x=pareto_x,
        pareto_y=pareto_y,
        trace=trace,
        total_cost=cum,
        truncated=truncated,
        converged=converged,
        model_params=model_params,
    )


def _has_converged(hv_series: list[float], budget: Budget) -> bool:
    w = budget.converge_window
    if len(hv_series) < w + 1:
        return False
    recent = hv_series[-(w + 1) :]
    for prev, cur in zip(recent[:-1], recent[1:]):
        denom = max(abs(prev), 1e-12)
        if abs(cur - prev) / denom >= budget.converge_eps:
            return False
    return True
