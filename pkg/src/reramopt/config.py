"""Campaign configuration: YAML schema, defaults, and object builders.

The effective configuration is a tree of frozen dataclasses. Parsing is
strict: unknown keys are rejected with their dotted path, YAML syntax
errors carry the line number, and an empty document yields the defaults.
``emit_defaults()`` round-trips through ``parse_config()`` to an equal
config.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field

import yaml

from .crossbar import NoiseSpec
from .design_space import DesignSpace
from .gp import GpConfig
from .mesmo import Budget, MesmoConfig
from .noise import RtnParams
from .objectives import HwCostParams, MooProblem, reram_problem, synthetic_cf_problem
from .pareto import Nsga2Config
from .resna import DatasetSpec, MlpSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSection:
    name: str = "branin-currin-cf"  # or "zdt1", "reram"


@dataclass(frozen=True)
class BudgetSection:
    total_cost: float = 60.0
    max_iterations: int = 100
    converge_eps: float = 1e-3
    converge_window: int = 10


@dataclass(frozen=True)
class DeviceSection:
    bit_quan: int = 8
    r_on: float = 3.03e3
    r_off: float = 3.03e6
    res_dac: int = 8
    res_adc: int | None = 8
    v_r: float = 1.65
    sigma_prog: float = 0.0658


@dataclass(frozen=True)
class SpaceSection:
    res_cell_levels: tuple[int, ...] = (1, 2, 3, 4, 8)
    xbar_sizes: tuple[int, ...] = (32, 64, 128)
    freq_bounds_hz: tuple[float, float] = (1.0e7, 1.0e9)
    temperature_bounds_k: tuple[float, float] = (300.0, 400.0)


@dataclass(frozen=True)
class NoiseSection:
    thermal: bool = True
    shot: bool = True
    rtn: bool = True
    prog: bool = True
    rtn_amp_a: float = 4e-4
    rtn_amp_b: float = 2e-3
    rtn_p_occupancy: float = 0.5


@dataclass(frozen=True)
class ResnaSection:
    widths: tuple[int, ...] = (64, 32, 10)
    vote_copies: int = 3
    hidden_copies: int = 1
    classifier_freq_hz: float = 1.0e8
    classifier_temperature_k: float = 300.0
    lr: float = 0.001
    momentum: float = 0.9
    batch_size: int = 8
    noise_resample: str = "per_batch"
    n_train: int = 2000
    n_test: int = 1000
    n_classes: int = 10
    center_spread: float = 0.5
    csv_path: str | None = None
    data_seed: int = 7
    infer_runs: int = 10
    voting: bool = True
    min_epochs: int = 10
    max_epochs: int = 100


@dataclass(frozen=True)
class HwSection:
    area_per_cell_mm2: float = 5.0e-8
    area_per_dac_mm2: float = 2.0e-6
    area_per_adc_mm2: float = 1.5e-4
    energy_per_dac_j: float = 2.0e-13
    energy_per_adc_j: float = 2.0e-12
    dac_cycles: int = 1
    columns_per_adc: int = 8
    n_inputs: int = 1000


@dataclass(frozen=True)
class GpSection:
    lengthscale_bounds: tuple[float, float] = (0.05, 2.0)
    signal_var_bounds: tuple[float, float] = (0.05, 20.0)
    noise_var_bounds: tuple[float, float] = (1e-6, 1e-1)
    n_restarts: int = 5
    max_opt_iter: int = 60


@dataclass(frozen=True)
class MesmoSection:
    n_front_samples: int = 10
    pool_size: int = 2000
    fidelity_levels: int = 10
    n_init: int = 5
    rff_features: int = 500
    gp_refit_every: int = 3
    inner_pop: int = 64
    inner_gens: int = 40


@dataclass(frozen=True)
class Nsga2Section:
    pop: int = 100
    gens: int = 100
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_eta: float = 20.0
    mutation_prob: float | None = None


@dataclass(frozen=True)
class CampaignConfig:
    problem: ProblemSection = field(default_factory=ProblemSection)
    optimizer: str = "cf-mesmo"  # cf-mesmo | mesmo | random | nsga2
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "campaign_out"
    workers: int = 1
    budget: BudgetSection = field(default_factory=BudgetSection)
    device: DeviceSection = field(default_factory=DeviceSection)
    space: SpaceSection = field(default_factory=SpaceSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    resna: ResnaSection = field(default_factory=ResnaSection)
    hw: HwSection = field(default_factory=HwSection)
    gp: GpSection = field(default_factory=GpSection)
    mesmo: MesmoSection = field(default_factory=MesmoSection)
    nsga2: Nsga2Section = field(default_factory=Nsga2Section)


_VALID_OPTIMIZERS = ("cf-mesmo", "mesmo", "random", "nsga2")
_VALID_PROBLEMS = ("reram", "branin-currin-cf", "zdt1")


def parse_config(text: str) -> CampaignConfig:
    """Parse YAML text into a validated CampaignConfig (empty -> defaults)."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"YAML parse error{line}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be a mapping")
    cfg = _from_mapping(CampaignConfig, data, path="")
    _validate(cfg)
    return cfg


def load_config(path: str) -> CampaignConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _validate(cfg: CampaignConfig) -> None:
    if cfg.optimizer not in _VALID_OPTIMIZERS:
        raise ConfigError(f"optimizer must be one of {_VALID_OPTIMIZERS}, got {cfg.optimizer!r}")
    if cfg.problem.name not in _VALID_PROBLEMS:
        raise ConfigError(f"problem.name must be one of {_VALID_PROBLEMS}, got {cfg.problem.name!r}")
    if cfg.budget.total_cost <= 0:
        raise ConfigError("budget.total_cost must be positive")
    if not cfg.seeds:
        raise ConfigError("seeds must not be empty")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")


def _from_mapping(cls, data: dict, path: str):
    fields_by_name = {f.name: f for f in dataclasses.fields(cls)}
    hints = typing.get_type_hints(cls)
    unknown = sorted(set(data) - set(fields_by_name))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"unknown config key '{where}'")
    kwargs = {}
    for name, value in data.items():
        sub_path = f"{path}.{name}" if path else name
        kwargs[name] = _coerce(hints[name], value, sub_path)
    return cls(**kwargs)


def _coerce(hint, value, path: str):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, path)
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"'{path}' must be a mapping")
        return _from_mapping(hint, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"'{path}' must be a list")
        elem = typing.get_args(hint)[0]
        return tuple(_coerce(elem, v, f"{path}[{i}]") for i, v in enumerate(value))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"'{path}' must be a boolean")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{path}' must be an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{path}' must be a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"'{path}' must be a string")
        return value
    raise ConfigError(f"'{path}': unsupported config field type {hint}")


def to_dict(obj) -> dict:
    """Plain-data view of a config dataclass (tuples become lists)."""
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = to_dict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


def emit_defaults() -> str:
    return yaml.safe_dump(to_dict(CampaignConfig()), sort_keys=False)


def dump_config(cfg: CampaignConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def config_hash(cfg: CampaignConfig) -> str:
    canonical = json.dumps(to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# Builders from config sections to runtime objects.


def build_space(cfg: CampaignConfig) -> DesignSpace:
    dev = cfg.device
    return DesignSpace(
        res_cell_levels=cfg.space.res_cell_levels,
        xbar_sizes=cfg.space.xbar_sizes,
        freq_bounds_hz=cfg.space.freq_bounds_hz,
        temperature_bounds_k=cfg.space.temperature_bounds_k,
        constants={
            "bit_quan": dev.bit_quan,
            "r_on": dev.r_on,
            "r_off": dev.r_off,
            "res_dac": dev.res_dac,
            "res_adc": dev.res_adc,
            "v_r": dev.v_r,
            "sigma_prog": dev.sigma_prog,
        },
    )


def build_noise(cfg: CampaignConfig) -> NoiseSpec:
    n = cfg.noise
    return NoiseSpec(
        thermal=n.thermal,
        shot=n.shot,
        rtn=n.rtn,
        prog=n.prog,
        rtn_params=RtnParams(n.rtn_amp_a, n.rtn_amp_b, n.rtn_p_occupancy),
    )


def build_mlp(cfg: CampaignConfig) -> MlpSpec:
    r = cfg.resna
    return MlpSpec(
        widths=r.widths,
        vote_copies=r.vote_copies,
        hidden_copies=r.hidden_copies,
        classifier_freq_hz=r.classifier_freq_hz,
        classifier_temperature_k=r.classifier_temperature_k,
        lr=r.lr,
        momentum=r.momentum,
        batch_size=r.batch_size,
        noise_resample=r.noise_resample,
    )


def build_dataset_spec(cfg: CampaignConfig) -> DatasetSpec:
    r = cfg.resna
    return DatasetSpec(
        n_features=r.widths[0],
        n_classes=r.n_classes,
        n_train=r.n_train,
        n_test=r.n_test,
        center_spread=r.center_spread,
        csv_path=r.csv_path,
    )


def build_hw_params(cfg: CampaignConfig) -> HwCostParams:
    h = cfg.hw
    return HwCostParams(
        area_per_cell_mm2=h.area_per_cell_mm2,
        area_per_dac_mm2=h.area_per_dac_mm2,
        area_per_adc_mm2=h.area_per_adc_mm2,
        energy_per_dac_j=h.energy_per_dac_j,
        energy_per_adc_j=h.energy_per_adc_j,
        dac_cycles=h.dac_cycles,
        columns_per_adc=h.columns_per_adc,
    )


def build_gp_config(cfg: CampaignConfig) -> GpConfig:
    g = cfg.gp
    return GpConfig(
        lengthscale_bounds=g.lengthscale_bounds,
        signal_var_bounds=g.signal_var_bounds,
        noise_var_bounds=g.noise_var_bounds,
        n_restarts=g.n_restarts,
        max_opt_iter=g.max_opt_iter,
    )


def build_nsga2_config(cfg: CampaignConfig) -> Nsga2Config:
    n = cfg.nsga2
    return Nsga2Config(
        pop=n.pop,
        gens=n.gens,
        crossover_prob=n.crossover_prob,
        crossover_eta=n.crossover_eta,
        mutation_eta=n.mutation_eta,
        mutation_prob=n.mutation_prob,
    )


def build_mesmo_config(cfg: CampaignConfig) -> MesmoConfig:
    m = cfg.mesmo
    outer = build_nsga2_config(cfg)
    inner = Nsga2Config(
        pop=m.inner_pop,
        gens=m.inner_gens,
        crossover_prob=outer.crossover_prob,
        crossover_eta=outer.crossover_eta,
        mutation_eta=outer.mutation_eta,
        mutation_prob=outer.mutation_prob,
    )
    return MesmoConfig(
        n_front_samples=m.n_front_samples,
        pool_size=m.pool_size,
        fidelity_levels=m.fidelity_levels,
        n_init=m.n_init,
        rff_features=m.rff_features,
        gp_refit_every=m.gp_refit_every,
        gp=build_gp_config(cfg),
        inner_nsga2=inner,
    )


def build_budget(cfg: CampaignConfig) -> Budget:
    b = cfg.budget
    return Budget(
        total_cost=b.total_cost,
        max_iterations=b.max_iterations,
        converge_eps=b.converge_eps,
        converge_window=b.converge_window,
    )


def build_problem(cfg: CampaignConfig) -> MooProblem:
    if cfg.problem.name in ("branin-currin-cf", "zdt1"):
        return synthetic_cf_problem(cfg.problem.name)
    r = cfg.resna
    return reram_problem(
        space=build_space(cfg),
        mlp=build_mlp(cfg),
        dataset_spec=build_dataset_spec(cfg),
        data_seed=r.data_seed,
        noise=build_noise(cfg),
        hw_params=build_hw_params(cfg),
        n_inputs=cfg.hw.n_inputs,
        min_epochs=r.min_epochs,
        max_epochs=r.max_epochs,
        infer_runs=r.infer_runs,
        voting=r.voting,
    )
