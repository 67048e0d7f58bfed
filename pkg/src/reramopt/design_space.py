"""ReRAM design configuration space and its unit-cube encoding.

A design point fixes four free variables (cell resolution, operating
frequency, temperature, crossbar side length); everything else about the
device is a constant. Optimizers work on a normalized [0,1]^4 vector;
ordinal variables are snapped back to their nearest admissible level on
decode, continuous variables map affinely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

RES_CELL_LEVELS = (1, 2, 3, 4, 8)
XBAR_SIZES = (32, 64, 128)
FREQ_BOUNDS_HZ = (1.0e7, 1.0e9)
TEMPERATURE_BOUNDS_K = (300.0, 400.0)

# Level counts reproducing the published design-space size of ~1.485e7:
# 5 cell resolutions x 991 frequency steps (1 MHz) x 1000 temperature
# steps (0.1 K) x 3 crossbar sizes.
PAPER_RESOLUTIONS = (5, 991, 1000, 3)


@dataclass(frozen=True)
class ReramDesign:
    """One point of the crossbar design space plus fixed device constants.

    Free variables: ``res_cell`` (bits per cell), ``freq_hz``,
    ``temperature_k``, ``xbar_size``. The remaining fields are device
    constants shared by all designs; they are overridable for what-if
    studies but default to the reference device.
    """

    res_cell: int
    freq_hz: float
    temperature_k: float
    xbar_size: int
    bit_quan: int = 8
    r_on: float = 3.03e3
    r_off: float = 3.03e6
    res_dac: int = 8
    res_adc: int | None = 8  # None means an ideal (infinite-resolution) ADC
    v_r: float = 1.65
    sigma_prog: float = 0.0658

    def __post_init__(self):
        if self.res_cell not in RES_CELL_LEVELS:
            raise ValueError(f"res_cell must be one of {RES_CELL_LEVELS}, got {self.res_cell}")
        if self.res_cell > self.bit_quan:
            raise ValueError(f"res_cell ({self.res_cell}) exceeds bit_quan ({self.bit_quan})")
        if self.xbar_size not in XBAR_SIZES:
            raise ValueError(f"xbar_size must be one of {XBAR_SIZES}, got {self.xbar_size}")
        if not (FREQ_BOUNDS_HZ[0] <= self.freq_hz <= FREQ_BOUNDS_HZ[1]):
            raise ValueError(f"freq_hz {self.freq_hz} outside {FREQ_BOUNDS_HZ}")
        if not (TEMPERATURE_BOUNDS_K[0] <= self.temperature_k <= TEMPERATURE_BOUNDS_K[1]):
            raise ValueError(f"temperature_k {self.temperature_k} outside {TEMPERATURE_BOUNDS_K}")
        if not (0.0 < self.r_on < self.r_off):
            raise ValueError("need 0 < r_on < r_off")
        if self.v_r <= 0.0:
            raise ValueError("v_r must be positive")

    @property
    def g_min(self) -> float:
        return 1.0 / self.r_off

    @property
    def g_max(self) -> float:
        return 1.0 / self.r_on

    @property
    def slices_per_weight(self) -> int:
        return math.ceil(self.bit_quan / self.res_cell)

    def with_context(self, freq_hz: float, temperature_k: float) -> "ReramDesign":
        """Same device, different operating point (used for reduced-noise layers)."""
        return replace(self, freq_hz=freq_hz, temperature_k=temperature_k)


@dataclass(frozen=True)
class DesignSpace:
    """Bounds and level sets defining the encodable design space.

    ``encode`` maps a design to [0,1]^4 in the order (res_cell, freq,
    temperature, xbar_size). Ordinals are placed on an evenly spaced grid
    index/(levels-1) regardless of their numeric values, which keeps GP
    lengthscales comparable across the non-uniform {1,2,3,4,8} ladder.
    """

    res_cell_levels: tuple[int, ...] = RES_CELL_LEVELS
    xbar_sizes: tuple[int, ...] = XBAR_SIZES
    freq_bounds_hz: tuple[float, float] = FREQ_BOUNDS_HZ
    temperature_bounds_k: tuple[float, float] = TEMPERATURE_BOUNDS_K
    constants: dict = field(default_factory=dict)

    dim: int = 4

    def encode(self, design: ReramDesign) -> np.ndarray:
        """Map a valid design to its normalized coordinate vector."""
        if design.res_cell not in self.res_cell_levels:
            raise ValueError(f"res_cell {design.res_cell} not in space {self.res_cell_levels}")
        if design.xbar_size not in self.xbar_sizes:
            raise ValueError(f"xbar_size {design.xbar_size} not in space {self.xbar_sizes}")
        f_lo, f_hi = self.freq_bounds_hz
        t_lo, t_hi = self.temperature_bounds_k
        if not (f_lo <= design.freq_hz <= f_hi):
            raise ValueError(f"freq_hz {design.freq_hz} outside {self.freq_bounds_hz}")
        if not (t_lo <= design.temperature_k <= t_hi):
            raise ValueError(f"temperature_k {design.temperature_k} outside bounds")
        return np.array(
            [
                _ordinal_to_unit(self.res_cell_levels.index(design.res_cell), len(self.res_cell_levels)),
                (design.freq_hz - f_lo) / (f_hi - f_lo),
                (design.temperature_k - t_lo) / (t_hi - t_lo),
                _ordinal_to_unit(self.xbar_sizes.index(design.xbar_size), len(self.xbar_sizes)),
            ]
        )

    def decode(self, coords: np.ndarray) -> ReramDesign:
        """Map any point of [0,1]^4 (clamped) to the nearest valid design."""
        v = np.clip(np.asarray(coords, dtype=float).reshape(4), 0.0, 1.0)
        f_lo, f_hi = self.freq_bounds_hz
        t_lo, t_hi = self.temperature_bounds_k
        return ReramDesign(
            res_cell=self.res_cell_levels[_unit_to_ordinal(v[0], len(self.res_cell_levels))],
            freq_hz=f_lo + v[1] * (f_hi - f_lo),
            temperature_k=t_lo + v[2] * (t_hi - t_lo),
            xbar_size=self.xbar_sizes[_unit_to_ordinal(v[3], len(self.xbar_sizes))],
            **self.constants,
        )

    def sample_designs(self, n: int, rng: np.random.Generator) -> list[ReramDesign]:
        """Draw n designs uniformly over the encoded space (decode of U[0,1]^4)."""
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        u = rng.random((n, 4))
        return [self.decode(row) for row in u]


DEFAULT_SPACE = DesignSpace()


def _ordinal_to_unit(index: int, levels: int) -> float:
    return 0.0 if levels == 1 else index / (levels - 1)


def _unit_to_ordinal(value: float, levels: int) -> int:
    # Nearest grid point of {0, 1/(L-1), ..., 1}; .5 rounds half-up via floor.
    if levels == 1:
        return 0
    return int(min(levels - 1, math.floor(value * (levels - 1) + 0.5)))


def encode(design: ReramDesign, space: DesignSpace = DEFAULT_SPACE) -> np.ndarray:
    return space.encode(design)


def decode(coords: np.ndarray, space: DesignSpace = DEFAULT_SPACE) -> ReramDesign:
    return space.decode(coords)


def sample_designs(
    n: int, rng: np.random.Generator, space: DesignSpace = DEFAULT_SPACE
) -> list[ReramDesign]:
    return space.sample_designs(n, rng)


def space_cardinality(resolutions=PAPER_RESOLUTIONS) -> int:
    """Number of distinct designs given per-variable level counts."""
    total = 1
    for levels in resolutions:
        levels = int(levels)
        if levels < 1:
            raise ValueError("every variable needs at least one level")
        total *= levels
    return total


def fidelity_grid(n_levels: int) -> np.ndarray:
    """Evenly spaced fidelity levels in [0,1]; the top level is exactly 1.0.

    Fidelity vectors themselves are plain float arrays with one entry per
    objective (z_j = 1 is the highest fidelity for objective j).
    """
    if n_levels < 1:
        raise ValueError("need at least one fidelity level")
    if n_levels == 1:
        return np.array([1.0])
    return np.linspace(0.0, 1.0, n_levels)
