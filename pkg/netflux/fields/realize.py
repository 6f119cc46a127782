"""Realization of the coefficient field a(x, Z) on the cell-centered grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from netflux.errors import ConfigError, PreconditionError
from netflux.fields.config import FieldConfig
from netflux.fields.geometry import axis_distance, cell_centers
from netflux.fields.latent import LatentState, check_compatible


@dataclass
class CoefficientField:
    """Scalar conductivity sampled at cell centers, periodic in every axis."""

    values: np.ndarray
    h: float
    d: int
    L: int
    m: int

    @property
    def n(self) -> int:
        return self.m * self.L

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def volume(self) -> float:
        return float(self.L**self.d)

    @classmethod
    def constant(cls, value: float, d: int, L: int, m: int) -> CoefficientField:
        n = m * L
        return cls(values=np.full((n,) * d, float(value)), h=1.0 / m, d=d, L=L, m=m)

    def shifted(self, cells) -> CoefficientField:
        """Cyclic shift by a number of cells along each axis."""
        values = np.roll(self.values, tuple(int(c) for c in cells), axis=tuple(range(self.d)))
        return CoefficientField(values=values, h=self.h, d=self.d, L=self.L, m=self.m)


def _expand_cells(site_values: np.ndarray, m: int) -> np.ndarray:
    """Repeat each unit-cube value over its m^d cells."""
    values = site_values
    for ax in range(site_values.ndim):
        values = np.repeat(values, m, axis=ax)
    return values


def _pore_values(z: LatentState, config: FieldConfig) -> np.ndarray:
    d, L, m = config.d, config.L, config.m
    n = m * L
    h = 1.0 / m
    centers = cell_centers(n, h)
    inside = np.zeros((n,) * d, dtype=bool)

    for k, pores in z.sites.items():
        for center, radius in pores:
            position = [k[ax] + center[ax] for ax in range(d)]
            # Only cells within the pore's bounding box can be inside it
            windows = []
            for ax in range(d):
                lo = math.floor((position[ax] - radius) / h) - 1
                hi = math.ceil((position[ax] + radius) / h) + 1
                idx = np.unique(np.arange(lo, hi + 1) % n)
                windows.append(idx)
            sq = np.zeros(tuple(len(w) for w in windows))
            for ax in range(d):
                shape = [1] * d
                shape[ax] = len(windows[ax])
                dist = axis_distance(centers[windows[ax]], position[ax], L)
                sq = sq + dist.reshape(shape) ** 2
            inside[np.ix_(*windows)] |= sq < radius**2

    return np.where(inside, config.a_hi, config.a_lo)


def series_conductivities(config: FieldConfig, z: LatentState) -> list[float]:
    """
    Conductivities a_1..a_L of the 1D resistor chain.

    The dependent chain uses a_k = 1 / (2 + Z_{k+1} - Z_k) with the extra
    tail site playing Z_{L+1}; the independent chain maps Z_k in {0, 1}
    linearly onto {a_lo, a_hi}.
    """
    if config.model != "series_resistor" or config.d != 1:
        raise PreconditionError("series_conductivities needs the d = 1 series resistor model")
    check_compatible(z, config)
    chain = [z.sites[(k,)] for k in range(config.L)]
    if config.dependent:
        if z.tail is None:
            raise ConfigError("The dependent series chain needs its tail site")
        chain.append(z.tail)
        return [1.0 / (2.0 + chain[k + 1] - chain[k]) for k in range(config.L)]
    return [config.a_lo + (config.a_hi - config.a_lo) * chain[k] for k in range(config.L)]


def realize(z: LatentState, config: FieldConfig) -> CoefficientField:
    """
    Evaluate a(x, Z) at every cell center.

    Args:
        z: Latent state sampled under config
        config: Field configuration

    Returns:
        CoefficientField with (mL)^d values in [a_*, a^*]
    """
    check_compatible(z, config)

    if config.model == "checkerboard":
        values = _expand_cells(z.values_array(), config.m)
    elif config.model == "poisson_pores":
        values = _pore_values(z, config)
    else:
        values = _expand_cells(np.asarray(series_conductivities(config, z)), config.m)

    return CoefficientField(
        values=np.asarray(values, dtype=float), h=config.h, d=config.d, L=config.L, m=config.m
    )
