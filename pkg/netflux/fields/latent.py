"""Latent site variables Z = {Z_k} and their counter-based sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from netflux.errors import ConfigError
from netflux.fields.config import FieldConfig

Index = tuple[int, ...]
# checkerboard: float; poisson_pores: tuple of (center, radius); series_resistor: int
Payload = Any


def site_generator(seed: int, flat_index: int) -> np.random.Generator:
    """
    Independent stream for one lattice site.

    The stream depends only on (seed, flat_index), so redrawing one site
    never perturbs the draws of any other site.
    """
    if seed < 0 or seed >= 2**64:
        raise ConfigError(f"Seeds must be unsigned 64-bit integers, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(flat_index),))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class LatentState:
    """The i.i.d. site variables driving a coefficient field."""

    model_id: str
    d: int
    L: int
    sites: dict[Index, Payload] = field(default_factory=dict)
    # Extra non-periodic site Z_{L+1} of the dependent series chain
    tail: Optional[Payload] = None

    def site_indices(self) -> list[Index]:
        """All resamplable indices, period cell first in C order, then the tail."""
        indices = [tuple(int(i) for i in k) for k in np.ndindex(*((self.L,) * self.d))]
        if self.tail is not None:
            indices.append(self.tail_index)
        return indices

    @property
    def tail_index(self) -> Index:
        return (self.L,)

    def payload(self, k: Index) -> Payload:
        k = tuple(int(i) for i in k)
        if self.tail is not None and k == self.tail_index:
            return self.tail
        if k not in self.sites:
            raise ConfigError(f"Lattice index {k} is outside the period cell of size {self.L}")
        return self.sites[k]

    def values_array(self) -> np.ndarray:
        """Scalar payloads as an array of shape (L,)*d (checkerboard and series only)."""
        if self.model_id == "poisson_pores":
            raise ConfigError("Poisson sites carry pore lists, not scalars")
        values = np.empty((self.L,) * self.d)
        for k, value in self.sites.items():
            values[k] = value
        return values

    def to_dict(self) -> dict:
        def encode(payload):
            if self.model_id == "poisson_pores":
                return [[list(center), radius] for center, radius in payload]
            return payload

        return {
            "model_id": self.model_id,
            "d": self.d,
            "L": self.L,
            "sites": {",".join(str(i) for i in k): encode(v) for k, v in sorted(self.sites.items())},
            "tail": self.tail,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> LatentState:
        model_id = data["model_id"]

        def decode(payload):
            if model_id == "poisson_pores":
                return tuple((tuple(center), float(radius)) for center, radius in payload)
            return payload

        sites = {
            tuple(int(i) for i in key.split(",")): decode(value)
            for key, value in data["sites"].items()
        }
        return cls(model_id=model_id, d=data["d"], L=data["L"], sites=sites, tail=data.get("tail"))

    @classmethod
    def from_json(cls, text: str) -> LatentState:
        return cls.from_dict(json.loads(text))


def _flat_index(k: Index, L: int, d: int) -> int:
    if len(k) == 1 and d == 1 and k[0] == L:
        return L**d
    return int(np.ravel_multi_index(k, (L,) * d))


def _draw_payload(config: FieldConfig, rng: np.random.Generator) -> Payload:
    if config.model == "checkerboard":
        if config.law == "two_point":
            return config.a_hi if rng.random() < config.p else config.a_lo
        return config.a_lo + (config.a_hi - config.a_lo) * rng.random()

    if config.model == "poisson_pores":
        count = int(rng.poisson(config.mu))
        centers = rng.random((count, config.d))
        if config.radius_law == "fixed":
            radii = np.full(count, config.fixed_radius)
        else:
            # 1 - U lies in (0, 1], so radii lie in (0, r_max]
            radii = config.r_max * (1.0 - rng.random(count))
        return tuple(
            (tuple(float(c) for c in centers[i]), float(radii[i])) for i in range(count)
        )

    return int(rng.random() < config.p)


def check_compatible(z: LatentState, config: FieldConfig):
    if z.model_id != config.model or z.d != config.d or z.L != config.L:
        raise ConfigError(
            f"Latent state ({z.model_id}, d={z.d}, L={z.L}) does not match "
            f"config ({config.model}, d={config.d}, L={config.L})"
        )


def _check_index(z: LatentState, k) -> Index:
    k = tuple(int(i) for i in k)
    if z.tail is not None and k == z.tail_index:
        return k
    if len(k) != z.d or any(i < 0 or i >= z.L for i in k):
        raise ConfigError(f"Lattice index {k} is outside the period cell of size {z.L}")
    return k


def sample_latent(config: FieldConfig, seed: int) -> LatentState:
    """
    Draw every site of the period cell independently.

    Args:
        config: Validated field configuration
        seed: Unsigned 64-bit master seed

    Returns:
        LatentState with exactly L^d sites (plus the tail for the dependent series)
    """
    shape = (config.L,) * config.d
    sites = {}
    for k in np.ndindex(*shape):
        k = tuple(int(i) for i in k)
        sites[k] = _draw_payload(config, site_generator(seed, _flat_index(k, config.L, config.d)))

    tail = None
    if config.model == "series_resistor" and config.dependent:
        tail = _draw_payload(config, site_generator(seed, config.L**config.d))

    return LatentState(model_id=config.model, d=config.d, L=config.L, sites=sites, tail=tail)


def with_site(z: LatentState, k: Index, payload: Payload) -> LatentState:
    """Copy of z with site k replaced by payload; all other sites are shared."""
    k = _check_index(z, k)
    if z.tail is not None and k == z.tail_index:
        return LatentState(z.model_id, z.d, z.L, dict(z.sites), payload)
    sites = dict(z.sites)
    sites[k] = payload
    return LatentState(z.model_id, z.d, z.L, sites, z.tail)


def resample_site(z: LatentState, k: Index, seed: int, config: FieldConfig) -> LatentState:
    """Redraw only site k from its law using the stream of (seed, k)."""
    check_compatible(z, config)
    k = _check_index(z, k)
    payload = _draw_payload(config, site_generator(seed, _flat_index(k, z.L, z.d)))
    return with_site(z, k, payload)


def replace_sites(z: LatentState, source: LatentState, indices) -> LatentState:
    """Copy of z taking the payloads at indices from source (builds Z^A from Z')."""
    result = z
    for k in indices:
        result = with_site(result, k, source.payload(k))
    return result


def shift_latent(z: LatentState, shift) -> LatentState:
    """Translate the latent lattice periodically: new site k carries old site k - shift."""
    shift = tuple(int(s) for s in shift)
    if len(shift) != z.d:
        raise ConfigError(f"Shift {shift} has the wrong dimension for d={z.d}")
    sites = {}
    for k, payload in z.sites.items():
        target = tuple((k[ax] + shift[ax]) % z.L for ax in range(z.d))
        sites[target] = payload
    return LatentState(z.model_id, z.d, z.L, sites, z.tail)


def derive_seed(master_seed: int, *coordinates: int) -> int:
    """Unsigned 64-bit seed for the task at the given coordinates under master_seed."""
    if master_seed < 0 or master_seed >= 2**64:
        raise ConfigError(f"Seeds must be unsigned 64-bit integers, got {master_seed}")
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(c) for c in coordinates))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
