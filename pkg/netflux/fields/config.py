"""Field model configuration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, fields
from typing import Literal, Optional

from netflux.errors import ConfigError

ModelName = Literal["checkerboard", "poisson_pores", "series_resistor"]


@dataclass
class FieldConfig:
    """
    Describes one random coefficient model on the period cell D_L = [0, L)^d.

    The JSON form of this object uses exactly these field names.
    """

    model: ModelName = "checkerboard"
    d: int = 2
    L: int = 4
    a_lo: float = 1.0
    a_hi: float = 4.0
    # Checkerboard site law: "two_point" puts mass p on a_hi, "uniform" is U[a_lo, a_hi]
    law: Literal["two_point", "uniform"] = "two_point"
    # Bernoulli parameter shared by the two-point law and the series model
    p: float = 0.5
    mu: float = 1.0
    r_max: float = 0.4
    radius_law: Literal["fixed", "uniform"] = "fixed"
    radius: Optional[float] = None  # None means r_max
    dependent: bool = False
    m: int = 4

    MODELS = ("checkerboard", "poisson_pores", "series_resistor")

    def __post_init__(self):
        if self.model not in self.MODELS:
            raise ConfigError(f"Unknown model {self.model!r}")
        if self.d not in (1, 2, 3):
            raise ConfigError(f"Dimension must be 1, 2 or 3, got {self.d}")
        if self.L < 1:
            raise ConfigError(f"Period L must be a positive integer, got {self.L}")
        if self.m < 1:
            raise ConfigError(f"Resolution m must be a positive integer, got {self.m}")
        if not self.a_lo > 0:
            raise ConfigError(f"a_lo must be positive (uniform ellipticity), got {self.a_lo}")
        if self.a_lo > self.a_hi:
            raise ConfigError(f"a_lo={self.a_lo} exceeds a_hi={self.a_hi}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must lie in [0, 1], got {self.p}")
        if self.law not in ("two_point", "uniform"):
            raise ConfigError(f"Unknown checkerboard law {self.law!r}")
        if self.model == "poisson_pores":
            if not self.mu > 0:
                raise ConfigError(f"Poisson intensity mu must be positive, got {self.mu}")
            if not self.r_max > 0:
                raise ConfigError(f"r_max must be positive, got {self.r_max}")
            if self.radius_law not in ("fixed", "uniform"):
                raise ConfigError(f"Unknown radius law {self.radius_law!r}")
            if self.radius is not None and not 0 < self.radius <= self.r_max:
                raise ConfigError(f"Fixed radius must lie in (0, r_max], got {self.radius}")
        if self.model == "series_resistor" and self.d != 1:
            raise ConfigError("The series resistor model only exists for d = 1")

    @property
    def h(self) -> float:
        """Grid spacing."""
        return 1.0 / self.m

    @property
    def cells_per_axis(self) -> int:
        return self.m * self.L

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis**self.d

    @property
    def tau(self) -> float:
        """Locality radius: a(x) ignores Z_k whenever dist(x, k) >= tau."""
        if self.model == "poisson_pores":
            return self.r_max + math.sqrt(self.d)
        return math.sqrt(self.d)

    @property
    def fixed_radius(self) -> float:
        return self.r_max if self.radius is None else self.radius

    def ellipticity_bounds(self) -> tuple[float, float]:
        """Return (a_*, a^*) for the realized field."""
        if self.model == "series_resistor" and self.dependent:
            # a_k = 1 / (2 + Z_{k+1} - Z_k) with Bernoulli Z
            return 1.0 / 3.0, 1.0
        return self.a_lo, self.a_hi

    def is_deterministic(self) -> bool:
        """True when every latent site has a one-point law."""
        lo, hi = self.ellipticity_bounds()
        if lo == hi:
            return True
        if self.model == "checkerboard":
            return self.law == "two_point" and self.p in (0.0, 1.0)
        if self.model == "series_resistor":
            return self.p in (0.0, 1.0)
        return False

    def replace(self, **changes) -> FieldConfig:
        data = asdict(self)
        data.update(changes)
        return FieldConfig(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> FieldConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown FieldConfig keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> FieldConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"FieldConfig is not valid JSON: {e}") from e
        return cls.from_dict(data)
