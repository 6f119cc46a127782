"""Campaign documents: parsing, CLI overrides and result records."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, field, fields
from typing import Optional, Union

from netflux.errors import ConfigError
from netflux.fields.config import FieldConfig
from netflux.resample.estimates import McParams
from netflux.solver.cg import SolveConfig


@dataclass
class ExperimentSpec:
    """One campaign document."""

    model: FieldConfig = field(default_factory=FieldConfig)
    dims_and_sizes: list[tuple[int, int]] = field(default_factory=lambda: [(2, 4), (2, 8), (2, 16)])
    # None selects the default sweep {0, 1/L^2}
    beta: Union[None, float, list[float]] = None
    replicas: int = 200
    master_seed: int = 0
    campaigns: list[str] = field(default_factory=lambda: ["scaling"])
    output_dir: str = "results"
    # None defers to RunSettings.workers
    workers: Optional[int] = None
    solve: SolveConfig = field(default_factory=SolveConfig)
    mc: McParams = field(default_factory=McParams)
    subsample_j: bool = False
    # Random (k, j) pairs per replica in the bound audit
    audit_pairs: int = 8
    # Run the normal approximation bound in the bound audit and on the smallest L of normality runs
    normal_bound: bool = False
    # Fields per size in the Green's function study
    green_fields: int = 4
    # Random (x, y) cell pairs per field checked for G(x, y) = G(y, x)
    symmetry_pairs: int = 10
    wk_audit: bool = True

    CAMPAIGNS = ("scaling", "normality", "efron_stein", "bound_audit", "greens_decay", "counterexample")

    def __post_init__(self):
        self.dims_and_sizes = [tuple(int(v) for v in pair) for pair in self.dims_and_sizes]
        for pair in self.dims_and_sizes:
            if len(pair) != 2 or pair[0] not in (1, 2, 3) or pair[1] < 1:
                raise ConfigError(f"Invalid (d, L) pair {pair}")
        unknown = [c for c in self.campaigns if c not in self.CAMPAIGNS]
        if unknown:
            raise ConfigError(f"Unknown campaigns {unknown}; choose from {list(self.CAMPAIGNS)}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.symmetry_pairs < 1:
            raise ConfigError(f"symmetry_pairs must be positive, got {self.symmetry_pairs}")
        if self.replicas < 1:
            raise ConfigError(f"replicas must be positive, got {self.replicas}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")
        for value in self.beta if isinstance(self.beta, list) else [self.beta]:
            if value is not None and value < 0:
                raise ConfigError(f"beta must be non-negative, got {value}")

    def betas_for(self, L: int) -> list[float]:
        """The beta values run at period L, in sweep order."""
        if self.beta is None:
            return [0.0, 1.0 / L**2]
        if isinstance(self.beta, list):
            return [float(b) for b in self.beta]
        return [float(self.beta)]

    def field_config(self, d: int, L: int) -> FieldConfig:
        return self.model.replace(d=d, L=L)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["dims_and_sizes"] = [list(pair) for pair in self.dims_and_sizes]
        return data

    def spec_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown campaign keys: {sorted(unknown)}")
        data = dict(data)
        try:
            if "model" in data:
                data["model"] = FieldConfig.from_dict(data["model"])
            if "solve" in data:
                data["solve"] = SolveConfig(**data["solve"])
            if "mc" in data:
                data["mc"] = McParams(**data["mc"])
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid campaign document: {e}") from e


def _decode(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """
    Apply CLI overrides of the form --dotted.path value to a campaign document.

    Values are decoded as JSON and fall back to plain strings.
    """
    data = json.loads(json.dumps(data))
    i = 0
    while i < len(overrides):
        flag = overrides[i]
        if not flag.startswith("--") or len(flag) == 2:
            raise ConfigError(f"Expected an override flag, got {flag!r}")
        if "=" in flag:
            path, text = flag[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(overrides):
                raise ConfigError(f"Override {flag} has no value")
            path, text = flag[2:], overrides[i + 1]
            i += 2
        keys = path.replace("-", "_").split(".")
        target = data
        for key in keys[:-1]:
            target = target.setdefault(key, {})
            if not isinstance(target, dict):
                raise ConfigError(f"Cannot override inside non-object key {key!r}")
        target[keys[-1]] = _decode(text)
    return data


class SpecParser:
    """Parser for JSON campaign documents."""

    @staticmethod
    def read(filepath: str) -> dict:
        try:
            with open(filepath, "r") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{filepath} is not valid JSON: {e}") from e
        except OSError as e:
            raise ConfigError(f"Cannot read {filepath}: {e}") from e

    @staticmethod
    def load(filepath: str, overrides: Optional[list[str]] = None) -> ExperimentSpec:
        """
        Load a campaign document from a JSON file.

        Args:
            filepath: Path to the JSON campaign document
            overrides: Optional CLI overrides (see apply_overrides)

        Returns:
            Validated ExperimentSpec
        """
        data = SpecParser.read(filepath)
        if overrides:
            data = apply_overrides(data, overrides)
        return ExperimentSpec.from_dict(data)


@dataclass
class ExperimentResult:
    """Statistics of one campaign at one (d, L, beta); L is None for cross-size summaries."""

    campaign: str
    model: str
    d: int
    L: Optional[int]
    beta: Optional[float]
    statistics: dict[str, float] = field(default_factory=dict)
    flags: dict[str, bool] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    wall_time: float = 0.0
    solver_stats: dict[str, float] = field(default_factory=dict)

    def key(self) -> str:
        size = "all" if self.L is None else str(self.L)
        beta = "all" if self.beta is None else repr(self.beta)
        return f"{self.campaign}/d{self.d}/L{size}/beta{beta}"

    def rows(self):
        """Tidy (campaign, model, d, L, beta, statistic, value) tuples."""
        head = (self.campaign, self.model, self.d, self.L, self.beta)
        for name, value in self.statistics.items():
            yield head + (name, value)
        for name, value in self.solver_stats.items():
            yield head + (f"solver_{name}", value)
        for name, value in self.flags.items():
            yield head + (f"flag_{name}", int(bool(value)))
