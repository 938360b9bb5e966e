"""Experiment configuration: schema, TOML I/O and a stable hash."""
from __future__ import annotations

import hashlib
import json
import math
import sys
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .bernstein import BernsteinSymbol, SymbolDomainError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w

KINDS = ("symbol-table", "simulate", "weights", "solve", "potential-check", "lifetime", "local-time",
         "converge", "distribution")

TEST_FUNCTIONS = ("phi1", "one", "sin", "bump")


class ConfigError(ValueError):
    """Schema violation; ``errors`` lists ``(key, message)`` pairs."""

    def __init__(self, errors: list):
        self.errors = errors
        super().__init__("; ".join(f"{k}: {m}" for k, m in errors))


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SymbolSpec(_Model):
    kind: Literal["identity", "stable", "generalized_stable", "gamma", "inverse_gaussian", "triplet"]
    beta: Optional[float] = None
    alpha: Optional[float] = None
    gam: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    sigma: Optional[float] = None
    mu: Optional[float] = None
    density: Optional[str] = None
    drift: Optional[float] = None
    killing_rate: Optional[float] = None

    @model_validator(mode="after")
    def _build(self):
        try:
            self.build()
        except KeyError as exc:
            raise ValueError(f"missing parameter {exc.args[0]!r} for kind {self.kind!r}") from exc
        except (SymbolDomainError, ValueError) as exc:
            raise ValueError(str(exc)) from exc
        return self

    def build(self) -> BernsteinSymbol:
        return BernsteinSymbol.from_dict(self.model_dump(exclude_none=True))


class GeneratorSpec(_Model):
    l: float = 0.0
    ell: float = math.pi
    regime: Literal["dirichlet", "neumann", "robin"] = "dirichlet"
    robin_c: Optional[float] = None
    alpha: Optional[float] = None
    eta: Optional[float] = None
    eps: Optional[float] = None
    n_cells: int = Field(400, ge=2)
    layer_cells: int = Field(8, ge=8)
    ns: list[int] = Field(default_factory=lambda: [4, 8, 16, 32, 64])

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {v}")
        return v

    @field_validator("eta", "eps")
    @classmethod
    def _positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("robin_c")
    @classmethod
    def _c(cls, v):
        if v is not None and v < 0:
            raise ValueError("robin_c must be >= 0")
        return v

    @model_validator(mode="after")
    def _order(self):
        if not self.l < self.ell:
            raise ValueError("need l < ell")
        if self.ns != sorted(set(self.ns)) or any(n < 1 for n in self.ns):
            raise ValueError("ns must be strictly increasing positive integers")
        if self.regime == "robin" and self.robin_c is None:
            raise ValueError("regime 'robin' needs robin_c")
        return self

    def regime_value(self):
        return ("robin", self.robin_c) if self.regime == "robin" else self.regime


class MCSpec(_Model):
    n_paths: int = Field(10_000, ge=1)
    dt: float = Field(1e-3, gt=0)
    ds: Optional[float] = Field(None, gt=0)
    x0: float = math.pi / 2
    workers: int = Field(1, ge=1)
    t_max: float = Field(200.0, gt=0)
    estimator: Literal["exact", "occupation"] = "exact"


class Grids(_Model):
    lam: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    t: list[float] = Field(default_factory=lambda: [0.25, 1.0])
    mu: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    c: list[float] = Field(default_factory=lambda: [1.0])
    x: Optional[list[float]] = None

    @field_validator("lam")
    @classmethod
    def _lam(cls, v):
        if any(not x > 0 for x in v):
            raise ValueError("lambda values must be positive")
        return v

    @field_validator("t")
    @classmethod
    def _t(cls, v):
        if any(not x >= 0 for x in v):
            raise ValueError("times must be >= 0")
        return v


class ExperimentConfig(_Model):
    kind: Literal["symbol-table", "simulate", "weights", "solve", "potential-check", "lifetime", "local-time",
                  "converge", "distribution"]
    name: str = "experiment"
    seed: int = Field(0, ge=0, lt=2 ** 63)
    symbols: list[SymbolSpec] = Field(default_factory=list)
    generator: GeneratorSpec = Field(default_factory=GeneratorSpec)
    mc: MCSpec = Field(default_factory=MCSpec)
    grids: Grids = Field(default_factory=Grids)
    f: Literal["phi1", "one", "sin", "bump"] = "phi1"
    thresholds: dict[str, float] = Field(default_factory=dict)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _needs_symbol(self):
        if self.kind != "converge" and not self.symbols and self.kind != "symbol-table":
            raise ValueError(f"kind {self.kind!r} needs at least one entry in symbols")
        return self

    def canonical(self) -> dict:
        d = self.model_dump(mode="json", exclude_none=True)
        d.pop("output_dir", None)
        return d

    def hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _loc(err: dict) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def from_dict(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([(_loc(e), e["msg"]) for e in exc.errors()]) from None


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([("<file>", f"TOML parse error: {exc}")]) from None
    return from_dict(data)


def load(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode()
    except UnicodeDecodeError:
        raise ConfigError([("<file>", "config is not UTF-8 text")]) from None
    return loads(text)


def dumps(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))
