"""Run configuration: flat key=value files, validation, and hashing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from .warp import cosine_profile, product_profile, quarter_cosine_profile

__all__ = ["RunConfig", "parse_config", "load_config", "config_hash", "DEFAULT_CONFIG"]

_PROFILES = ("quarter-cosine", "product", "cosine")

# threads changes scheduling only, never results; it stays out of the hash
_NON_SEMANTIC = {"threads"}


@dataclass
class RunConfig:
    profile: str = "quarter-cosine"
    cosine_coeffs: tuple = ()
    n_list: tuple = (1, 2, 3)
    eps0: float = 0.3
    halvings: int = 1
    rings: int = 24
    levels_per_wrap: int = 32
    max_iter: int = 4000
    grad_tol: float = 5e-4
    mc_tol: float = 1e-3
    phi_star: float = 1.1
    theta_star: float = 0.8
    delta: float = 3.1
    monotone_planes: int = 16
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.profile not in _PROFILES:
            raise ConfigError(
                f"profile must be one of {', '.join(_PROFILES)}; got {self.profile!r}"
            )
        if self.profile == "cosine" and len(self.cosine_coeffs) == 0:
            raise ConfigError("profile 'cosine' requires cosine_coeffs")
        if not self.n_list:
            raise ConfigError("n_list must not be empty")
        if any((not isinstance(n, (int, np.integer))) or n < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be positive integers")
        if not (0.0 < self.eps0 <= np.pi / 8.0):
            raise ConfigError(f"eps0 = {self.eps0:.6g} outside (0, pi/8]")
        if self.halvings < 0:
            raise ConfigError("halvings must be >= 0")
        if self.rings < 8:
            raise ConfigError("rings must be >= 8")
        if self.levels_per_wrap < 8:
            raise ConfigError("levels_per_wrap must be >= 8")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.grad_tol <= 0 or self.mc_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if not (0.0 < self.delta < np.pi):
            raise ConfigError(f"delta = {self.delta:.6g} outside (0, pi)")
        if not (0.2 <= self.phi_star <= np.pi - 0.2):
            raise ConfigError("phi_star must stay at least 0.2 from the axes")
        if self.monotone_planes < 1:
            raise ConfigError("monotone_planes must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def build_profile(self):
        if self.profile == "quarter-cosine":
            return quarter_cosine_profile()
        if self.profile == "product":
            return product_profile()
        return cosine_profile(self.cosine_coeffs)

    def schedule(self):
        from .pipeline import ContinuationSchedule

        return ContinuationSchedule(
            eps0=self.eps0,
            halvings=self.halvings,
            rings=self.rings,
            levels_per_wrap=self.levels_per_wrap,
        )

    def solver(self):
        from .solver import SolveConfig

        return SolveConfig(
            max_iter=self.max_iter, grad_tol=self.grad_tol, mc_tol=self.mc_tol
        )

    def transversal(self):
        from .diagnostics import Transversal

        return Transversal(
            phi_star=self.phi_star, theta_star=self.theta_star, delta=self.delta
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_hash(cfg: RunConfig) -> str:
    """Hash of the semantic fields; stable across threads and field order."""
    lines = []
    for f in sorted(fields(cfg), key=lambda f: f.name):
        if f.name in _NON_SEMANTIC:
            continue
        lines.append(f"{f.name}={_format_value(getattr(cfg, f.name))}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


_INT_KEYS = {"halvings", "rings", "levels_per_wrap", "max_iter", "monotone_planes", "seed", "threads"}
_FLOAT_KEYS = {"eps0", "grad_tol", "mc_tol", "phi_star", "theta_star", "delta"}


def _parse_value(key: str, raw: str):
    if key == "profile":
        return raw
    if key == "n_list":
        try:
            return tuple(int(tok) for tok in raw.split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"n_list: {exc}") from None
    if key == "cosine_coeffs":
        try:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"cosine_coeffs: {exc}") from None
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} expects an integer, got {raw!r}") from None
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} expects a number, got {raw!r}") from None
    raise ConfigError(f"unknown key {key!r}")


def parse_config(text: str) -> RunConfig:
    """Parse a flat key=value config. Unknown keys are rejected."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key=value, got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


DEFAULT_CONFIG = """\
# surface run configuration
profile = quarter-cosine   # quarter-cosine | product | cosine
n_list = 1,2,3             # wrapping numbers to run
eps0 = 0.3                 # initial tube radius
halvings = 1               # continuation steps (radius halves each)
rings = 24                 # mesh rings across the band
levels_per_wrap = 32       # mesh levels per wrap
max_iter = 4000
grad_tol = 0.0005
mc_tol = 0.001
phi_star = 1.1             # transversal position
theta_star = 0.8
delta = 3.1                # transversal half-height
monotone_planes = 16
seed = 0
threads = 1
"""
