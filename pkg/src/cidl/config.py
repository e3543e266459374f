"""Run configuration: a strict [section] key = value text format.

Unknown sections or keys are rejected, values are revalidated against
the model invariants, and parsing is locale-independent (decimal point
only).  Missing keys take the published defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, ValidationError
from .model import ModelParams, SpatialKernel
from .simulate import SimConfig
from .sparse import LassoSolverOptions


@dataclass(frozen=True)
class KernelConfig:
    size: int = 7
    variance: float = 3.0

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValidationError("kernel size must be odd and >= 1")
        if not self.variance > 0:
            raise ValidationError("kernel variance must be positive")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    n_atoms: int
    kernel: KernelConfig
    solver: LassoSolverOptions
    sim: SimConfig

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(ModelParams(), 16, KernelConfig(), LassoSolverOptions(), SimConfig())


_MODEL_KEYS = {
    "kappa1": float, "kappa2": float, "kappa3": float,
    "xi": float, "beta": float, "sigma_y_sq": float,
    "n_reweight": int, "outer_tol": float, "max_outer_iters": int,
    "k": int,
}
_KERNEL_KEYS = {"size": int, "variance": float}
_SOLVER_KEYS = {"max_iters": int, "rel_tol": float, "step_rule": str}
_SIM_KEYS = {
    "n_frames": int, "nx": int, "ny": int, "n_components": int,
    "spike_rate": float, "amp_low": float, "amp_high": float,
    "ar_pole": float, "gp_length_scale": float, "window_sigma": float,
    "window_truncation_radius": float, "map_peak": float, "neuropil": bool,
    "noise_sigma": float, "seed": int,
}
_SECTIONS = {
    "model": _MODEL_KEYS,
    "kernel": _KERNEL_KEYS,
    "solver": _SOLVER_KEYS,
    "sim": _SIM_KEYS,
}


def _convert(raw: str, typ, key: str, lineno: int):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            v = float(raw)
            if math.isnan(v) or math.isinf(v):
                raise ValueError(raw)
            return v
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for key {key!r}") from None


def parse_config(text: str) -> RunConfig:
    """Strictly parse configuration text; missing keys take defaults."""
    values: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header")
            name = stripped[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            section = name
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, raw = stripped.partition("=")
        key = key.strip().lower()
        if key not in _SECTIONS[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        values[section][key] = _convert(raw, _SECTIONS[section][key], key, lineno)

    try:
        model_kv = dict(values["model"])
        n_atoms = int(model_kv.pop("k", 16))
        if n_atoms < 1:
            raise ValidationError("k must be >= 1")
        model = ModelParams(**model_kv)
        kernel = KernelConfig(**values["kernel"])
        solver = LassoSolverOptions(**values["solver"])
        sim = SimConfig(**values["sim"])
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(model, n_atoms, kernel, solver, sim)


def serialize_config(cfg: RunConfig) -> str:
    """Write a config back out; parse(serialize(c)) == c."""
    out = ["[model]"]
    m = cfg.model
    out += [
        f"kappa1 = {m.kappa1!r}", f"kappa2 = {m.kappa2!r}", f"kappa3 = {m.kappa3!r}",
        f"xi = {m.xi!r}", f"beta = {m.beta!r}", f"sigma_y_sq = {m.sigma_y_sq!r}",
        f"n_reweight = {m.n_reweight}", f"outer_tol = {m.outer_tol!r}",
        f"max_outer_iters = {m.max_outer_iters}", f"k = {cfg.n_atoms}",
        "", "[kernel]",
        f"size = {cfg.kernel.size}", f"variance = {cfg.kernel.variance!r}",
        "", "[solver]",
        f"max_iters = {cfg.solver.max_iters}", f"rel_tol = {cfg.solver.rel_tol!r}",
        f"step_rule = {cfg.solver.step_rule}",
        "", "[sim]",
    ]
    for f in fields(SimConfig):
        out.append(f"{f.name} = {getattr(cfg.sim, f.name)!r}"
                   if not isinstance(getattr(cfg.sim, f.name), bool)
                   else f"{f.name} = {getattr(cfg.sim, f.name)}")
    return "\n".join(out) + "\n"


def make_gaussian_kernel(size: int, variance: float) -> SpatialKernel:
    """Isotropic Gaussian taps on a size x size grid, normalized to sum 1."""
    if size < 1 or size % 2 == 0:
        raise ValidationError("kernel size must be odd and >= 1")
    if not variance > 0:
        raise ValidationError("kernel variance must be positive")
    half = size // 2
    d = np.arange(-half, half + 1, dtype=np.float64)
    g2 = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * variance))
    return SpatialKernel(g2 / g2.sum())


def kernel_from_config(cfg: RunConfig) -> SpatialKernel:
    return make_gaussian_kernel(cfg.kernel.size, cfg.kernel.variance)
