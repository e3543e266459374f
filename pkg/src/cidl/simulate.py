"""Synthetic movie generator with ground truth.

Each component gets a temporal trace (weighted spike train pushed
through a single-pole autoregressive filter) and a spatial map (a
rectified draw from a squared-exponential Gaussian process, windowed by
a truncated Gaussian bump).  One component may be left unwindowed to
mimic diffuse neuropil.  The movie is the outer-product mixture plus
clipped Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import CoefficientMaps, DataCube, Dictionary

# above this FOV side the GP is sampled on a coarse grid and upsampled
_GP_EXACT_MAX_SIDE = 64


@dataclass(frozen=True)
class SimConfig:
    n_frames: int = 500
    nx: int = 30
    ny: int = 30
    n_components: int = 14
    spike_rate: float = 0.04
    amp_low: float = 0.5
    amp_high: float = 1.5
    ar_pole: float = 0.7
    gp_length_scale: float = 3.0
    window_sigma: float = 2.0
    window_truncation_radius: float = 6.0
    map_peak: float = 1.0
    neuropil: bool = True
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not abs(self.ar_pole) < 1:
            raise ValidationError("ar_pole magnitude must be < 1")
        if self.n_components < 1:
            raise ValidationError("n_components must be >= 1")
        if not 0 <= self.spike_rate <= 1:
            raise ValidationError("spike_rate must lie in [0, 1]")
        if not (0 < self.amp_low <= self.amp_high):
            raise ValidationError("amplitude bounds must satisfy 0 < low <= high")
        for name in ("gp_length_scale", "window_sigma", "window_truncation_radius",
                     "map_peak"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if self.n_frames < 1 or self.nx < 1 or self.ny < 1:
            raise ValidationError("movie dimensions must be >= 1")


@dataclass
class GroundTruth:
    true_dictionary: Dictionary
    true_maps: CoefficientMaps
    spike_trains: list[list[tuple[int, float]]]
    noise_sigma: float
    # unclipped additive noise, kept so residual statistics can be checked
    noise: np.ndarray | None = None


def gen_spike_train(T: int, rate: float, amp_low: float, amp_high: float,
                    rng: np.random.Generator) -> list[tuple[int, float]]:
    """Independent per-frame events with uniform amplitudes."""
    if not 0 <= rate <= 1:
        raise ValidationError("rate must lie in [0, 1]")
    if not (0 < amp_low <= amp_high):
        raise ValidationError("amplitude bounds must satisfy 0 < low <= high")
    hits = rng.random(T) < rate
    amps = rng.uniform(amp_low, amp_high, size=T)
    return [(int(t), float(amps[t])) for t in np.nonzero(hits)[0]]


def ar_filter(events: list[tuple[int, float]], T: int, pole: float) -> np.ndarray:
    """Drive a single-pole AR filter with a sparse spike signal.

    x_t = pole * x_{t-1} + s_t with x_{-1} = 0.
    """
    if not abs(pole) < 1:
        raise ValidationError("pole magnitude must be < 1")
    s = np.zeros(T)
    for t, a in events:
        if not 0 <= t < T:
            raise ValidationError(f"event frame {t} outside [0, {T})")
        s[t] += a
    x = np.empty(T)
    acc = 0.0
    for t in range(T):
        acc = pole * acc + s[t]
        x[t] = acc
    return x


def _gp_draw(nx: int, ny: int, length_scale: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean GP sample with squared-exponential covariance, unit variance."""
    xs = np.arange(nx, dtype=np.float64)
    ys = np.arange(ny, dtype=np.float64)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    cov = np.exp(-0.5 * d2 / (length_scale * length_scale))
    cov[np.diag_indices_from(cov)] += 1e-10
    chol = np.linalg.cholesky(cov)
    z = rng.standard_normal(pts.shape[0])
    return (chol @ z).reshape(nx, ny)


def _gp_draw_coarse(nx: int, ny: int, length_scale: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Coarse-grid GP sample bilinearly upsampled; used for large FOVs."""
    stride = max(2, int(np.ceil(max(nx, ny) / _GP_EXACT_MAX_SIDE)))
    cx = max(2, -(-nx // stride) + 1)
    cy = max(2, -(-ny // stride) + 1)
    coarse = _gp_draw(cx, cy, max(length_scale / stride, 0.5), rng)
    xi = np.arange(nx) / stride
    yi = np.arange(ny) / stride
    x0 = np.minimum(xi.astype(int), cx - 2)
    y0 = np.minimum(yi.astype(int), cy - 2)
    fx = (xi - x0)[:, None]
    fy = (yi - y0)[None, :]
    c00 = coarse[np.ix_(x0, y0)]
    c10 = coarse[np.ix_(x0 + 1, y0)]
    c01 = coarse[np.ix_(x0, y0 + 1)]
    c11 = coarse[np.ix_(x0 + 1, y0 + 1)]
    return (c00 * (1 - fx) * (1 - fy) + c10 * fx * (1 - fy)
            + c01 * (1 - fx) * fy + c11 * fx * fy)


def gen_spatial_map(nx: int, ny: int, length_scale: float, center,
                    window_sigma: float, truncation_radius: float,
                    rng: np.random.Generator, windowed: bool = True) -> np.ndarray:
    """One component's spatial map.

    GP draw, rectified at zero; if windowed, multiplied by a Gaussian bump
    at `center` and zeroed beyond the truncation radius.
    """
    if max(nx, ny) > _GP_EXACT_MAX_SIDE:
        g = _gp_draw_coarse(nx, ny, length_scale, rng)
    else:
        g = _gp_draw(nx, ny, length_scale, rng)
    m = np.maximum(g, 0.0)
    if windowed:
        cx, cy = center
        xs = np.arange(nx)[:, None] - cx
        ys = np.arange(ny)[None, :] - cy
        r2 = xs * xs + ys * ys
        bump = np.exp(-0.5 * r2 / (window_sigma * window_sigma))
        bump[r2 > truncation_radius * truncation_radius] = 0.0
        m = m * bump
    return m


def simulate_movie(cfg: SimConfig) -> tuple[DataCube, GroundTruth]:
    """Build a movie with full ground truth, deterministic per seed.

    Components use independent RNG streams derived from (seed, index),
    so generation order cannot affect the output.
    """
    T, nx, ny, K = cfg.n_frames, cfg.nx, cfg.ny, cfg.n_components
    traces = np.zeros((T, K))
    maps = np.zeros((nx, ny, K))
    spikes: list[list[tuple[int, float]]] = []

    for k in range(K):
        rng = np.random.default_rng([cfg.seed, k])
        ev = gen_spike_train(T, cfg.spike_rate, cfg.amp_low, cfg.amp_high, rng)
        # redraw unlucky components so every trace carries comparable
        # temporal energy; the binomial tail otherwise produces traces
        # too weak to recover
        min_events = max(1, int(round(0.75 * cfg.spike_rate * T)))
        attempts = 0
        while len(ev) < min_events and cfg.spike_rate > 0 and attempts < 100:
            ev = gen_spike_train(T, cfg.spike_rate, cfg.amp_low, cfg.amp_high, rng)
            attempts += 1
        spikes.append(ev)
        traces[:, k] = ar_filter(ev, T, cfg.ar_pole)

        windowed = not (cfg.neuropil and k == K - 1)
        margin = min(cfg.window_sigma, min(nx, ny) / 4)
        # rectified GP draws vary wildly in amplitude and support, so
        # rescale each map to unit peak, and redraw ones whose support is
        # a sliver of pixels (a mostly-negative GP sample near the window
        # center) since those are invisible in the movie
        min_area = min(20, max(1, nx * ny // 4))
        best, best_area = None, -1
        for _attempt in range(100):
            center = (rng.uniform(margin, nx - 1 - margin),
                      rng.uniform(margin, ny - 1 - margin))
            m = gen_spatial_map(
                nx, ny, cfg.gp_length_scale, center, cfg.window_sigma,
                cfg.window_truncation_radius, rng, windowed=windowed,
            )
            area = int(np.count_nonzero(m))
            if area > best_area:
                best, best_area = m, area
            if area >= min_area:
                break
        if best_area > 0:
            maps[:, :, k] = best * (cfg.map_peak / best.max())

    if cfg.ar_pole < 0:
        # an alternating-sign pole produces signed traces; rectify so the
        # ground truth satisfies the model's non-negativity
        traces = np.maximum(traces, 0.0)

    recon = np.einsum("tk,xyk->txy", traces, maps)
    noise_rng = np.random.default_rng([cfg.seed, K, 0xA5])
    noise = noise_rng.normal(0.0, cfg.noise_sigma, size=recon.shape)
    movie = np.maximum(recon + noise, 0.0)

    truth = GroundTruth(
        true_dictionary=Dictionary(traces),
        true_maps=CoefficientMaps(maps),
        spike_trains=spikes,
        noise_sigma=cfg.noise_sigma,
        noise=noise,
    )
    return DataCube(movie), truth
