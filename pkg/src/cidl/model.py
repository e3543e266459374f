"""Core domain types and objective evaluation.

The data model is a fluorescence movie Y (T frames of Nx x Ny pixels)
explained as a non-negative combination of K temporal traces: at each
pixel, y = Phi @ a + noise, with a sparse and non-negative.  All arrays
are stored float64; coefficient tensors are pixel-major so a fixed pixel
gives a contiguous K-vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError


def _as_float64(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class DataCube:
    """A T x Nx x Ny movie of fluorescence samples."""

    data: np.ndarray
    frame_rate_hz: float | None = None

    def __post_init__(self):
        arr = _as_float64(self.data, "DataCube.data")
        if arr.ndim != 3:
            raise DimensionError(f"DataCube expects 3 axes, got {arr.ndim}")
        if min(arr.shape) < 1:
            raise ValidationError("DataCube axes must all be >= 1")
        if self.frame_rate_hz is not None and not self.frame_rate_hz > 0:
            raise ValidationError("frame_rate_hz must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def fov_shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.data.shape[1] * self.data.shape[2]

    def as_matrix(self) -> np.ndarray:
        """Movie as a (T, Nx*Ny) matrix, pixels in row-major order."""
        return self.data.reshape(self.n_frames, -1)


@dataclass(frozen=True)
class Dictionary:
    """K temporal traces as the columns of a (T, K) non-negative matrix."""

    traces: np.ndarray

    def __post_init__(self):
        arr = _as_float64(self.traces, "Dictionary.traces")
        if arr.ndim != 2:
            raise DimensionError(f"Dictionary expects 2 axes, got {arr.ndim}")
        if arr.shape[1] < 1:
            raise ValidationError("Dictionary needs at least one column")
        if np.any(arr < 0):
            raise ValidationError("Dictionary entries must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "traces", arr)

    @property
    def n_frames(self) -> int:
        return self.traces.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.traces.shape[1]


@dataclass(frozen=True)
class CoefficientMaps:
    """Per-pixel presence strengths, shape (Nx, Ny, K), non-negative."""

    maps: np.ndarray

    def __post_init__(self):
        arr = _as_float64(self.maps, "CoefficientMaps.maps")
        if arr.ndim != 3:
            raise DimensionError(f"CoefficientMaps expects 3 axes, got {arr.ndim}")
        if np.any(arr < 0):
            raise ValidationError("CoefficientMaps entries must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "maps", arr)

    @property
    def n_atoms(self) -> int:
        return self.maps.shape[2]

    @property
    def fov_shape(self) -> tuple[int, int]:
        return self.maps.shape[0], self.maps.shape[1]

    def as_matrix(self) -> np.ndarray:
        """Coefficients as a (K, Nx*Ny) matrix, pixels in row-major order."""
        return self.maps.reshape(-1, self.maps.shape[2]).T

    def slice(self, k: int) -> np.ndarray:
        """The 2D spatial map of component k."""
        return self.maps[:, :, k]


@dataclass(frozen=True)
class WeightMaps:
    """Reweighted-l1 penalty weights, shape (Nx, Ny, K), strictly positive."""

    weights: np.ndarray

    def __post_init__(self):
        arr = _as_float64(self.weights, "WeightMaps.weights")
        if arr.ndim != 3:
            raise DimensionError(f"WeightMaps expects 3 axes, got {arr.ndim}")
        if np.any(arr <= 0):
            raise ValidationError("WeightMaps entries must be strictly positive")
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    def as_matrix(self) -> np.ndarray:
        return self.weights.reshape(-1, self.weights.shape[2]).T


@dataclass(frozen=True)
class SpatialKernel:
    """Odd-sized 2D convolution kernel with non-negative taps."""

    kernel: np.ndarray

    def __post_init__(self):
        arr = _as_float64(self.kernel, "SpatialKernel.kernel")
        if arr.ndim != 2:
            raise DimensionError("SpatialKernel must be 2D")
        if arr.shape[0] % 2 == 0 or arr.shape[1] % 2 == 0:
            raise ValidationError("SpatialKernel sides must be odd")
        if np.any(arr < 0):
            raise ValidationError("SpatialKernel taps must be non-negative")
        if not np.any(arr > 0):
            raise ValidationError("SpatialKernel needs at least one nonzero tap")
        arr.setflags(write=False)
        object.__setattr__(self, "kernel", arr)


@dataclass(frozen=True)
class ModelParams:
    """Hyperparameters of the learning problem."""

    sigma_y_sq: float = 0.18
    xi: float = 2.0
    beta: float = 0.1
    kappa1: float = 0.3
    kappa2: float = 0.4
    kappa3: float = 0.2
    n_reweight: int = 3
    outer_tol: float = 1e-5
    max_outer_iters: int = 100

    def __post_init__(self):
        for name in ("sigma_y_sq", "xi", "beta", "outer_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("kappa1", "kappa2", "kappa3"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if int(self.n_reweight) < 1:
            raise ValidationError("n_reweight must be >= 1")
        if int(self.max_outer_iters) < 1:
            raise ValidationError("max_outer_iters must be >= 1")

    @property
    def kappas(self) -> tuple[float, float, float]:
        return self.kappa1, self.kappa2, self.kappa3


def _check_vec(x, n: int, name: str) -> np.ndarray:
    arr = _as_float64(x, name)
    if arr.shape != (n,):
        raise DimensionError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


def pixel_objective(y, phi: Dictionary, a, lam, sigma_y_sq: float) -> float:
    """Weighted non-negative lasso cost at one pixel.

    (1/(2 sigma_y^2)) * ||y - Phi a||^2 + sum_k lam_k a_k.  Since a >= 0
    the penalty needs no absolute value.
    """
    T, K = phi.traces.shape
    y = _check_vec(y, T, "y")
    a = _check_vec(a, K, "a")
    lam = _check_vec(lam, K, "lam")
    if np.any(a < 0):
        raise ValidationError("a must be non-negative")
    if np.any(lam <= 0):
        raise ValidationError("lam must be strictly positive")
    if not sigma_y_sq > 0:
        raise ValidationError("sigma_y_sq must be positive")
    r = y - phi.traces @ a
    return float(0.5 / sigma_y_sq * (r @ r) + lam @ a)


def cross_trace_penalty(traces: np.ndarray) -> float:
    """Sum of inner products over unordered distinct column pairs.

    Equals the off-diagonal mass of the Gram matrix counted once per
    pair; non-negative because the traces are.
    """
    col_sum = traces.sum(axis=1)
    return float(0.5 * (col_sum @ col_sum - np.sum(traces * traces)))


def full_objective(
    Y: DataCube,
    phi: Dictionary,
    A: CoefficientMaps,
    phi_prev: Dictionary,
    params: ModelParams,
    Lam: WeightMaps,
) -> float:
    """Complete alternating-minimization cost: data + sparsity + dictionary penalties."""
    _check_shapes(Y, phi, A)
    if phi_prev.traces.shape != phi.traces.shape:
        raise DimensionError("phi_prev shape does not match phi")
    if Lam.weights.shape != A.maps.shape:
        raise DimensionError("weights shape does not match coefficients")
    Ym = Y.as_matrix()
    Am = A.as_matrix()
    R = Ym - phi.traces @ Am
    data = 0.5 / params.sigma_y_sq * float(np.sum(R * R))
    sparsity = float(np.sum(Lam.weights * A.maps))
    P = phi.traces
    pen = (
        params.kappa1 * float(np.sum(P * P))
        + params.kappa2 * float(np.sum((P - phi_prev.traces) ** 2))
        + params.kappa3 * cross_trace_penalty(P)
    )
    return data + sparsity + pen


def residual(Y: DataCube, phi: Dictionary, A: CoefficientMaps) -> np.ndarray:
    """Y minus its reconstruction, same shape as the movie."""
    _check_shapes(Y, phi, A)
    recon = (phi.traces @ A.as_matrix()).reshape(Y.data.shape)
    return Y.data - recon


def _check_shapes(Y: DataCube, phi: Dictionary, A: CoefficientMaps) -> None:
    if phi.n_frames != Y.n_frames:
        raise DimensionError(
            f"dictionary has {phi.n_frames} frames, movie has {Y.n_frames}"
        )
    if A.fov_shape != Y.fov_shape:
        raise DimensionError(
            f"coefficient FOV {A.fov_shape} does not match movie FOV {Y.fov_shape}"
        )
    if A.n_atoms != phi.n_atoms:
        raise DimensionError(
            f"coefficients have {A.n_atoms} components, dictionary has {phi.n_atoms}"
        )
