"""Per-pixel weighted non-negative lasso and the spatially-filtered
reweighting sweep.

Each pixel's time course y is coded against the trace dictionary by
minimizing (1/(2 sigma^2))||y - Phi a||^2 + lam . a over a >= 0.  A sweep
solves every pixel, then recomputes the weights from the full coefficient
field so that active pixels lower the penalty of their neighbours.

Pixel solves share Phi, so the whole field of view is solved as one
batched accelerated projected-gradient iteration over a (K, n_pixels)
matrix.  Chunking over pixels is fixed-size and independent of the worker
count, which keeps results bit-identical for any number of threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionError, ValidationError
from .model import (
    CoefficientMaps,
    DataCube,
    Dictionary,
    ModelParams,
    SpatialKernel,
    WeightMaps,
    _as_float64,
)

# Pixel chunk width for batched solves.  Fixed so that floating-point
# work is identical no matter how many workers consume the chunks.
_CHUNK = 512


@dataclass(frozen=True)
class LassoSolverOptions:
    max_iters: int = 500
    rel_tol: float = 1e-8
    step_rule: str = "fixed"  # "fixed" (1/L from power iteration) or "backtracking"
    # when set, convergence instead requires the first-order optimality
    # violation at the iterate to drop below this bound; slower but gives
    # a certified solution accuracy
    kkt_tol: float | None = None

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValidationError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValidationError(f"unknown step_rule {self.step_rule!r}")
        if self.kkt_tol is not None and not self.kkt_tol > 0:
            raise ValidationError("kkt_tol must be positive")


def power_iteration_sym(M: np.ndarray, iters: int = 200, tol: float = 1e-12) -> float:
    """Largest eigenvalue of a symmetric PSD matrix.

    Deterministic: starts from the all-ones vector, so the estimate is
    invariant under coordinate permutations.
    """
    n = M.shape[0]
    v = np.ones(n) / np.sqrt(n)
    ev = 0.0
    for _ in range(iters):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        ev_new = float(v @ (M @ v))
        if abs(ev_new - ev) <= tol * max(1.0, abs(ev_new)):
            ev = ev_new
            break
        ev = ev_new
    return ev


def _batch_objective(G, C, Lam, ysq_half, A):
    # 0.5 a'Ga - c'a + 0.5||y||^2/sigma^2 + lam'a, columnwise
    return 0.5 * np.einsum("kp,kp->p", A, G @ A) - np.einsum(
        "kp,kp->p", C - Lam, A
    ) + ysq_half


def _batch_nn_lasso(Yc, phi_t, Lam, sigma_y_sq, opts, warm, trace=None):
    """Solve the weighted non-negative lasso for a block of pixels.

    Yc: (T, P) pixel time courses; Lam: (K, P) weights; warm: (K, P) or None.
    Returns (A, converged) with A (K, P) and converged a bool per pixel.

    Monotone accelerated projected gradient: the candidate momentum step
    is only accepted where it does not increase that pixel's objective.
    """
    T, K = phi_t.shape
    P = Yc.shape[1]
    G = phi_t.T @ phi_t / sigma_y_sq
    C = phi_t.T @ Yc / sigma_y_sq
    ysq_half = 0.5 * np.einsum("tp,tp->p", Yc, Yc) / sigma_y_sq

    L = power_iteration_sym(G)
    step = 1.0 / L if L > 0 else 1.0

    A = np.zeros((K, P)) if warm is None else np.array(warm, dtype=np.float64)
    obj = _batch_objective(G, C, Lam, ysq_half, A)
    if trace is not None:
        trace.append(obj.copy())

    Z = A.copy()
    t_mom = 1.0
    converged = np.zeros(P, dtype=bool)
    backtracking = opts.step_rule == "backtracking"
    steps = np.full(P, step)

    for _ in range(int(opts.max_iters)):
        grad = G @ Z - C + Lam
        if backtracking:
            cand = np.maximum(0.0, Z - steps * grad)
            obj_z = _batch_objective(G, C, Lam, ysq_half, Z)
            for _bt in range(60):
                diff = cand - Z
                quad = obj_z + np.einsum("kp,kp->p", grad, diff) + 0.5 / steps * np.einsum(
                    "kp,kp->p", diff, diff
                )
                bad = _batch_objective(G, C, Lam, ysq_half, cand) > quad + 1e-15
                if not np.any(bad):
                    break
                steps = np.where(bad, steps * 0.5, steps)
                cand = np.maximum(0.0, Z - steps * grad)
        else:
            cand = np.maximum(0.0, Z - step * grad)
        obj_cand = _batch_objective(G, C, Lam, ysq_half, cand)

        accept = obj_cand <= obj
        A_new = np.where(accept, cand, A)
        obj_new = np.where(accept, obj_cand, obj)

        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        # momentum built from the candidate point keeps acceleration alive
        # even when the monotone safeguard rejects it
        Z = A_new + (t_mom / t_next) * (cand - A_new) + ((t_mom - 1.0) / t_next) * (
            A_new - A
        )
        Z = np.maximum(0.0, Z)
        t_mom = t_next

        if opts.kkt_tol is not None:
            g_at = G @ A_new - C + Lam
            viol = np.where(A_new > 1e-12, np.abs(g_at), np.maximum(0.0, -g_at))
            converged = viol.max(axis=0) <= opts.kkt_tol
        else:
            decrease = obj - obj_new
            # a rejected momentum step gives zero decrease without
            # stationarity, so only accepted steps can certify convergence
            converged |= accept & (
                decrease <= opts.rel_tol * np.maximum(1.0, np.abs(obj))
            )
        A, obj = A_new, obj_new
        if trace is not None:
            trace.append(obj.copy())
        if np.all(converged):
            break
    return A, converged


def solve_weighted_nn_lasso(
    y,
    phi: Dictionary,
    lam,
    sigma_y_sq: float,
    opts: LassoSolverOptions | None = None,
    warm_start=None,
):
    """Solve one pixel's weighted non-negative lasso.

    Returns (a, converged).  On non-convergence the best iterate is
    returned with converged=False rather than raising.
    """
    opts = opts or LassoSolverOptions()
    T, K = phi.traces.shape
    y = _as_float64(y, "y")
    lam = _as_float64(lam, "lam")
    if y.shape != (T,):
        raise DimensionError(f"y must have shape ({T},), got {y.shape}")
    if lam.shape != (K,):
        raise DimensionError(f"lam must have shape ({K},), got {lam.shape}")
    if np.any(lam <= 0):
        raise ValidationError("lam must be strictly positive")
    if not sigma_y_sq > 0:
        raise ValidationError("sigma_y_sq must be positive")
    warm = None
    if warm_start is not None:
        warm = _as_float64(warm_start, "warm_start")
        if warm.shape != (K,):
            raise DimensionError(f"warm_start must have shape ({K},)")
        if np.any(warm < 0):
            raise ValidationError("warm_start must be non-negative")
        warm = warm[:, None]
    A, conv = _batch_nn_lasso(
        y[:, None], phi.traces, lam[:, None], sigma_y_sq, opts, warm
    )
    return A[:, 0], bool(conv[0])


def convolve2d_same(map2d, W: SpatialKernel) -> np.ndarray:
    """Same-size 2D linear convolution with zero padding."""
    m = _as_float64(map2d, "map")
    if m.ndim != 2:
        raise DimensionError("map must be 2D")
    return convolve2d(m, W.kernel, mode="same", boundary="fill", fillvalue=0.0)


def update_weights(A: CoefficientMaps, W: SpatialKernel, xi: float, beta: float) -> WeightMaps:
    """Recompute penalty weights from the coefficient field.

    lam[i,j,k] = xi / (beta + a[i,j,k] + (W * A_k)[i,j]); the convolution
    spreads support so active pixels cheapen activation nearby.  Outputs
    lie in (0, xi/beta].
    """
    if not xi > 0 or not beta > 0:
        raise ValidationError("xi and beta must be positive")
    maps = A.maps
    out = np.empty_like(maps)
    for k in range(A.n_atoms):
        filtered = convolve2d_same(maps[:, :, k], W)
        out[:, :, k] = xi / (beta + maps[:, :, k] + np.maximum(filtered, 0.0))
    return WeightMaps(out)


class SweepDiagnostics:
    """Solver outcomes of one reweighting sweep."""

    def __init__(self):
        self.all_converged: list[bool] = []

    def record(self, converged: np.ndarray):
        self.all_converged.append(bool(np.all(converged)))


def _solve_field(Ym, phi_t, Lam_m, sigma_y_sq, opts, warm_m, n_threads):
    P = Ym.shape[1]
    chunks = [(s, min(s + _CHUNK, P)) for s in range(0, P, _CHUNK)]
    A = np.empty((phi_t.shape[1], P))
    conv = np.empty(P, dtype=bool)

    def run(chunk):
        s, e = chunk
        w = None if warm_m is None else warm_m[:, s:e]
        return s, e, _batch_nn_lasso(Ym[:, s:e], phi_t, Lam_m[:, s:e], sigma_y_sq, opts, w)

    if n_threads <= 1 or len(chunks) == 1:
        results = map(run, chunks)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(run, chunks))
    for s, e, (Ac, cc) in results:
        A[:, s:e] = Ac
        conv[s:e] = cc
    return A, conv


def rwl1_sf_sweep(
    Y: DataCube,
    phi: Dictionary,
    W: SpatialKernel,
    params: ModelParams,
    opts: LassoSolverOptions | None = None,
    n_threads: int = 1,
    diagnostics: SweepDiagnostics | None = None,
) -> tuple[CoefficientMaps, WeightMaps]:
    """Reweighted sparse coding over the full field of view.

    Weights start at 1 everywhere; each of the n_reweight rounds solves
    every pixel (warm-started from the previous round) and then rebuilds
    the weight field from the complete new coefficients.  Rounds are
    global Jacobi sweeps, so the result is independent of pixel order and
    worker count.
    """
    opts = opts or LassoSolverOptions()
    if phi.n_frames != Y.n_frames:
        raise DimensionError("dictionary frames do not match movie frames")
    nx, ny = Y.fov_shape
    K = phi.n_atoms
    Ym = Y.as_matrix()
    Lam_m = np.ones((K, Y.n_pixels))
    warm = None
    A_m = None
    for _ in range(int(params.n_reweight)):
        A_m, conv = _solve_field(Ym, phi.traces, Lam_m, params.sigma_y_sq, opts, warm, n_threads)
        if diagnostics is not None:
            diagnostics.record(conv)
        A = CoefficientMaps(np.ascontiguousarray(A_m.T.reshape(nx, ny, K)))
        Lam = update_weights(A, W, params.xi, params.beta)
        Lam_m = Lam.as_matrix().copy()
        warm = A_m
    return A, Lam
