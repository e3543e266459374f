"""Outer alternation: reweighted sparse coding sweeps against penalized
dictionary updates, until the dictionary stops moving.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dictupdate import DictUpdateOptions, rebalance_scales, update_dictionary
from .errors import ValidationError
from .model import (
    CoefficientMaps,
    DataCube,
    Dictionary,
    ModelParams,
    SpatialKernel,
    WeightMaps,
    full_objective,
)
from .sparse import LassoSolverOptions, rwl1_sf_sweep


@dataclass
class LearnDiagnostics:
    """Per-outer-iteration progress records."""

    objective: list[float] = field(default_factory=list)
    rel_dict_change: list[float] = field(default_factory=list)
    column_norms: list[np.ndarray] = field(default_factory=list)
    n_active_coeffs: list[int] = field(default_factory=list)
    wall_time_s: list[float] = field(default_factory=list)

    @property
    def n_iters(self) -> int:
        return len(self.rel_dict_change)


@dataclass
class LearnResult:
    dictionary: Dictionary
    coefficients: CoefficientMaps
    weights: WeightMaps
    diagnostics: LearnDiagnostics
    converged: bool


def init_dictionary(T: int, K: int, seed: int) -> Dictionary:
    """Random starting traces, i.i.d. uniform on (0, 1]."""
    if T < 1 or K < 1:
        raise ValidationError("T and K must be >= 1")
    rng = np.random.default_rng(seed)
    return Dictionary(1.0 - rng.random((T, K)))


def relative_dictionary_change(new: np.ndarray, old: np.ndarray) -> float:
    """Squared-Frobenius change ratio ||new - old||^2 / ||new||^2.

    The denominator is floored at 1 so a dictionary decaying to zero
    (all-dark movie) still registers as converged once the absolute
    change is negligible.
    """
    num = float(np.sum((new - old) ** 2))
    den = max(float(np.sum(new * new)), 1.0)
    return num / den


def learn(
    Y: DataCube,
    W: SpatialKernel,
    params: ModelParams,
    K: int,
    seed: int = 0,
    solver_opts: LassoSolverOptions | None = None,
    dict_opts: DictUpdateOptions | None = None,
    n_threads: int = 1,
    progress: Callable[[int, dict], None] | None = None,
    init: Dictionary | None = None,
) -> LearnResult:
    """Learn a temporal trace dictionary from a movie.

    Alternates a full reweighted sparse-coding sweep with a penalized
    dictionary update, starting from uniform-random traces, until the
    relative squared-Frobenius dictionary change drops to outer_tol.
    Deterministic for fixed (Y, params, K, seed) and any thread count.
    """
    if K < 1:
        raise ValidationError("K must be >= 1")
    solver_opts = solver_opts or LassoSolverOptions()
    dict_opts = dict_opts or DictUpdateOptions()

    phi = init if init is not None else init_dictionary(Y.n_frames, K, seed)
    if phi.n_frames != Y.n_frames or phi.n_atoms != K:
        raise ValidationError("init dictionary shape does not match (T, K)")

    diag = LearnDiagnostics()
    A = CoefficientMaps(np.zeros((*Y.fov_shape, K)))
    Lam = WeightMaps(np.full((*Y.fov_shape, K), params.xi / params.beta))
    converged = False

    for it in range(int(params.max_outer_iters)):
        t0 = time.perf_counter()
        A, Lam = rwl1_sf_sweep(Y, phi, W, params, solver_opts, n_threads=n_threads)
        phi_new, _ = update_dictionary(Y, A, phi, params, dict_opts)
        phi_new, A = rebalance_scales(phi_new, A, Lam, params)
        rel = relative_dictionary_change(phi_new.traces, phi.traces)

        diag.objective.append(full_objective(Y, phi_new, A, phi, params, Lam))
        diag.rel_dict_change.append(rel)
        diag.column_norms.append(np.linalg.norm(phi_new.traces, axis=0))
        diag.n_active_coeffs.append(int(np.count_nonzero(A.maps)))
        diag.wall_time_s.append(time.perf_counter() - t0)
        if progress is not None:
            progress(it, {
                "objective": diag.objective[-1],
                "rel_dict_change": rel,
                "n_active_coeffs": diag.n_active_coeffs[-1],
                "wall_time_s": diag.wall_time_s[-1],
            })

        phi = phi_new
        if rel <= params.outer_tol:
            converged = True
            break

    return LearnResult(phi, A, Lam, diag, converged)


def component_energies(dictionary: Dictionary, coefficients: CoefficientMaps) -> np.ndarray:
    """Per-component energy: trace 2-norm times spatial Frobenius norm."""
    tn = np.linalg.norm(dictionary.traces, axis=0)
    sn = np.linalg.norm(coefficients.maps.reshape(-1, coefficients.n_atoms), axis=0)
    return tn * sn


def default_prune_threshold(dictionary: Dictionary, coefficients: CoefficientMaps) -> float:
    """1% of the median component energy."""
    return 0.01 * float(np.median(component_energies(dictionary, coefficients)))


def prune_report(
    dictionary: Dictionary,
    coefficients: CoefficientMaps,
    threshold: float,
) -> list[tuple[int, float, float]]:
    """Columns whose energy falls below the threshold, advisory only.

    Returns (column index, trace norm, spatial energy) for each flagged
    column; nothing is mutated.
    """
    if threshold < 0:
        raise ValidationError("threshold must be >= 0")
    tn = np.linalg.norm(dictionary.traces, axis=0)
    sn = np.linalg.norm(coefficients.maps.reshape(-1, coefficients.n_atoms), axis=0)
    return [
        (k, float(tn[k]), float(sn[k]))
        for k in range(dictionary.n_atoms)
        if tn[k] * sn[k] < threshold
    ]
