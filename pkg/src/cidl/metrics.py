"""Scoring learned components against ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .model import CoefficientMaps, Dictionary


@dataclass
class MatchReport:
    """Optimal pairing of learned and true components with scores."""

    assignment: list[tuple[int, int]]          # (learned index, true index)
    trace_correlations: list[float]
    spatial_cosines: list[float]               # nan when maps were not supplied
    unmatched_learned: list[tuple[int, float]]  # (index, energy ratio)
    n_recovered: int
    correlation_threshold: float


def pearson_matrix(X: np.ndarray, Yt: np.ndarray) -> np.ndarray:
    """Columnwise Pearson correlations; constant columns score 0."""
    Xc = X - X.mean(axis=0)
    Yc = Yt - Yt.mean(axis=0)
    xn = np.linalg.norm(Xc, axis=0)
    yn = np.linalg.norm(Yc, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (Xc.T @ Yc) / np.outer(xn, yn)
    corr[~np.isfinite(corr)] = 0.0
    return corr


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))


def match_components(
    learned: Dictionary,
    truth: Dictionary,
    learned_maps: CoefficientMaps | None = None,
    true_maps: CoefficientMaps | None = None,
    learned_coeffs: CoefficientMaps | None = None,
    correlation_threshold: float = 0.9,
) -> MatchReport:
    """One-to-one matching maximizing summed trace correlation.

    Uses an exact linear assignment over the Pearson matrix; with
    rectangular inputs, min(K_learned, K_true) pairs are produced.
    Spatial cosine similarity is filled in when both map sets are given.
    """
    if learned.n_frames != truth.n_frames:
        raise ValidationError("trace lengths differ")
    corr = pearson_matrix(learned.traces, truth.traces)
    li, ti = linear_sum_assignment(-corr)
    assignment = list(zip(li.tolist(), ti.tolist()))
    correlations = [float(corr[a, b]) for a, b in assignment]

    cosines = []
    for a, b in assignment:
        if learned_maps is not None and true_maps is not None:
            cosines.append(_cosine(learned_maps.slice(a).ravel(),
                                   true_maps.slice(b).ravel()))
        else:
            cosines.append(float("nan"))

    matched = {a for a, _ in assignment}
    unmatched = []
    for k in range(learned.n_atoms):
        if k not in matched:
            coeffs = learned_coeffs if learned_coeffs is not None else learned_maps
            ratio = energy_ratio(coeffs, learned, k) if coeffs is not None else float("nan")
            unmatched.append((k, ratio))

    n_recovered = sum(c >= correlation_threshold for c in correlations)
    return MatchReport(assignment, correlations, cosines, unmatched,
                       n_recovered, correlation_threshold)


def energy_ratio(coefficients: CoefficientMaps, dictionary: Dictionary, k: int) -> float:
    """Component energy relative to the median over all components.

    Energy is the trace 2-norm times the spatial Frobenius norm; ratios
    below ~0.01 mark a component as negligible.
    """
    K = dictionary.n_atoms
    if not 0 <= k < K:
        raise IndexError(f"component index {k} out of range [0, {K})")
    tn = np.linalg.norm(dictionary.traces, axis=0)
    sn = np.linalg.norm(coefficients.maps.reshape(-1, coefficients.n_atoms), axis=0)
    e = tn * sn
    med = float(np.median(e))
    if med == 0.0:
        return 0.0 if e[k] == 0.0 else float("inf")
    return float(e[k] / med)
