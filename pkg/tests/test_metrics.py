import itertools

import numpy as np
import pytest

from cidl import CoefficientMaps, Dictionary, ValidationError, energy_ratio, match_components
from cidl.metrics import pearson_matrix


def brute_force_match(learned, truth):
    """Best one-to-one pairing by exhaustive permutation search."""
    corr = pearson_matrix(learned.traces, truth.traces)
    KL, KT = corr.shape
    best, best_pairs = -np.inf, None
    if KL >= KT:
        for perm in itertools.permutations(range(KL), KT):
            s = sum(corr[perm[j], j] for j in range(KT))
            if s > best:
                best, best_pairs = s, [(perm[j], j) for j in range(KT)]
    else:
        for perm in itertools.permutations(range(KT), KL):
            s = sum(corr[i, perm[i]] for i in range(KL))
            if s > best:
                best, best_pairs = s, [(i, perm[i]) for i in range(KL)]
    return best, best_pairs


def test_pearson_matrix_basic():
    rng = np.random.default_rng(0)
    x = rng.random((30, 3))
    c = pearson_matrix(x, x)
    np.testing.assert_allclose(np.diag(c), 1.0, atol=1e-12)
    assert np.all(c <= 1 + 1e-12) and np.all(c >= -1 - 1e-12)
    # scale and shift invariance
    c2 = pearson_matrix(3.0 * x + 5.0, x)
    np.testing.assert_allclose(c, c2, atol=1e-12)


def test_pearson_constant_column_scores_zero():
    x = np.ones((10, 1))
    y = np.random.default_rng(1).random((10, 1))
    assert pearson_matrix(x, y)[0, 0] == 0.0


def test_match_equals_exhaustive_oracle():
    rng = np.random.default_rng(2)
    for K in range(2, 7):
        for _ in range(10):
            learned = Dictionary(rng.random((25, K)))
            truth = Dictionary(rng.random((25, K)))
            rep = match_components(learned, truth)
            corr = pearson_matrix(learned.traces, truth.traces)
            got = sum(corr[a, b] for a, b in rep.assignment)
            want, _ = brute_force_match(learned, truth)
            assert got == pytest.approx(want, abs=1e-10)


def test_match_rectangular_oracle():
    rng = np.random.default_rng(3)
    learned = Dictionary(rng.random((20, 5)))
    truth = Dictionary(rng.random((20, 3)))
    rep = match_components(learned, truth)
    assert len(rep.assignment) == 3
    corr = pearson_matrix(learned.traces, truth.traces)
    got = sum(corr[a, b] for a, b in rep.assignment)
    want, _ = brute_force_match(learned, truth)
    assert got == pytest.approx(want, abs=1e-10)
    assert len(rep.unmatched_learned) == 2


def test_match_recovers_permutation():
    rng = np.random.default_rng(4)
    truth = Dictionary(rng.random((40, 4)))
    perm = [2, 0, 3, 1]
    learned = Dictionary(truth.traces[:, perm])
    rep = match_components(learned, truth)
    assert rep.n_recovered == 4
    for a, b in rep.assignment:
        assert perm[a] == b
        # matched pairs are identical traces
    assert all(c == pytest.approx(1.0, abs=1e-12) for c in rep.trace_correlations)


def test_match_threshold_counts():
    rng = np.random.default_rng(5)
    truth = Dictionary(rng.random((40, 3)))
    noisy = truth.traces.copy()
    noisy[:, 2] = rng.random(40)  # decorrelate one column
    rep = match_components(Dictionary(noisy), truth, correlation_threshold=0.9)
    assert rep.n_recovered == 2
    assert rep.correlation_threshold == 0.9


def test_match_spatial_cosines():
    rng = np.random.default_rng(6)
    truth = Dictionary(rng.random((30, 2)))
    maps = CoefficientMaps(rng.random((4, 4, 2)))
    rep = match_components(Dictionary(truth.traces), truth, learned_maps=maps,
                           true_maps=maps)
    assert all(c == pytest.approx(1.0, abs=1e-12) for c in rep.spatial_cosines)
    rep2 = match_components(Dictionary(truth.traces), truth)
    assert all(np.isnan(c) for c in rep2.spatial_cosines)


def test_match_length_mismatch():
    with pytest.raises(ValidationError):
        match_components(Dictionary(np.ones((10, 2))), Dictionary(np.ones((9, 2))))


def test_energy_ratio_basics():
    tr = np.ones((10, 3))
    maps = np.zeros((2, 2, 3))
    maps[:, :, 0] = 1.0
    maps[:, :, 1] = 1.0
    maps[:, :, 2] = 0.01
    d = Dictionary(tr)
    A = CoefficientMaps(maps)
    # energies: [sqrt(10)*2, sqrt(10)*2, sqrt(10)*0.02]; median = sqrt(10)*2
    assert energy_ratio(A, d, 0) == pytest.approx(1.0)
    assert energy_ratio(A, d, 2) == pytest.approx(0.01)
    with pytest.raises(IndexError):
        energy_ratio(A, d, 3)


def test_energy_ratio_zero_median():
    d = Dictionary(np.zeros((5, 2)))
    A = CoefficientMaps(np.zeros((2, 2, 2)))
    assert energy_ratio(A, d, 0) == 0.0
