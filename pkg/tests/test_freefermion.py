"""The projected-trace machinery against brute-force enumeration."""

import math

import numpy as np
import pytest

from conftest import brute_projected, spectrum_from_modes
from spinchain_metrology.freefermion import ProjectedSector, build_sectors, mixture_log_z
from spinchain_metrology.model import ChainSpec
from spinchain_metrology import oracle


CASES = [
    # (energies, beta) covering signs, magnitudes, zeros, near-zeros
    (np.array([1.0, -0.5, 2.0, 0.3]), 1.7),
    (np.array([1.0, -0.5, 2.0, 0.3, -1.1, 0.9]), 0.01),
    (np.array([0.0, 1.0, -2.0, 0.5]), 2.0),
    (np.array([0.0, 0.0, 1.0, -2.0]), 3.0),
    (np.array([1e-9, 1.0, -2.0, 0.7, -0.1]), 5.0),
    (np.array([1e-5, -1e-5, 3.0, 0.4]), 10.0),
    (np.array([4.0, 5.0, 6.0, -4.5]), 30.0),   # deeply frozen
    (np.array([0.37, -0.11]), 0.5),
    (np.array([2e-4, 1.0, 0.5, -0.25, 0.8, -1.7, 0.05, 1.3]), 8.0),
]


@pytest.mark.parametrize("case", range(len(CASES)))
@pytest.mark.parametrize("sigma", [1, -1])
def test_projected_moments_match_enumeration(case, sigma):
    e, beta = CASES[case]
    rng = np.random.default_rng(100 + case)
    d = rng.normal(size=e.size)
    f = rng.normal(size=e.size)
    sec = ProjectedSector(e, beta, sigma)
    logw_ref, mean_ref, cov_ref = brute_projected(e, beta, sigma, d, f)
    assert sec.logw == pytest.approx(logw_ref, rel=1e-12, abs=1e-12)
    assert sec.mean(d) == pytest.approx(mean_ref, rel=1e-10, abs=1e-12)
    assert sec.cov(d, f) == pytest.approx(cov_ref, rel=1e-9, abs=1e-11)
    _, _, var_ref = brute_projected(e, beta, sigma, d, d)
    assert sec.var(d) == pytest.approx(var_ref, rel=1e-9, abs=1e-11)
    assert sec.var(d) >= -1e-12


def test_projected_moments_extreme_freeze():
    # all modes far beyond the tanh rounding threshold
    e = np.array([3.0, 4.0, -5.0, 6.0])
    sec_al = ProjectedSector(e, 50.0, -1)   # vacuum parity odd: aligned
    sec_anti = ProjectedSector(e, 50.0, +1)
    # aligned sector: vacuum dominates
    assert sec_al.logw == pytest.approx(0.5 * 50.0 * np.sum(np.abs(e)) - math.log(2) + math.log(2), rel=1e-12)
    # anti sector: weight suppressed by the cheapest excitation (e = 3)
    ref = 0.5 * 50.0 * np.sum(np.abs(e)) - 50.0 * 3.0
    assert sec_anti.logw == pytest.approx(ref, rel=1e-6)


def test_pair_projection_logs():
    e = np.array([0.8, 0.8, 1.5, 1.5, 0.3, -0.6])
    beta = 4.0
    pair_idx = np.array([[0, 1], [2, 3]])
    for sigma in (1, -1):
        sec = ProjectedSector(e, beta, sigma)
        logs = sec.pair_projection_logs(pair_idx)
        for k, (i, j) in enumerate(pair_idx):
            rest = np.delete(e, [i, j])
            ref, _, _ = brute_projected(rest, beta, sigma)
            assert logs[k] == pytest.approx(ref, rel=1e-12)


def test_sector_energies_reconstruct_full_spectrum():
    for spec in [
        ChainSpec("XX", 6, 0.7, 1.1, 1.0),
        ChainSpec("XX", 2, 1.0, 0.0, 1.0),
        ChainSpec("XY", 6, 1.0, 0.9, 1.0, gamma=0.5),
        ChainSpec("XY", 8, 0.7, 0.3, 1.0, gamma=0.25),
        ChainSpec("XY", 4, 1.0, 0.5, 1.0, gamma=1.0),
    ]:
        ed = np.linalg.eigvalsh(oracle.build_hamiltonian(spec))
        ff = spectrum_from_modes(spec)
        scale = max(1.0, float(np.max(np.abs(ed))))
        assert float(np.max(np.abs(ed - ff))) / scale < 1e-12


def test_mixture_log_z_infinite_temperature():
    spec = ChainSpec("XX", 10, 1.0, 0.4, 1e-9)
    (_, sa), (_, sp_) = build_sectors(spec)
    assert mixture_log_z(sa, sp_) == pytest.approx(10 * math.log(2.0), rel=1e-12)
