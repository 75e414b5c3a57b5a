import numpy as np
import pytest

from spinchain_metrology.freefermion import build_sectors


def brute_projected(e, beta, sigma, d=None, f=None):
    """Enumeration reference for one parity-projected free-mode sector.

    Returns (log W, <X_d>, Cov(X_d, X_f)) by summing all 2^m occupation
    configurations of H = sum_q e_q (n_q - 1/2) filtered on parity.
    """
    e = np.asarray(e, dtype=float)
    m = e.size
    if d is None:
        d = np.zeros(m)
    if f is None:
        f = d
    w_tot = 0.0
    s1 = 0.0
    s1f = 0.0
    s2 = 0.0
    shift = -0.5 * np.sum(np.abs(e))  # ground shift keeps exp in range
    for bits in range(2 ** m):
        occ = np.array([(bits >> k) & 1 for k in range(m)], dtype=float)
        parity = 1.0 if occ.sum() % 2 == 0 else -1.0
        if parity != sigma:
            continue
        energy = float(np.dot(e, occ - 0.5))
        w = np.exp(-beta * (energy - shift))
        x = float(np.dot(d, occ - 0.5))
        y = float(np.dot(f, occ - 0.5))
        w_tot += w
        s1 += w * x
        s1f += w * y
        s2 += w * x * y
    logw = np.log(w_tot) - beta * shift
    mean = s1 / w_tot
    meanf = s1f / w_tot
    cov = s2 / w_tot - mean * meanf
    return logw, mean, cov


def spectrum_from_modes(spec):
    """All 2^n many-body energies of the ring from its two parity sectors."""
    (ma, _), (mp, _) = build_sectors(spec)
    out = []
    for modes, sigma in ((ma, 1), (mp, -1)):
        e = modes.e
        m = e.size
        for bits in range(2 ** m):
            occ = np.array([(bits >> k) & 1 for k in range(m)])
            parity = 1 if occ.sum() % 2 == 0 else -1
            if parity == sigma:
                out.append(float(np.dot(e, occ - 0.5)))
    return np.sort(np.array(out))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
