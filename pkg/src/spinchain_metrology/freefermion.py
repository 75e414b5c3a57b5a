"""Parity-projected thermodynamics of free-fermion sectors.

A periodic spin ring maps onto two quadratic fermion problems: states with
even fermion parity live on the half-integer momentum grid p = pi(2l+1)/n,
states with odd parity on the integer grid p = 2 pi l / n.  After the
quasiparticle rotation either sector Hamiltonian takes the level form

    H = sum_q e_q (n_q - 1/2),

with signed e_q for the unpaired (p = 0, pi) and gamma = 0 modes.  Every
thermodynamic quantity then reduces to traces of the form

    W = tr[ P_sigma exp(-beta H) ],      P_sigma = (1 + sigma Pi) / 2,

with Pi = (-1)^(number of quasiparticles).  Writing y_q = beta e_q / 2,

    tr[exp(-beta H)]    = prod_q 2 cosh y_q,
    tr[Pi exp(-beta H)] = prod_q 2 sinh y_q,

and moments of mode-sum observables X = sum_q d_q (n_q - 1/2) follow from
derivatives of log W with respect to the y_q.  The formulas below are exact
identities organized so that no catastrophic cancellation occurs: products
of tanh factors are kept in log form, near-cancelling 1 +- prod tanh
combinations go through expm1, and modes with |tanh y| below a threshold
take a separate exact branch (leave-one-out products stay finite there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChainSpec

__all__ = ["SectorModes", "ProjectedSector", "build_sectors", "mixture_log_z"]

_LOG2 = math.log(2.0)
_T_SMALL = 1e-3  # |tanh y| below this: exact small-mode branch for cross terms
_SMALL_SKIP = 5  # >= this many small modes: cross contribution < ~1e-10 absolute


def _log2cosh(y: np.ndarray) -> np.ndarray:
    a = np.abs(y)
    return a + np.log1p(np.exp(-2.0 * a))


def _log_abs_tanh(y: np.ndarray) -> np.ndarray:
    # log|tanh y|; -inf at y = 0 exactly
    a = np.abs(y)
    t2 = np.exp(-2.0 * a)
    with np.errstate(divide="ignore"):
        return np.log1p(-2.0 * t2 / (1.0 + t2))


def _log1p_sign_exp(sign: float, rho: float, tail_logs: np.ndarray | None = None) -> float:
    """log(1 + sign * exp(rho)) for rho <= 0, stable near cancellation.

    When sign = -1 and rho rounds to -0.0 while the true magnitude is a sum
    of sub-representable tails, ``tail_logs`` (log of the individual tail
    magnitudes, so that 1 - e^rho ~= sum exp(tail_logs)) recovers the value.
    """
    rho = min(rho, 0.0)
    if sign > 0:
        return math.log1p(math.exp(rho))
    d = -math.expm1(rho)
    if d > 0.0:
        return math.log(d)
    if tail_logs is not None and tail_logs.size:
        m = float(np.max(tail_logs))
        if m == -math.inf:
            return -math.inf
        return m + math.log(float(np.sum(np.exp(tail_logs - m))))
    return -math.inf


@dataclass(frozen=True)
class SectorModes:
    """Level data of one momentum-grid sector (plus parameter derivatives)."""

    e: np.ndarray        # level splitting e_q (signed where unpaired / gamma = 0)
    de_h: np.ndarray     # d e_q / d h
    d2e_h: np.ndarray    # d^2 e_q / d h^2
    de_j: np.ndarray | None   # d e_q / d J (None when not available)
    pair_idx: np.ndarray      # (npairs, 2) indices of (+p, -p) partners that rotate
    pair_dtheta_h: np.ndarray  # d theta_p / d h per pair


class ProjectedSector:
    """One parity projection of one free-mode sector at fixed beta."""

    def __init__(self, energies: np.ndarray, beta: float, sigma: int):
        self.e = np.asarray(energies, dtype=float)
        self.beta = float(beta)
        self.sigma = int(sigma)
        y = 0.5 * self.beta * self.e
        self.y = y
        self.t = np.tanh(y)
        self.lc = _log2cosh(y)
        self.lt = _log_abs_tanh(y)
        self.ls2 = 2.0 * (_LOG2 - self.lc)  # log sech^2 y
        self.sgn = np.where(y < 0.0, -1.0, 1.0)

        self.logc = float(np.sum(self.lc))
        self.zero_mask = self.y == 0.0
        self.nzero = int(np.count_nonzero(self.zero_mask))
        nonzero = ~self.zero_mask
        self.rho_nz = float(np.sum(self.lt[nonzero]))  # over nonzero modes
        self.vac_sign = -1.0 if (int(np.count_nonzero(y < 0.0)) % 2) else 1.0

        tails = _LOG2 - 2.0 * np.abs(y[nonzero])
        if self.nzero > 0:
            self.ghat_sign = 0.0
            self.log_dtot = 0.0  # 1 + ghat with ghat = 0
        else:
            self.ghat_sign = self.sigma * self.vac_sign
            self.log_dtot = _log1p_sign_exp(self.ghat_sign, self.rho_nz, tail_logs=tails)

        self.logw = self.logc - _LOG2 + self.log_dtot
        self._g: np.ndarray | None = None
        self._lloo: np.ndarray | None = None
        self._lloo_sign: np.ndarray | None = None

    # -- leave-one-out products of tanh factors ------------------------------
    def _loo(self):
        if self._lloo is not None:
            return self._lloo, self._lloo_sign
        n = self.e.size
        lloo = np.full(n, -np.inf)
        sign = np.zeros(n)
        if self.nzero == 0:
            # prefix/suffix sums: subtracting lt_q from the total would lose
            # the other modes' tails whenever lt_q dominates it
            pref = np.concatenate(([0.0], np.cumsum(self.lt)[:-1]))
            suff = np.concatenate((np.cumsum(self.lt[::-1])[-2::-1], [0.0]))
            lloo = np.minimum(pref + suff, 0.0)
            sign = self.sigma * self.vac_sign * self.sgn
        elif self.nzero == 1:
            i = int(np.flatnonzero(self.zero_mask)[0])
            lloo[i] = min(self.rho_nz, 0.0)
            sign[i] = self.sigma * self.vac_sign
        # nzero >= 2: all leave-one-out products vanish
        self._lloo, self._lloo_sign = lloo, sign
        return lloo, sign

    @property
    def g(self) -> np.ndarray:
        """G_q = d log W / d y_q = T_q + LOO_q sech^2(y_q) / (1 + ghat)."""
        if self._g is None:
            lloo, sign = self._loo()
            corr = sign * np.exp(lloo + self.ls2 - self.log_dtot)
            self._g = self.t + corr
        return self._g

    def mean(self, d: np.ndarray) -> float:
        """< sum_q d_q (n_q - 1/2) > under this projection."""
        return -0.5 * float(np.dot(np.asarray(d, float), self.g))

    def cov(self, d: np.ndarray, f: np.ndarray) -> float:
        """Cov(X_d, X_f) of mode-sum observables under this projection."""
        d = np.asarray(d, float)
        f = np.asarray(f, float)
        lloo, _ = self._loo()
        # diagonal: sech^2 (1 - LOO^2) / (1 + ghat)^2, all factors in [0, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            log1m = np.log(-np.expm1(np.minimum(2.0 * lloo, 0.0)))
        log1m = np.where(np.isnan(log1m), -np.inf, log1m)
        kqq = np.exp(self.ls2 + log1m - 2.0 * self.log_dtot)
        total = 0.25 * float(np.dot(d * f, kqq))
        total += self._cross(d, f)
        return total

    def var(self, d: np.ndarray) -> float:
        return self.cov(d, d)

    def _cross(self, d: np.ndarray, f: np.ndarray) -> float:
        """sum_{q != r} (d_q f_r / 4) ghat tau_q tau_r / (1 + ghat)^2.

        tau_q = tanh y_q - coth y_q.  Modes are split into regular
        (|tanh y| >= _T_SMALL) and small; on the small set tau is attached
        to its own tanh factor (tanh tau = -sech^2, bounded) so nothing
        diverges as y -> 0.
        """
        small = np.abs(self.t) < _T_SMALL
        reg = ~small
        log4 = 2.0 * _LOG2

        # tau = tanh - coth = -sech^2/tanh, kept accurate deep in the tails
        # where tanh itself rounds to +-1
        tau_r = -self.sgn[reg] * np.exp(self.ls2[reg] - self.lt[reg])
        sd = float(np.dot(d[reg], tau_r))
        sf = float(np.dot(f[reg], tau_r))
        sdf = float(np.dot(d[reg] * f[reg], tau_r * tau_r))
        rho_rr = float(np.sum(self.lt[reg]))
        sign_rr = -1.0 if (int(np.count_nonzero(self.y[reg] < 0.0)) % 2) else 1.0

        base = rho_rr - 2.0 * self.log_dtot - log4

        def assemble(val: float) -> float:
            if val == 0.0 or not math.isfinite(base):
                return 0.0
            return self.sigma * sign_rr * math.copysign(1.0, val) * math.exp(
                base + math.log(abs(val))
            )

        ts = self.t[small]
        nsmall = int(ts.size)
        p_s = float(np.prod(ts)) if nsmall else 1.0

        # both regular
        cross = assemble(p_s * (sd * sf - sdf)) if nsmall == 0 or p_s != 0.0 else 0.0
        if nsmall == 0:
            return cross

        # one small, one regular
        phi = -np.exp(self.ls2[small])  # tanh * tau = -sech^2, exact and bounded
        ds, fs = d[small], f[small]
        if nsmall == 1:
            p_loo = np.ones(1)
        else:
            pref = np.concatenate(([1.0], np.cumprod(ts)[:-1]))
            suff = np.concatenate((np.cumprod(ts[::-1])[-2::-1], [1.0]))
            p_loo = pref * suff
        b_d = float(np.dot(ds * phi, p_loo))
        b_f = float(np.dot(fs * phi, p_loo))
        cross += assemble(b_d * sf + b_f * sd)

        # both small: negligible beyond a handful of near-zero modes
        if 2 <= nsmall < _SMALL_SKIP:
            c3 = 0.0
            for a in range(nsmall):
                for b in range(nsmall):
                    if a == b:
                        continue
                    p_ab = 1.0
                    for c in range(nsmall):
                        if c != a and c != b:
                            p_ab *= ts[c]
                    c3 += ds[a] * phi[a] * fs[b] * phi[b] * p_ab
            cross += assemble(c3)
        return cross

    def pair_projection_logs(self, pair_idx: np.ndarray) -> np.ndarray:
        """log of the leave-pair-out projected trace for each rotating pair.

        Returns log( (1/2) [ prod_{q not in pair} 2 cosh y_q
                             + sigma prod_{q not in pair} 2 sinh y_q ] ).
        """
        if pair_idx.size == 0:
            return np.zeros(0)
        i = pair_idx[:, 0]
        jdx = pair_idx[:, 1]
        out = np.empty(len(i))
        logc_lo = self.logc - 2.0 * self.lc[i]
        if self.nzero > 0:
            # zeros elsewhere keep the parity-weighted product at zero
            out[:] = logc_lo - _LOG2
            return out
        lloo, _ = self._loo()
        rho_lo = np.minimum(lloo[i] - self.lt[jdx], 0.0)
        # the subtraction above can cancel when the pair carries the whole
        # tail; recompute those pairs by a direct masked sum
        risky = rho_lo > -1e-10 * np.abs(self.lt[jdx])
        for k in np.flatnonzero(risky):
            mask = np.ones(self.e.size, dtype=bool)
            mask[[i[k], jdx[k]]] = False
            rho_lo[k] = min(float(np.sum(self.lt[mask])), 0.0)
        sign_lo = self.sigma * self.vac_sign  # pair energies are positive
        for k in range(len(i)):
            out[k] = logc_lo[k] - _LOG2 + _log1p_sign_exp(sign_lo, float(rho_lo[k]))
        return out


# ---------------------------------------------------------------------------
# sector construction for a chain spec
# ---------------------------------------------------------------------------
def _grid_momenta(n: int, grid: str) -> np.ndarray:
    l = np.arange(-n // 2, n // 2)
    if grid == "half":
        return np.pi * (2 * l + 1) / n
    return 2.0 * np.pi * l / n


def _sector_modes(spec: ChainSpec, grid: str) -> SectorModes:
    n = spec.n
    p = _grid_momenta(n, grid)
    cosp = np.cos(p)
    sinp = np.sin(p)
    if grid == "int":
        # p = 0 and p = -pi are exact grid points; enforce exact trig values
        cosp[n // 2] = 1.0
        sinp[n // 2] = 0.0
        cosp[0] = -1.0
        sinp[0] = 0.0

    if spec.model == "XX" or spec.gamma == 0.0:
        e = 2.0 * (spec.j * cosp - spec.h)
        de_h = np.full(n, -2.0)
        d2e_h = np.zeros(n)
        de_j = 2.0 * cosp
        return SectorModes(e, de_h, d2e_h, de_j, np.zeros((0, 2), dtype=int), np.zeros(0))

    a = spec.j * cosp - spec.h
    b = spec.j * spec.gamma * sinp
    unpaired = np.zeros(n, dtype=bool)
    if grid == "int":
        unpaired[[0, n // 2]] = True

    r = np.hypot(a, b)
    e = np.where(unpaired, 2.0 * a, 2.0 * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        de_h = np.where(unpaired, -2.0, -2.0 * a / r)
        d2e_h = np.where(unpaired, 0.0, 2.0 * b * b / (r * r * r))
    # paired r > 0 whenever gamma > 0, so the divisions above are safe there

    if grid == "half":
        pos = np.arange(n // 2, n)           # l = 0 .. n/2-1, p > 0
        partner = n // 2 - 1 - (pos - n // 2)  # partner of l is -(l+1)
    else:
        pos = np.arange(n // 2 + 1, n)       # l = 1 .. n/2-1
        partner = n // 2 - (pos - n // 2)
    pair_idx = np.column_stack([pos, partner])
    bp = b[pos]
    rp = r[pos]
    dtheta = -bp / (2.0 * rp * rp)
    return SectorModes(e, de_h, d2e_h, None, pair_idx, dtheta)


def build_sectors(spec: ChainSpec):
    """(even-parity, odd-parity) sector data and projected traces.

    The even-parity sector lives on the half-integer grid, the odd-parity
    sector on the integer grid; the parity projectors are +1 and -1.
    """
    modes_a = _sector_modes(spec, "half")
    modes_p = _sector_modes(spec, "int")
    sec_a = ProjectedSector(modes_a.e, spec.beta, +1)
    sec_p = ProjectedSector(modes_p.e, spec.beta, -1)
    return (modes_a, sec_a), (modes_p, sec_p)


def mixture_log_z(sec_a: ProjectedSector, sec_p: ProjectedSector) -> float:
    return float(np.logaddexp(sec_a.logw, sec_p.logw))
