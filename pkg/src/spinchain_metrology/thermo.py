"""Thermodynamics and magnetic/coupling sensitivities of thermal spin rings.

All "exact" quantities here are evaluated through the parity-resolved
free-fermion solution (see freefermion), which reproduces the dense
2^n Gibbs state to floating-point accuracy at any ring size.  For the XX
chain the sensitivities follow from occupation statistics alone; for the
XY chain the field also rotates the quasiparticle basis, adding a
geometric term built from the pair rotation rates d theta_p / d h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .freefermion import ProjectedSector, SectorModes, build_sectors, mixture_log_z
from .model import ChainSpec

__all__ = [
    "DEFAULT_C",
    "SensitivityReport",
    "CFitResult",
    "log_partition",
    "free_energy",
    "magnetization_z",
    "susceptibility_h",
    "qfi_h",
    "qfi_j",
    "qfi_h_per_mode",
    "qfi_h_approx",
    "qfi_j_approx",
    "fit_c",
]

# low-temperature window constant of the sensitivity approximation
DEFAULT_C = 0.64

PROV_EXACT = "exact-free-fermion"
PROV_APPROX = "low-temp-approx"
PROV_ORACLE = "oracle"
PROV_ESTIMATOR = "estimator-based"


@dataclass(frozen=True)
class SensitivityReport:
    """A (parameter, value) sensitivity with provenance.

    ``window_ok`` is only meaningful for approximate provenances: it is
    False when the requesting spec violates the low-temperature validity
    rule k_B T < J - h.
    """

    parameter: str
    value: float
    per_spin: float
    provenance: str
    spec: ChainSpec
    window_ok: bool = True


@dataclass(frozen=True)
class CFitResult:
    c: float
    residual: float
    window: dict
    subset_spread: float = 0.0


class _Assembled:
    """Sector mixture of one spec: weights, means, covariances."""

    def __init__(self, spec: ChainSpec):
        self.spec = spec
        (self.modes_a, self.sec_a), (self.modes_p, self.sec_p) = build_sectors(spec)
        self.log_z = mixture_log_z(self.sec_a, self.sec_p)
        # weights must sum to one exactly: the individual log-traces are
        # huge (order beta N J) and carry ~1e-10 absolute quantization, so
        # exp(logw - logZ) for each sector separately would leak that error
        # into every mixed expectation at full magnetization scale
        dw = self.sec_p.logw - self.sec_a.logw
        if math.isnan(dw):  # only from (-inf) - (-inf); split evenly
            dw = 0.0
        self.lam_a = float(np.exp(-np.logaddexp(0.0, dw)))  # 1 / (1 + e^dw)
        self.lam_p = 1.0 - self.lam_a

    def _pairs(self):
        out = []
        for modes, sec in ((self.modes_a, self.sec_a), (self.modes_p, self.sec_p)):
            if sec.logw != -math.inf:
                out.append((modes, sec))
        return out

    def mean(self, which: str) -> float:
        total = 0.0
        for modes, sec, lam in (
            (self.modes_a, self.sec_a, self.lam_a),
            (self.modes_p, self.sec_p, self.lam_p),
        ):
            if lam == 0.0:
                continue
            total += lam * sec.mean(self._weights(modes, which))
        return total

    def cov(self, which1: str, which2: str) -> float:
        terms = []
        for modes, sec, lam in (
            (self.modes_a, self.sec_a, self.lam_a),
            (self.modes_p, self.sec_p, self.lam_p),
        ):
            if lam == 0.0:
                terms.append((0.0, 0.0, 0.0, 0.0))
                continue
            d1 = self._weights(modes, which1)
            d2 = self._weights(modes, which2)
            terms.append((lam, sec.cov(d1, d2), sec.mean(d1), sec.mean(d2)))
        total = sum(lam * c for lam, c, _, _ in terms)
        (la, _, m1a, m2a), (lp, _, m1p, m2p) = terms
        total += la * lp * (m1a - m1p) * (m2a - m2p)
        return total

    def var(self, which: str) -> float:
        return self.cov(which, which)

    @staticmethod
    def _weights(modes: SectorModes, which: str) -> np.ndarray:
        if which == "h":
            return modes.de_h
        if which == "J":
            if modes.de_j is None:
                raise ValueError("coupling derivatives unavailable for gamma > 0")
            return modes.de_j
        if which == "h2":
            return modes.d2e_h
        raise ValueError(which)

    def d2_log_z_dh2(self) -> float:
        """Second field derivative of log Z (beta times the susceptibility)."""
        beta = self.spec.beta
        parts = []
        for modes, sec, lam in (
            (self.modes_a, self.sec_a, self.lam_a),
            (self.modes_p, self.sec_p, self.lam_p),
        ):
            if lam == 0.0:
                parts.append((0.0, 0.0, 0.0))
                continue
            w1 = -beta * sec.mean(modes.de_h)
            w2 = beta * beta * sec.var(modes.de_h) - beta * sec.mean(modes.d2e_h)
            parts.append((lam, w1, w2))
        (la, w1a, w2a), (lp, w1p, w2p) = parts
        return la * w2a + lp * w2p + la * lp * (w1a - w1p) ** 2

    def geometric_qfi_h(self) -> float:
        """Basis-rotation part of the field sensitivity (zero for gamma = 0)."""
        beta = self.spec.beta
        total = 0.0
        for modes, sec in self._pairs():
            if modes.pair_idx.size == 0:
                continue
            e_pair = sec.e[modes.pair_idx[:, 0]]
            x = beta * e_pair  # > 0 for every rotating pair
            # log of 2 tanh(x) sinh(x) = (x_+ - x_-)^2 / (x_+ + x_-)
            lg = (
                math.log(2.0)
                + np.log(np.tanh(x))
                + (x - math.log(2.0) + np.log1p(-np.exp(-2.0 * x)))
            )
            lo = sec.pair_projection_logs(modes.pair_idx)
            th2 = modes.pair_dtheta_h ** 2
            contrib = 4.0 * th2 * np.exp(lg + lo - self.log_z)
            total += float(np.sum(contrib))
        return total


def log_partition(spec: ChainSpec) -> float:
    """log Z of the spin ring, exact at any size."""
    return _Assembled(spec).log_z


def free_energy(spec: ChainSpec) -> float:
    """Helmholtz free energy -log(Z)/beta."""
    return -log_partition(spec) / spec.beta


def magnetization_z(spec: ChainSpec) -> float:
    """<J_z> = <sum_i sigma_i^z> in the thermal state."""
    return -_Assembled(spec).mean("h")


def susceptibility_h(spec: ChainSpec) -> float:
    """Adiabatic magnetic susceptibility d<J_z>/dh, always >= 0."""
    asm = _Assembled(spec)
    return asm.d2_log_z_dh2() / spec.beta


def qfi_h(spec: ChainSpec) -> SensitivityReport:
    """Maximal field sensitivity (quantum Fisher information) for h.

    XX: beta^2 Var(J_z), identical to beta times the susceptibility.
    XY: the same population statistics term plus the geometric term from
    the field dependence of the quasiparticle basis.
    """
    asm = _Assembled(spec)
    beta = spec.beta
    value = beta * beta * asm.var("h")
    if spec.model == "XY" and spec.gamma > 0.0:
        value += asm.geometric_qfi_h()
    return SensitivityReport(
        parameter="h",
        value=value,
        per_spin=value / spec.n,
        provenance=PROV_EXACT,
        spec=spec,
    )


def qfi_j(spec: ChainSpec) -> SensitivityReport:
    """Maximal coupling sensitivity for J (XX chain only)."""
    if spec.model != "XX":
        raise ValueError("coupling sensitivity is implemented for the XX model only")
    asm = _Assembled(spec)
    value = spec.beta ** 2 * asm.var("J")
    return SensitivityReport(
        parameter="J",
        value=value,
        per_spin=value / spec.n,
        provenance=PROV_EXACT,
        spec=spec,
    )


def qfi_h_per_mode(spec: ChainSpec) -> np.ndarray:
    """Per-mode field sensitivities on the half-integer grid.

    Product-state (single-sector) decomposition: for XX this is the
    familiar 4 beta^2 n_p (1 - n_p); for XY each (+p, -p) pair adds a
    population and a rotation term, split evenly between the partners.
    Summed, these approach the exact sensitivity once parity corrections
    are negligible (n >> beta J); each term is bounded by beta^2.
    """
    from .freefermion import _sector_modes  # internal reuse

    beta = spec.beta
    modes = _sector_modes(spec, "half")
    y = 0.5 * beta * modes.e
    sech2 = 1.0 / np.cosh(np.minimum(np.abs(y), 350.0)) ** 2
    pop = 0.25 * beta * beta * modes.de_h ** 2 * sech2
    if spec.model == "XX" or spec.gamma == 0.0:
        return pop
    rot = np.zeros_like(pop)
    x = np.minimum(beta * modes.e[modes.pair_idx[:, 0]], 350.0)
    per_pair = 4.0 * modes.pair_dtheta_h ** 2 * (1.0 - 1.0 / np.cosh(x))
    for k, (i, jdx) in enumerate(modes.pair_idx):
        rot[i] += 0.5 * per_pair[k]
        rot[jdx] += 0.5 * per_pair[k]
    return pop + rot


def _window_ok(spec: ChainSpec) -> bool:
    return 1.0 / spec.beta < spec.j - spec.h


def qfi_h_approx(spec: ChainSpec, c: float = DEFAULT_C) -> SensitivityReport:
    """Low-temperature window approximation C beta N / (J sqrt(1 - (h/J)^2)).

    Valid for |h| < J and k_B T < J - h; outside the temperature window the
    value is still returned but flagged with window_ok = False.
    """
    r = spec.h / spec.j
    if abs(r) >= 1.0:
        raise ValueError("the low-temperature approximation requires |h| < J")
    value = c * spec.beta * spec.n / (spec.j * math.sqrt(1.0 - r * r))
    return SensitivityReport(
        parameter="h",
        value=value,
        per_spin=value / spec.n,
        provenance=PROV_APPROX,
        spec=spec,
        window_ok=_window_ok(spec),
    )


def qfi_j_approx(spec: ChainSpec, c: float = DEFAULT_C) -> SensitivityReport:
    """Companion approximation C h^2 beta N / (J^3 sqrt(1 - (h/J)^2))."""
    r = spec.h / spec.j
    if abs(r) >= 1.0:
        raise ValueError("the low-temperature approximation requires |h| < J")
    value = c * spec.h ** 2 * spec.beta * spec.n / (spec.j ** 3 * math.sqrt(1.0 - r * r))
    return SensitivityReport(
        parameter="J",
        value=value,
        per_spin=value / spec.n,
        provenance=PROV_APPROX,
        spec=spec,
        window_ok=_window_ok(spec),
    )


def fit_c(
    betas,
    ns,
    h_over_j,
    j: float = 1.0,
) -> CFitResult:
    """Least-squares window constant from exact sensitivities.

    Fits qfi_h over the grid betas x ns x h_over_j to the form
    C beta N / (J sqrt(1 - (h/J)^2)).  Points must satisfy the conservative
    window beta J >= 50, N >= 1000, k_B T <= (J - h)/2; a sweep containing
    invalid points is rejected.  ``subset_spread`` is the largest deviation
    between the pooled C and any single-beta or single-N subset fit.
    """
    betas = [float(b) for b in betas]
    ns = [int(n) for n in ns]
    ratios = [float(r) for r in h_over_j]
    for b in betas:
        if b * j < 50.0:
            raise ValueError(f"fit window requires beta J >= 50, got beta={b}, J={j}")
    for n in ns:
        if n < 1000:
            raise ValueError(f"fit window requires N >= 1000, got N={n}")
    for b in betas:
        for r in ratios:
            if 1.0 / b > 0.5 * (j - r * j):
                raise ValueError(
                    f"point beta={b}, h/J={r} violates k_B T <= (J - h)/2"
                )

    table = []
    for b in betas:
        for n in ns:
            for r in ratios:
                spec = ChainSpec("XX", n, j, r * j, b)
                f = qfi_h(spec).value
                g = b * n / (j * math.sqrt(1.0 - r * r))
                table.append((b, n, f, g))

    def _fit(points):
        num = sum(f * g for _, _, f, g in points)
        den = sum(g * g for _, _, f, g in points)
        c = num / den
        resid = math.sqrt(
            sum(((f - c * g) / f) ** 2 for _, _, f, g in points if f > 0)
            / len(points)
        )
        return c, resid

    c_all, resid = _fit(table)
    spread = 0.0
    if len(betas) > 1:
        for b in betas:
            c_b, _ = _fit([p for p in table if p[0] == b])
            spread = max(spread, abs(c_b - c_all))
    if len(ns) > 1:
        for n in ns:
            c_n, _ = _fit([p for p in table if p[1] == n])
            spread = max(spread, abs(c_n - c_all))
    window = {
        "beta": betas,
        "n": ns,
        "h_over_j": ratios,
        "j": j,
        "rule": "beta*J >= 50, N >= 1000, k_B T <= (J - h)/2",
    }
    return CFitResult(c=c_all, residual=resid, window=window, subset_spread=spread)
