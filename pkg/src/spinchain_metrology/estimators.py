"""Error-propagation sensitivities of concrete sub-optimal estimators.

F(lambda; O) = |d<O>/d lambda|^2 / Var(O) for single-shot readout of the
observable O.  For the XX chain with O = J_z or the bond operator the
moments are available in closed form through the free-fermion solution and
the magnetization/bond estimators saturate their quantum bounds exactly.
Everything else (XY model, the J_x^2 estimator) runs through the dense
oracle with central finite differences for the derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracle
from .model import ChainSpec
from .thermo import PROV_EXACT, PROV_ORACLE, SensitivityReport, _Assembled

__all__ = ["OBSERVABLES", "TARGETS", "EstimatorSpec", "estimator_sensitivity", "jz_variance_xx"]

OBSERVABLES = ("Jz", "JxSquared", "OJ")
TARGETS = ("h", "J")


@dataclass(frozen=True)
class EstimatorSpec:
    """An (observable, target parameter) pairing."""

    observable: str
    target: str

    def __post_init__(self):
        if self.observable not in OBSERVABLES:
            raise ValueError(f"observable must be one of {OBSERVABLES}")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if self.observable == "JxSquared" and self.target == "J":
            raise ValueError("the (JxSquared, J) pairing is not supported")


def jz_variance_xx(spec: ChainSpec) -> float:
    """Thermal variance of the total magnetization J_z (XX chain)."""
    if spec.model != "XX":
        raise ValueError("jz_variance_xx requires an XX spec")
    return _Assembled(spec).var("h")  # J_z = -X_h up to sign, same variance


def _closed_form(spec: ChainSpec, est: EstimatorSpec) -> float:
    asm = _Assembled(spec)
    beta = spec.beta
    var_h = asm.var("h")
    if est.observable == "Jz":
        if est.target == "h":
            deriv = beta * var_h  # susceptibility
            return deriv * deriv / var_h
        cov = asm.cov("h", "J")
        return beta * beta * cov * cov / var_h
    # bond operator O_J = -2 X_J
    var_j = asm.var("J")
    if est.target == "J":
        deriv = 2.0 * beta * var_j
        return deriv * deriv / (4.0 * var_j)
    cov = asm.cov("h", "J")
    deriv = 2.0 * beta * cov
    return deriv * deriv / (4.0 * var_j)


def _oracle_observable(spec: ChainSpec, est: EstimatorSpec) -> np.ndarray:
    if est.observable == "Jz":
        return oracle.total_sz(spec.n)
    if est.observable == "OJ":
        return oracle.oj_matrix(spec.n)
    sx = oracle.total_sx(spec.n)
    return sx @ sx


def _oracle_mean(spec: ChainSpec, obs: np.ndarray) -> float:
    return oracle.observable_moments(oracle.thermal_state(spec), obs, 1)[0]


def _oracle_sensitivity(spec: ChainSpec, est: EstimatorSpec) -> float:
    obs = _oracle_observable(spec, est)
    if est.observable == "JxSquared":
        jx_mean = _oracle_mean(spec, oracle.total_sx(spec.n))
        if abs(jx_mean) >= 1e-12:
            raise AssertionError(f"<J_x> = {jx_mean!r} breaks the assumed Z2 symmetry")
    lam = spec.h if est.target == "h" else spec.j
    d0 = oracle.fd_step(lam)

    def deriv(step: float) -> float:
        mp = _oracle_mean(oracle._shift_spec(spec, est.target, +step), obs)
        mm = _oracle_mean(oracle._shift_spec(spec, est.target, -step), obs)
        return (mp - mm) / (2.0 * step)

    g1 = deriv(d0)
    g2 = deriv(0.5 * d0)
    scale = max(abs(g2), 1e-9 * spec.n * spec.beta)
    if abs(g1 - g2) > 1e-4 * scale:
        raise ArithmeticError(f"estimator derivative not converged: {g1!r} vs {g2!r}")
    m1, m2 = oracle.observable_moments(oracle.thermal_state(spec), obs, 2)
    var = m2 - m1 * m1
    return g2 * g2 / var


def estimator_sensitivity(spec: ChainSpec, est: EstimatorSpec) -> SensitivityReport:
    """Single-shot sensitivity of a concrete estimator.

    Closed-form for the XX chain with J_z or the bond operator; the oracle
    route (n <= 12) otherwise.
    """
    closed = spec.model == "XX" and est.observable in ("Jz", "OJ")
    if closed:
        value = _closed_form(spec, est)
        prov = PROV_EXACT
    else:
        if spec.n > oracle.MAX_ORACLE_N:
            raise oracle.OracleResourceError(
                f"estimator {est.observable} on a {spec.model} chain needs the dense "
                f"oracle, which is limited to n <= {oracle.MAX_ORACLE_N}; "
                f"requested n = {spec.n}"
            )
        value = _oracle_sensitivity(spec, est)
        prov = PROV_ORACLE
    return SensitivityReport(
        parameter=est.target,
        value=value,
        per_spin=value / spec.n,
        provenance=prov,
        spec=spec,
    )
