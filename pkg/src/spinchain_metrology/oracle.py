"""Brute-force ground truth: dense spin Hamiltonians, Gibbs states, and
spectral sensitivity for rings of up to 12 spins.

Everything here works on the full 2^n Hilbert space and exists to validate
the fast free-fermion paths.  All matrices are real (sigma^y sigma^y bonds
are assembled from the real matrix i sigma^y), so dense symmetric
eigensolvers apply throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh

from .model import ChainSpec

__all__ = [
    "MAX_ORACLE_N",
    "OracleResourceError",
    "DenseThermalState",
    "build_hamiltonian",
    "thermal_state",
    "qfi_spectral",
    "sld",
    "observable_moments",
    "total_sz",
    "total_sx",
    "oj_matrix",
]

MAX_ORACLE_N = 12

_SX = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
_ISY = sp.csr_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))  # i sigma^y, real
_SZ = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
_ID = sp.identity(2, format="csr")


class OracleResourceError(RuntimeError):
    pass


def _check_n(n: int) -> None:
    if n > MAX_ORACLE_N:
        raise OracleResourceError(
            f"dense exact diagonalization is limited to n <= {MAX_ORACLE_N} "
            f"spins (2^{MAX_ORACLE_N} = 4096 states); requested n = {n}"
        )


def _site_op(op: sp.csr_matrix, site: int, n: int) -> sp.csr_matrix:
    out = sp.identity(1, format="csr")
    for i in range(n):
        out = sp.kron(out, op if i == site else _ID, format="csr")
    return out


def _bond_op(op: sp.csr_matrix, i: int, j: int, n: int) -> sp.csr_matrix:
    out = sp.identity(1, format="csr")
    for k in range(n):
        if k == i or k == j:
            out = sp.kron(out, op, format="csr")
        else:
            out = sp.kron(out, _ID, format="csr")
    return out


def total_sz(n: int) -> np.ndarray:
    """Total magnetization sum_i sigma_i^z as a dense diagonal matrix."""
    _check_n(n)
    idx = np.arange(2 ** n, dtype=np.int64)
    pop = np.zeros(2 ** n, dtype=np.int64)
    for b in range(n):
        pop += (idx >> b) & 1
    return np.diag((n - 2 * pop).astype(float))


def total_sx(n: int) -> np.ndarray:
    _check_n(n)
    acc = sp.csr_matrix((2 ** n, 2 ** n))
    for i in range(n):
        acc = acc + _site_op(_SX, i, n)
    return acc.toarray()


def oj_matrix(n: int) -> np.ndarray:
    """sum_i (sigma_i^x sigma_{i+1}^x + sigma_i^y sigma_{i+1}^y), periodic."""
    _check_n(n)
    acc = sp.csr_matrix((2 ** n, 2 ** n))
    for i in range(n):
        j = (i + 1) % n
        acc = acc + _bond_op(_SX, i, j, n)
        acc = acc - _bond_op(_ISY, i, j, n)  # sy sy = -(i sy)(i sy)
    return acc.toarray()


def build_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Dense Hamiltonian of the periodic ring.

    The bond sum runs literally over i = 1..n with site n+1 = site 1, so at
    n = 2 each bond appears twice.  The XX model is assembled through the
    same code path as XY at gamma = 0, which makes the two builders agree
    entrywise.
    """
    _check_n(spec.n)
    n = spec.n
    cx = -spec.j * (1.0 + spec.gamma) / 2.0
    cy = -spec.j * (1.0 - spec.gamma) / 2.0
    acc = sp.csr_matrix((2 ** n, 2 ** n))
    for i in range(n):
        j = (i + 1) % n
        acc = acc + cx * _bond_op(_SX, i, j, n)
        acc = acc - cy * _bond_op(_ISY, i, j, n)
    h_mat = acc.toarray()
    h_mat -= spec.h * total_sz(n)
    resid = float(np.max(np.abs(h_mat - h_mat.T)))
    if resid >= 1e-13 * max(1.0, float(np.max(np.abs(h_mat)))):
        raise AssertionError(f"hermiticity residual {resid:.2e}")
    return h_mat


@dataclass(frozen=True)
class DenseThermalState:
    """Eigendecomposed Gibbs state exp(-beta H)/Z on the full 2^n space."""

    spec: ChainSpec
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # columns
    populations: np.ndarray
    log_z: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def density_matrix(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.populations) @ v.T


@lru_cache(maxsize=8)
def _thermal_state_cached(spec: ChainSpec) -> DenseThermalState:
    h_mat = build_hamiltonian(spec)
    evals, evecs = eigh(h_mat)
    x = -spec.beta * (evals - evals[0])
    w = np.exp(x)
    z0 = float(np.sum(w))
    pops = w / z0
    log_z = -spec.beta * float(evals[0]) + math.log(z0)
    if abs(float(np.sum(pops)) - 1.0) > 1e-12:
        raise AssertionError("populations do not sum to one")
    return DenseThermalState(
        spec=spec,
        eigenvalues=evals,
        eigenvectors=evecs,
        populations=pops,
        log_z=log_z,
    )


def thermal_state(spec: ChainSpec) -> DenseThermalState:
    _check_n(spec.n)
    return _thermal_state_cached(spec)


def _shift_spec(spec: ChainSpec, target: str, delta: float) -> ChainSpec:
    if target == "h":
        return dc_replace(spec, h=spec.h + delta)
    if target == "J":
        return dc_replace(spec, j=spec.j + delta)
    raise ValueError(f"target must be 'h' or 'J', got {target!r}")


def fd_step(value: float) -> float:
    """Central-difference step: max(1e-6, 1e-6 |value|)."""
    return max(1e-6, 1e-6 * abs(value))


def _qfi_from_step(spec: ChainSpec, target: str, delta: float, center: DenseThermalState,
                   eps: float = 1e-14):
    sp_p = thermal_state(_shift_spec(spec, target, +delta))
    sp_m = thermal_state(_shift_spec(spec, target, -delta))
    v = center.eigenvectors
    # <k| dtau |l> assembled without forming the dense tau derivative
    a_p = v.T @ sp_p.eigenvectors
    a_m = v.T @ sp_m.eigenvectors
    m = ((a_p * sp_p.populations) @ a_p.T - (a_m * sp_m.populations) @ a_m.T) / (2.0 * delta)
    psum = center.populations[:, None] + center.populations[None, :]
    mask = psum > eps
    f = 2.0 * float(np.sum(np.where(mask, m * m / np.where(mask, psum, 1.0), 0.0)))
    return f, m, psum, mask


def qfi_spectral(spec: ChainSpec, target: str = "h") -> float:
    """Sensitivity from the spectral sum over the exact Gibbs state.

    The state derivative comes from a central finite difference with step
    max(1e-6, 1e-6 |lambda|); the step is halved once (from 2x the base
    step) and the two results must agree to 1e-4 relative before they are
    Richardson-combined.
    """
    _check_n(spec.n)
    lam = spec.h if target == "h" else spec.j
    center = thermal_state(spec)
    d0 = fd_step(lam)
    f1, _, _, _ = _qfi_from_step(spec, target, 2.0 * d0, center)
    f2, _, _, _ = _qfi_from_step(spec, target, d0, center)
    scale = max(abs(f2), 1e-10 * spec.beta ** 2 * spec.n)
    if abs(f1 - f2) > 1e-4 * scale:
        raise ArithmeticError(
            f"finite-difference sensitivity not converged: {f1!r} vs {f2!r}"
        )
    # Richardson combination removes the leading O(step^2) truncation, which
    # dominates the error budget at large beta
    return (4.0 * f2 - f1) / 3.0


def sld_step(spec: ChainSpec, target: str = "h") -> float:
    """Step used for the SLD state derivative.

    The matrix elements divide by small population sums, which amplifies
    subtraction noise of the state difference by 1/step, while truncation
    grows as (step beta)^2 beta; the step therefore shrinks with beta.
    """
    lam = spec.h if target == "h" else spec.j
    scale = min(10.0, max(0.5, 10.0 * (3.0 / spec.beta) ** 1.5))
    return scale * fd_step(lam)


def sld(spec: ChainSpec, target: str = "h") -> np.ndarray:
    """Symmetric logarithmic derivative solving L tau + tau L = 2 dtau."""
    _check_n(spec.n)
    center = thermal_state(spec)
    _, m, psum, mask = _qfi_from_step(spec, target, sld_step(spec, target), center)
    lam_eig = np.where(mask, 2.0 * m / np.where(mask, psum, 1.0), 0.0)
    v = center.eigenvectors
    return v @ lam_eig @ v.T


def observable_moments(state: DenseThermalState, observable: np.ndarray, order: int = 4):
    """tr(tau O^k) for k = 1..order (order <= 4)."""
    if not 1 <= order <= 4:
        raise ValueError("order must be between 1 and 4")
    if observable.shape != (state.dim, state.dim):
        raise ValueError(
            f"observable shape {observable.shape} does not match dim {state.dim}"
        )
    v = state.eigenvectors
    p = state.populations
    b = v.T @ observable @ v
    out = [float(np.dot(p, np.diag(b)))]
    if order >= 2:
        out.append(float(np.dot(p, np.sum(b * b, axis=1))))
    if order >= 3:
        b2 = b @ b
        out.append(float(np.dot(p, np.sum(b2 * b, axis=1))))
        if order >= 4:
            out.append(float(np.dot(p, np.sum(b2 * b2, axis=1))))
    return out[:order]
