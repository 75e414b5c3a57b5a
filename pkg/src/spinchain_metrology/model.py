"""Probe definition and free-fermion mode data for periodic XX/XY spin chains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MODELS",
    "ChainSpec",
    "Mode",
    "ModeTable",
    "momentum",
    "dispersion_xx",
    "dispersion_xy",
    "bogoliubov_angle",
    "occupation",
    "mode_table",
]

MODELS = ("XX", "XY")


@dataclass(frozen=True)
class ChainSpec:
    """Complete description of one thermal spin-chain probe.

    Units: hbar = k_B = 1, energies in units of the coupling scale.
    ``n`` must be even and the ring is always periodic.  ``gamma`` is the
    x/y coupling asymmetry; the XX model is the gamma = 0 point and the
    Ising chain is gamma = 1.
    """

    model: str
    n: int
    j: float
    h: float
    beta: float
    gamma: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError(f"n must be even and >= 2, got {self.n}")
        if not self.j > 0:
            raise ValueError(f"ferromagnetic coupling required: j > 0, got {self.j}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.model == "XX" and self.gamma != 0.0:
            raise ValueError("the XX model has gamma = 0 by definition")
        if self.boundary != "periodic":
            raise ValueError("only periodic rings are supported")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n": self.n,
            "j": self.j,
            "h": self.h,
            "beta": self.beta,
            "gamma": self.gamma,
            "boundary": self.boundary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        return cls(
            model=str(d["model"]),
            n=int(d["n"]),
            j=float(d["j"]),
            h=float(d["h"]),
            beta=float(d["beta"]),
            gamma=float(d.get("gamma", 0.0)),
            boundary=str(d.get("boundary", "periodic")),
        )


def _check_mode_index(n: int, l: int) -> None:
    if not -n // 2 <= l <= n // 2 - 1:
        raise IndexError(f"mode index l = {l} outside [{-n // 2}, {n // 2 - 1}]")


def momentum(n: int, l: int) -> float:
    """Quantized momentum p = pi (2l + 1) / n of mode ``l``."""
    _check_mode_index(n, l)
    return math.pi * (2 * l + 1) / n


def dispersion_xx(spec: ChainSpec, l: int) -> float:
    """Signed single-mode energy 2 J (cos p - h/J) of the XX chain."""
    if spec.model != "XX":
        raise ValueError("dispersion_xx requires an XX spec")
    p = momentum(spec.n, l)
    return 2.0 * (spec.j * math.cos(p) - spec.h)


def dispersion_xy(spec: ChainSpec, l: int) -> float:
    """Quasiparticle energy 2 J sqrt((cos p - h/J)^2 + (gamma sin p)^2), >= 0."""
    if spec.model != "XY":
        raise ValueError("dispersion_xy requires an XY spec")
    p = momentum(spec.n, l)
    a = spec.j * math.cos(p) - spec.h
    b = spec.j * spec.gamma * math.sin(p)
    return 2.0 * math.hypot(a, b)


def bogoliubov_angle(spec: ChainSpec, l: int) -> float:
    """Mixing angle theta_p of the quasiparticle rotation.

    Convention: tan(2 theta) = gamma sin p / (h/J - cos p) with the branch
    theta = atan2(2 J gamma sin p, 2 (h - J cos p)) / 2, continuous in p on
    each half of the zone and equal to 0 for gamma = 0, cos p < h/J.  The
    doubly degenerate point (both arguments zero) maps to theta = 0.
    """
    if spec.model != "XY":
        raise ValueError("bogoliubov_angle requires an XY spec")
    p = momentum(spec.n, l)
    num = 2.0 * spec.j * spec.gamma * math.sin(p)
    den = 2.0 * (spec.h - spec.j * math.cos(p))
    if num == 0.0 and den == 0.0:
        return 0.0
    if num == 0.0 and den < 0.0:
        # gamma = 0 on the interaction-dominated side: pi/2 rotation
        return 0.5 * math.pi
    return 0.5 * math.atan2(num, den)


def _fermi(x: float) -> float:
    # overflow-safe 1 / (1 + e^x), good for |x| up to ~1e4 and beyond
    if x >= 0.0:
        z = math.exp(-x)
        return z / (1.0 + z)
    return 1.0 / (1.0 + math.exp(x))


def occupation(spec: ChainSpec, l: int) -> float:
    """Thermal occupation [1 + exp(beta eps_p)]^(-1) of mode ``l``."""
    if spec.model == "XX":
        eps = dispersion_xx(spec, l)
    else:
        eps = dispersion_xy(spec, l)
    return _fermi(spec.beta * eps)


@dataclass(frozen=True)
class Mode:
    l: int
    p: float
    epsilon: float
    occupation: float
    theta: float


class ModeTable:
    """Immutable per-mode data (momenta, energies, occupations, angles)."""

    def __init__(self, spec: ChainSpec, modes: tuple[Mode, ...]):
        self.spec = spec
        self.modes = modes
        self._p = np.array([m.p for m in modes])
        self._eps = np.array([m.epsilon for m in modes])
        self._occ = np.array([m.occupation for m in modes])
        self._theta = np.array([m.theta for m in modes])
        for arr in (self._p, self._eps, self._occ, self._theta):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def p(self) -> np.ndarray:
        return self._p

    @property
    def epsilon(self) -> np.ndarray:
        return self._eps

    @property
    def occupation(self) -> np.ndarray:
        return self._occ

    @property
    def theta(self) -> np.ndarray:
        return self._theta


def mode_table(spec: ChainSpec) -> ModeTable:
    """All n modes of the half-integer momentum grid, l ascending."""
    modes = []
    for l in range(-spec.n // 2, spec.n // 2):
        p = momentum(spec.n, l)
        if spec.model == "XX":
            eps = dispersion_xx(spec, l)
            theta = 0.0
        else:
            eps = dispersion_xy(spec, l)
            theta = bogoliubov_angle(spec, l)
        modes.append(Mode(l=l, p=p, epsilon=eps, occupation=_fermi(spec.beta * eps), theta=theta))
    return ModeTable(spec, tuple(modes))
