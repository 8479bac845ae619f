"""Gaussian-bath influence functional on discretized path pairs.

A linearly coupled harmonic bath with spectral density ``J(w)`` enters the
reduced propagator only through two kernels,

    nu(t)  = int_0^inf dw J(w) coth(w / 2T) cos(w t)      (noise)
    eta(t) = int_0^inf dw J(w) sin(w t)                    (dissipation)

and the influence functional of a path pair is ``F = exp(-gamma + i*phi)``
with ``gamma`` a quadratic form of ``Delta = x - x'`` in ``nu`` and ``phi``
a causal bilinear form of ``Delta`` and ``Sigma = x + x'`` in ``eta``.
Units: hbar = 1, unit mass.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

GRID_TOL = 1e-12
OMEGA_SPAN = 20.0  # frequency integrals run over [0, OMEGA_SPAN * cutoff]
N_OMEGA = 4097     # Simpson nodes, i.e. 4096 panels


@dataclass(frozen=True)
class SpectralDensity:
    """``J(w) = coupling * w**s * cutoff**(1-s) * exp(-w/cutoff)`` or a single mode.

    For ``family="single_mode"`` the density is ``coupling * delta(w - mode_freq)``.
    """

    family: str = "ohmic"
    s: float = 1.0
    coupling: float = 1.0
    cutoff: float = 1.0
    mode_freq: float = 1.0
    temperature: float = 0.0

    def __post_init__(self):
        if self.family not in ("ohmic", "supraohmic", "single_mode"):
            raise ValueError(f"unknown spectral family {self.family!r}")
        if self.coupling <= 0 or self.cutoff <= 0:
            raise ValueError("coupling and cutoff must be positive")
        if self.s < 1:
            raise ValueError("exponent s must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.family == "single_mode" and self.mode_freq <= 0:
            raise ValueError("single_mode needs a positive mode_freq")

    @classmethod
    def ohmic(cls, coupling=1.0, cutoff=1.0, temperature=0.0):
        return cls("ohmic", 1.0, coupling, cutoff, temperature=temperature)

    @classmethod
    def supraohmic(cls, s=3.0, coupling=1.0, cutoff=1.0, temperature=0.0):
        return cls("supraohmic", s, coupling, cutoff, temperature=temperature)

    @classmethod
    def single_mode(cls, mode_freq, coupling=1.0, temperature=0.0):
        return cls("single_mode", 1.0, coupling, 1.0, mode_freq, temperature)

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        return self.coupling * w ** self.s * self.cutoff ** (1 - self.s) * np.exp(-w / self.cutoff)

    def thermal_weight(self, w):
        """``J(w) coth(w/2T)`` with its finite ``w -> 0`` limit."""
        w = np.asarray(w, dtype=float)
        j = self(w)
        if self.temperature == 0:
            return j
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = j / np.tanh(w / (2 * self.temperature))
        # J ~ w^s, coth ~ 2T/w near zero
        lim = 2 * self.temperature * self.coupling if self.s == 1 else 0.0
        return np.where(w == 0, lim, out)


@dataclass(frozen=True)
class PathPair:
    tgrid: np.ndarray
    x: np.ndarray
    x_prime: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tgrid, float)
        x = np.asarray(self.x, float)
        xp = np.asarray(self.x_prime, float)
        if not (t.size == x.size == xp.size):
            raise ValueError("tgrid, x and x_prime must have equal lengths")
        if t.size < 2:
            raise ValueError("need at least two grid points")
        check_uniform(t)
        object.__setattr__(self, "tgrid", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", xp)

    @property
    def dt(self) -> float:
        return float(self.tgrid[1] - self.tgrid[0])

    @classmethod
    def static(cls, tgrid, separation: float) -> "PathPair":
        """Two paths parked at ``+-separation/2`` for the whole window."""
        t = np.asarray(tgrid, float)
        return cls(t, np.full(t.size, separation / 2), np.full(t.size, -separation / 2))


@dataclass(frozen=True)
class BathKernels:
    tgrid: np.ndarray
    nu: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class InfluenceResult:
    gamma: float
    phi: float

    @property
    def value(self) -> complex:
        return complex(np.exp(-self.gamma + 1j * self.phi))


def check_uniform(tgrid) -> float:
    t = np.asarray(tgrid, float)
    if t.size < 2:
        return 0.0
    steps = np.diff(t)
    if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > GRID_TOL * max(1.0, abs(steps[0])):
        raise ValueError("time grid must be uniform and increasing")
    return float(steps[0])


def simpson_weights(n: int, h: float) -> np.ndarray:
    if n < 3 or n % 2 == 0:
        raise ValueError("composite Simpson needs an odd number (>= 3) of nodes")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def frequency_grid(J: SpectralDensity, n_omega: int = N_OMEGA, span: float = OMEGA_SPAN):
    omega = np.linspace(0.0, span * J.cutoff, n_omega)
    return omega, simpson_weights(n_omega, omega[1] - omega[0])


def kernels_from_spectral_density(J: SpectralDensity, tgrid, n_omega: int = N_OMEGA,
                                  span: float = OMEGA_SPAN) -> BathKernels:
    """Noise and dissipation kernels sampled on ``tgrid`` (any uniform grid)."""
    t = np.asarray(tgrid, float)
    check_uniform(t)
    if J.family == "single_mode":
        w0 = J.mode_freq
        coth = 1.0 if J.temperature == 0 else 1.0 / np.tanh(w0 / (2 * J.temperature))
        return BathKernels(t, J.coupling * coth * np.cos(w0 * t), J.coupling * np.sin(w0 * t))
    omega, wts = frequency_grid(J, n_omega, span)
    noise_w = wts * J.thermal_weight(omega)
    diss_w = wts * J(omega)
    nu = np.empty(t.size)
    eta = np.empty(t.size)
    step = max(1, 2_000_000 // omega.size)
    for a in range(0, t.size, step):
        arg = np.outer(t[a:a + step], omega)
        nu[a:a + step] = np.cos(arg) @ noise_w
        eta[a:a + step] = np.sin(arg) @ diss_w
    return BathKernels(t, nu, eta)


def _trapezoid_weights(n: int) -> np.ndarray:
    c = np.ones(n)
    c[0] = c[-1] = 0.5
    return c


def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size * b.size <= 250_000:
        return np.convolve(a, b)
    return fftconvolve(a, b)


def _lag_kernels(paths: PathPair, kernels: BathKernels):
    n = paths.tgrid.size
    if kernels.tgrid.size < n:
        raise ValueError("kernel grid shorter than the path grid")
    lags = paths.tgrid - paths.tgrid[0]
    if np.max(np.abs(kernels.tgrid[:n] - lags)) > GRID_TOL * max(1.0, lags[-1]):
        raise ValueError("kernel grid must equal the path lag grid 0, dt, 2dt, ...")
    return kernels.nu[:n], kernels.eta[:n]


def influence_functional(paths: PathPair, kernels: BathKernels) -> InfluenceResult:
    """Decoherence exponent ``gamma`` and phase ``phi`` of ``F[x, x']``.

    Both double sums run over the ordered region ``j <= i`` with trapezoid
    weights in each index and weight 1/2 on the diagonal; for the symmetric
    noise kernel that equals half the full square.
    """
    nu, eta = _lag_kernels(paths, kernels)
    n = nu.size
    dt = paths.dt
    c = _trapezoid_weights(n)
    delta = paths.x - paths.x_prime
    sigma = paths.x + paths.x_prime
    u = c * delta
    if not np.any(u):
        return InfluenceResult(0.0, 0.0)
    full = np.concatenate([nu[:0:-1], nu])
    toeplitz_u = _convolve(full, u)[n - 1: 2 * n - 1]
    gamma = 0.5 * dt * dt * float(u @ toeplitz_u)
    v = c * sigma
    causal = _convolve(eta, v)[:n] - 0.5 * eta[0] * v
    phi = dt * dt * float(u @ causal)
    return InfluenceResult(gamma, phi)


def bare_action(x, tgrid, lagrangian: Callable) -> float:
    """Trapezoid-rule action with centred finite-difference velocities."""
    t = np.asarray(tgrid, float)
    dt = check_uniform(t)
    x = np.asarray(x, float)
    xdot = np.gradient(x, dt)
    return float(np.sum(_trapezoid_weights(t.size) * lagrangian(x, xdot, t)) * dt)


def free_particle(x, xdot, t):
    return 0.5 * xdot ** 2


def effective_action(paths: PathPair, bare_lagrangian: Callable = free_particle,
                     kernels: BathKernels | None = None) -> complex:
    """``A = S[x] - S[x'] + phi + i*gamma`` so that ``exp(iA) = exp(i(S - S')) F``."""
    s = bare_action(paths.x, paths.tgrid, bare_lagrangian)
    sp = bare_action(paths.x_prime, paths.tgrid, bare_lagrangian)
    if kernels is None:
        return complex(s - sp)
    res = influence_functional(paths, kernels)
    return complex(s - sp + res.phi, res.gamma)


@dataclass(frozen=True)
class ExponentCurve:
    t: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray

    def at(self, time: float) -> float:
        return float(np.interp(time, self.t, self.gamma))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "gamma", "phi"])
        for row in zip(self.t, self.gamma, self.phi):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def decoherence_exponent_curve(J: SpectralDensity, separation: float, horizon: float,
                               n_steps: int = 400) -> ExponentCurve:
    """``gamma(t)`` for two static paths at ``+-separation/2``, on ``n_steps`` intervals."""
    t = np.linspace(0.0, horizon, n_steps + 1)
    kern = kernels_from_spectral_density(J, t)
    gam = np.zeros(t.size)
    phi = np.zeros(t.size)
    if separation != 0:
        for k in range(1, t.size):
            res = influence_functional(PathPair.static(t[: k + 1], separation), kern)
            gam[k], phi[k] = res.gamma, res.phi
    return ExponentCurve(t, gam, phi)
