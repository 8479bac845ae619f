"""Radical-pair spin dynamics: two electrons and one spin-1/2 nucleus.

Register order is electron 1, electron 2, nucleus (8x8 operators).  The
nucleus couples to electron 1 through the hyperfine tensor
``A = diag(a_iso, a_iso, a_iso + a_axial)`` (mT) in the molecular frame.

Units: fields in microtesla, hyperfine constants in millitesla, rates in
1/s, frequencies in Hz.  The Hamiltonian is built in rad/s:

    H(t) = 2*pi*GAMMA_E * [ B(t) . (S1 + S2) + S1 . A . I ]

Recombination follows the Haberkorn form

    drho/dt = -i[H, rho] - k_s/2 {Q_S, rho} - k_t/2 {Q_T, rho}

which is linear, so the singlet yield ``k_s * int Tr(Q_S rho) dt`` over a
piecewise-constant Hamiltonian is computed exactly with the block matrix
exponential ``expm([[L, 1], [0, 0]] tau)`` (Van Loan), no time stepping.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from .hilbert import SIGMA_X, SIGMA_Y, SIGMA_Z, Operator

GAMMA_E = 28.025  # MHz / mT, electron gyromagnetic ratio over 2*pi
OMEGA_PER_MT = 2 * np.pi * GAMMA_E * 1e6  # rad/s per mT
SURVIVAL_TOL = 1e-4
STEPS_PER_RF_PERIOD = 64

_S = [m / 2 for m in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
_I2 = np.eye(2)


def _site(op, k):
    mats = [_I2, _I2, _I2]
    mats[k] = op
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


S1 = [_site(s, 0) for s in _S]
S2 = [_site(s, 1) for s in _S]
IN = [_site(s, 2) for s in _S]

_singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
Q_S = np.kron(np.outer(_singlet, _singlet), _I2).astype(complex)
Q_T = np.eye(8) - Q_S
RHO0 = Q_S / 2.0  # electron singlet (x) unpolarized nucleus


class HorizonTooShort(RuntimeError):
    pass


@dataclass(frozen=True)
class RadicalPairModel:
    a_iso: float = 0.0                        # mT
    a_axial: float = 0.0                      # mT, along the molecular z axis
    b_static: tuple = (0.0, 0.0, 0.0)         # uT
    rf_amplitude: float = 0.0                 # uT
    rf_frequency: float = 0.0                 # Hz
    rf_axis: tuple = (1.0, 0.0, 0.0)
    k_s: float = 0.0                          # 1/s
    k_t: float = 0.0                          # 1/s

    def __post_init__(self):
        if self.k_s < 0 or self.k_t < 0:
            raise ValueError("recombination rates must be non-negative")
        if self.rf_amplitude > 0:
            if abs(np.linalg.norm(self.rf_axis) - 1.0) > 1e-10:
                raise ValueError("rf_axis must be a unit vector")
        if self.rf_frequency < 0:
            raise ValueError("rf_frequency must be non-negative")

    @property
    def has_rf(self) -> bool:
        """RF at zero frequency is just a static offset and is not supported."""
        if self.rf_amplitude > 0 and self.rf_frequency <= 0:
            raise ValueError("rf_frequency must be positive when RF is on")
        return self.rf_amplitude > 0

    def with_field_angle(self, theta: float) -> "RadicalPairModel":
        """Same field strength, tilted by ``theta`` from the molecular z axis in the xz plane."""
        b = float(np.linalg.norm(self.b_static))
        return replace(self, b_static=(b * np.sin(theta), 0.0, b * np.cos(theta)))

    def hyperfine_tensor(self) -> np.ndarray:
        return np.diag([self.a_iso, self.a_iso, self.a_iso + self.a_axial])


def _zeeman(b_ut) -> np.ndarray:
    b_mt = np.asarray(b_ut, float) * 1e-3
    return sum(b_mt[k] * (S1[k] + S2[k]) for k in range(3))


def _static_part(model: RadicalPairModel) -> np.ndarray:
    A = model.hyperfine_tensor()
    hf = sum(A[i, j] * S1[i] @ IN[j] for i in range(3) for j in range(3) if A[i, j] != 0)
    return OMEGA_PER_MT * (_zeeman(model.b_static) + hf)


def _rf_part(model: RadicalPairModel) -> np.ndarray:
    return OMEGA_PER_MT * _zeeman(np.asarray(model.rf_axis, float) * model.rf_amplitude)


def build_hamiltonian(model: RadicalPairModel, t: float = 0.0) -> Operator:
    """Spin Hamiltonian (rad/s) at time ``t``."""
    h = _static_part(model)
    if model.has_rf:
        h = h + np.cos(2 * np.pi * model.rf_frequency * t) * _rf_part(model)
    return Operator(h, (2, 2, 2))


def resonance_frequencies(model: RadicalPairModel) -> np.ndarray:
    """Distinct level splittings of the static Hamiltonian, in Hz."""
    w = np.linalg.eigvalsh(_static_part(model)) / (2 * np.pi)
    diffs = np.abs(w[:, None] - w[None, :])[np.triu_indices(8, 1)]
    diffs = np.sort(diffs[diffs > 1.0])
    keep = np.concatenate([[True], np.diff(diffs) > 1.0]) if diffs.size else diffs.astype(bool)
    return diffs[keep]


def _propagate_unitary(h: np.ndarray, tau: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * tau)) @ v.conj().T


def singlet_probability(model: RadicalPairModel, times, steps_per_period: int = STEPS_PER_RF_PERIOD) -> np.ndarray:
    """``p_S(t) = Tr[(Q_S (x) 1) rho(t)]`` without recombination."""
    if model.k_s or model.k_t:
        raise ValueError("singlet_probability is recombination-free; use singlet_yield")
    t = np.asarray(times, float)
    if not model.has_rf:
        h = _static_part(model)
        w, v = np.linalg.eigh(h)
        r = v.conj().T @ RHO0 @ v
        q = v.conj().T @ Q_S @ v
        ph = np.exp(-1j * np.outer(t, w))
        # Tr(Q U r U^dag) = sum_ik q_ki r_ik e^{-i(w_i - w_k)t} in the eigenbasis
        return np.real(np.einsum("ki,ik,ti,tk->t", q, r, ph, ph.conj(), optimize=True))
    period = 1.0 / model.rf_frequency
    h0, h1 = _static_part(model), _rf_part(model)
    rho = RHO0.astype(complex)
    now = 0.0
    out = np.empty(t.size)
    for k, target in enumerate(t):
        span = target - now
        if span < 0:
            raise ValueError("times must be non-decreasing")
        n = int(np.ceil(span / (period / steps_per_period))) if span > 0 else 0
        for m in range(n):
            dt = span / n
            mid = now + (m + 0.5) * dt
            u = _propagate_unitary(h0 + np.cos(2 * np.pi * model.rf_frequency * mid) * h1, dt)
            rho = u @ rho @ u.conj().T
        now = target
        out[k] = np.real(np.trace(Q_S @ rho))
    return out


@dataclass(frozen=True)
class YieldResult:
    singlet_yield: float
    triplet_yield: float
    surviving: float
    horizon: float


def _haberkorn_liouvillian(h: np.ndarray, k_s: float, k_t: float) -> np.ndarray:
    h_eff = h - 0.5j * (k_s * Q_S + k_t * Q_T)
    eye = np.eye(8)
    return -1j * (np.kron(h_eff, eye) - np.kron(eye, h_eff.conj()))


def _augmented_generator(h: np.ndarray, k_s: float, k_t: float) -> np.ndarray:
    """Generator on ``(vec rho, Y_S, Y_T)`` with ``dY_S/dt = k_s Tr(Q_S rho)`` etc.

    Its exponential carries both the propagator and the yield integrals, so
    a piecewise-constant Hamiltonian is handled exactly.
    """
    m = np.zeros((66, 66), dtype=complex)
    m[:64, :64] = _haberkorn_liouvillian(h, k_s, k_t)
    # Tr(Q rho) = vec(Q^T) . vec(rho) for row-major vec
    m[64, :64] = k_s * Q_S.T.reshape(-1)
    m[65, :64] = k_t * Q_T.T.reshape(-1)
    return m


def default_horizon(model: RadicalPairModel, tol: float = SURVIVAL_TOL) -> float:
    """Long enough for the slowest channel to leave less than ``tol/10`` behind."""
    rates = [k for k in (model.k_s, model.k_t) if k > 0]
    if not rates:
        raise ValueError("singlet_yield needs k_s > 0 or k_t > 0")
    return float(np.log(10.0 / tol) / min(rates))


def singlet_yield(model: RadicalPairModel, horizon: float | None = None,
                  max_surviving: float | None = SURVIVAL_TOL,
                  steps_per_period: int = STEPS_PER_RF_PERIOD) -> YieldResult:
    """Singlet and triplet recombination yields up to ``horizon`` seconds.

    With RF on the horizon is rounded up to a whole number of RF periods.
    Raises :class:`HorizonTooShort` if more than ``max_surviving`` of the
    pair population is left at the horizon (pass ``None`` to skip).
    """
    if model.k_s <= 0 and model.k_t <= 0:
        raise ValueError("singlet_yield needs k_s > 0 or k_t > 0")
    if horizon is None:
        horizon = default_horizon(model)
    y = np.zeros(66, dtype=complex)
    y[:64] = RHO0.reshape(-1)
    h0 = _static_part(model)
    if not model.has_rf:
        y = expm(_augmented_generator(h0, model.k_s, model.k_t) * horizon) @ y
    else:
        period = 1.0 / model.rf_frequency
        n_periods = max(1, int(np.ceil(horizon / period - 1e-9)))
        horizon = n_periods * period
        h1 = _rf_part(model)
        dt = period / steps_per_period
        one_period = np.eye(66, dtype=complex)
        for m in range(steps_per_period):
            mid = (m + 0.5) * dt
            gen = _augmented_generator(h0 + np.cos(2 * np.pi * model.rf_frequency * mid) * h1,
                                       model.k_s, model.k_t)
            one_period = expm(gen * dt) @ one_period
        for _ in range(n_periods):
            y = one_period @ y
    ys, yt = float(y[64].real), float(y[65].real)
    surv = float(np.real(np.trace(y[:64].reshape(8, 8))))
    if max_surviving is not None and surv > max_surviving:
        raise HorizonTooShort(f"surviving population {surv:.3e} exceeds {max_surviving:.1e} "
                              f"at horizon {horizon:.3e} s")
    return YieldResult(ys, yt, surv, horizon)


@dataclass(frozen=True)
class Sweep:
    param: np.ndarray
    yields: np.ndarray
    baseline: float | None = None

    @property
    def deviation(self) -> np.ndarray:
        return self.yields - self.baseline

    def extremum(self) -> float:
        """Parameter value with the largest ``|yield - baseline|``."""
        return float(self.param[np.argmax(np.abs(self.deviation))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "yield"])
        for p, y in zip(self.param, self.yields):
            w.writerow([repr(float(p)), repr(float(y))])
        return buf.getvalue()


def rf_disruption_scan(model: RadicalPairModel, freq_grid, horizon: float | None = None,
                       steps_per_period: int = STEPS_PER_RF_PERIOD) -> Sweep:
    """Singlet yield versus RF frequency (Hz), with the RF-free yield as baseline."""
    freqs = np.asarray(freq_grid, float)
    if freqs.size == 0:
        raise ValueError("empty frequency grid")
    static = replace(model, rf_amplitude=0.0)
    base = singlet_yield(static, horizon).singlet_yield
    if not model.has_rf:
        return Sweep(freqs, np.full(freqs.size, base), base)
    ys = [singlet_yield(replace(model, rf_frequency=f), horizon,
                        steps_per_period=steps_per_period).singlet_yield for f in freqs]
    return Sweep(freqs, np.array(ys), base)


def orientation_sweep(model: RadicalPairModel, angle_grid, horizon: float | None = None) -> Sweep:
    """Singlet yield versus angle (rad) between the static field and the molecular axis."""
    angles = np.asarray(angle_grid, float)
    ys = [singlet_yield(model.with_field_angle(a), horizon).singlet_yield for a in angles]
    return Sweep(angles, np.array(ys))
