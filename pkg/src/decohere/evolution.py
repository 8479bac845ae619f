"""Closed, exact-joint and Lindblad time evolution of density operators.

The Lindblad integrator is classical fixed-step RK4.  Because the generator
is linear and time independent, one RK4 step is the fixed matrix
``P(h) = 1 + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24`` acting on ``vec(rho)``;
stepping applies that matrix, which is bit-for-bit the same scheme as
evaluating the four stages by hand.  The step is halved until a step-doubling
error estimate and the trace drift are both below tolerance.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hilbert import (
    SIGMA_Z,
    DensityOperator,
    DimensionError,
    NotHermitianError,
    Operator,
    StateVector,
    embed,
    l1_coherence,
    purity,
    tensor,
    tensor_all,
    trace_distance,
)

MAX_COMPOSITE_DIM = 4096


class IntegrationError(RuntimeError):
    """The integrator could not meet its tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class LindbladModel:
    h_eff: Operator
    jumps: Sequence[tuple[Operator, float]] = ()

    def __post_init__(self):
        if not self.h_eff.is_hermitian():
            raise NotHermitianError("h_eff must be Hermitian")
        for op, rate in self.jumps:
            if rate < 0:
                raise ValueError(f"negative jump rate {rate}")
            if op.dims != self.h_eff.dims:
                raise DimensionError(f"jump dims {op.dims} != Hamiltonian dims {self.h_eff.dims}")
        object.__setattr__(self, "jumps", tuple(self.jumps))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.h_eff.dims

    def liouvillian(self) -> np.ndarray:
        """Superoperator acting on row-major ``vec(rho)``.

        Uses ``vec(A rho B) = (A kron B^T) vec(rho)``.
        """
        d = self.h_eff.dim
        eye = np.eye(d)
        h = self.h_eff.data
        sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for op, rate in self.jumps:
            if rate == 0:
                continue
            L = op.data
            LdL = L.conj().T @ L
            sup += rate * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
        return sup


@dataclass(frozen=True)
class JointModel:
    """System + environment Hamiltonian pieces, each on the composite space."""

    h_sys: Operator
    h_env: Operator
    h_int: Operator
    rho_env0: DensityOperator

    def __post_init__(self):
        for name in ("h_sys", "h_env", "h_int"):
            op = getattr(self, name)
            if not op.is_hermitian():
                raise NotHermitianError(f"{name} must be Hermitian")
        if not (self.h_sys.dims == self.h_env.dims == self.h_int.dims):
            raise DimensionError("Hamiltonian pieces must share composite dims")
        env = self.rho_env0.dims
        comp = self.h_sys.dims
        if comp[len(comp) - len(env):] != env:
            raise DimensionError(f"environment dims {env} are not the trailing factors of {comp}")

    @property
    def hamiltonian(self) -> Operator:
        return self.h_sys + self.h_env + self.h_int

    @property
    def system_dims(self) -> tuple[int, ...]:
        return self.h_sys.dims[: len(self.h_sys.dims) - len(self.rho_env0.dims)]


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    matrices: np.ndarray  # shape (n_times, d, d)
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.times) != len(self.matrices):
            raise ValueError("times and states must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def states(self) -> list[DensityOperator]:
        return [DensityOperator(m, self.dims) for m in self.matrices]

    def __len__(self):
        return len(self.times)

    def element(self, i: int, j: int) -> np.ndarray:
        return self.matrices[:, i, j]

    def traces(self) -> np.ndarray:
        return np.real(np.trace(self.matrices, axis1=1, axis2=2))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrices + np.conj(np.transpose(self.matrices, (0, 2, 1))))
        return float(np.min(np.linalg.eigvalsh(herm)))

    def to_csv(self) -> str:
        d = self.matrices.shape[1]
        pairs = [(i, j) for i in range(d) for j in range(i, d)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t"]
        for i, j in pairs:
            header += [f"re_{i}{j}", f"im_{i}{j}"] if d <= 10 else [f"re_{i}_{j}", f"im_{i}_{j}"]
        w.writerow(header + ["purity", "l1_coherence"])
        for t, state in zip(self.times, self.states):
            row = [repr(float(t))]
            for i, j in pairs:
                z = state.data[i, j]
                row += [repr(float(z.real)), repr(float(z.imag))]
            row += [repr(purity(state)), repr(l1_coherence(state))]
            w.writerow(row)
        return buf.getvalue()


def _times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        raise ValueError("empty time grid")
    return t


def _unitary_series(h: np.ndarray, times: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    phases = np.exp(-1j * np.outer(times, w))  # (T, d)
    return np.einsum("ik,tk,jk->tij", v, phases, v.conj())


def evolve_closed(h: Operator, rho0: DensityOperator, times) -> Trajectory:
    """``rho(t) = U rho0 U^dag`` with ``U = exp(-iHt)`` at every requested time."""
    if not h.is_hermitian():
        raise NotHermitianError("Hamiltonian must be Hermitian")
    if h.dims != rho0.dims:
        raise DimensionError(f"Hamiltonian dims {h.dims} != state dims {rho0.dims}")
    t = _times(times)
    us = _unitary_series(h.data, t)
    mats = us @ rho0.data @ np.conj(np.transpose(us, (0, 2, 1)))
    return Trajectory(t, mats, rho0.dims)


def _joint_series(joint: JointModel, rho_s0: DensityOperator, t: np.ndarray, chunk: int = 256):
    """Yield ``(slice, composite states)`` in time chunks to bound memory."""
    rho = tensor(rho_s0, joint.rho_env0).data
    w, v = np.linalg.eigh(joint.hamiltonian.data)
    rho_eig = v.conj().T @ rho @ v
    for start in range(0, t.size, chunk):
        sl = slice(start, min(start + chunk, t.size))
        ph = np.exp(-1j * np.outer(t[sl], w))  # (T, d)
        evolved = ph[:, :, None] * rho_eig[None] * ph.conj()[:, None, :]
        yield sl, v @ evolved @ v.conj().T


def evolve_joint_trace(joint: JointModel, rho_s0: DensityOperator, times,
                       max_dim: int = MAX_COMPOSITE_DIM) -> Trajectory:
    """Exact unitary evolution of ``rho_s0 (x) rho_env0``, traced to the system."""
    sys_dims = joint.system_dims
    if rho_s0.dims != sys_dims:
        raise DimensionError(f"system state dims {rho_s0.dims} != model system dims {sys_dims}")
    comp_dim = joint.h_sys.dim
    if comp_dim > max_dim:
        raise DimensionError(f"composite dimension {comp_dim} exceeds ceiling {max_dim}")
    t = _times(times)
    ds = int(np.prod(sys_dims))
    de = comp_dim // ds
    reduced = np.empty((t.size, ds, ds), dtype=complex)
    for sl, mats in _joint_series(joint, rho_s0, t):
        n = mats.shape[0]
        reduced[sl] = np.trace(mats.reshape(n, ds, de, ds, de), axis1=2, axis2=4)
    return Trajectory(t, reduced, sys_dims)


def joint_purities(joint: JointModel, rho_s0: DensityOperator, times) -> np.ndarray:
    """Purity of the full composite state along the exact evolution."""
    t = _times(times)
    out = np.empty(t.size)
    for sl, mats in _joint_series(joint, rho_s0, t):
        out[sl] = np.real(np.einsum("tij,tji->t", mats, mats))
    return out


def _rk4_step_matrix(sup: np.ndarray, h: float) -> np.ndarray:
    a = h * sup
    eye = np.eye(sup.shape[0], dtype=complex)
    a2 = a @ a
    a3 = a2 @ a
    return eye + a + a2 / 2 + a3 / 6 + a3 @ a / 24


def evolve_lindblad(model: LindbladModel, rho0: DensityOperator, times, *,
                    tol: float = 1e-10, trace_tol: float = 1e-8,
                    max_step: float | None = None, max_halvings: int = 30) -> Trajectory:
    """Integrate ``drho/dt = -i[H, rho] + sum_k g_k (L rho L^dag - {L^dag L, rho}/2)``.

    Each output interval is covered by ``n`` equal RK4 steps; ``n`` doubles
    until full-step and half-step results agree to ``tol`` and the trace
    drift stays under ``trace_tol``.  The accepted half-step result is kept.
    """
    if model.dims != rho0.dims:
        raise DimensionError(f"model dims {model.dims} != state dims {rho0.dims}")
    t = _times(times)
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    sup = model.liouvillian()
    d = rho0.dim
    norm = np.linalg.norm(sup, 2)
    # RK4 stays well inside its stability region for h*|L| <= 0.5
    h0 = 0.5 / norm if norm > 0 else np.inf
    if max_step is not None:
        h0 = min(h0, max_step)

    cache: dict[tuple[float, int], np.ndarray] = {}

    def propagator(dt: float, n: int) -> np.ndarray:
        key = (dt, n)
        if key not in cache:
            cache[key] = np.linalg.matrix_power(_rk4_step_matrix(sup, dt / n), n)
        return cache[key]

    y = rho0.data.reshape(-1).astype(complex)
    tr0 = np.trace(rho0.data)
    out = np.empty((t.size, d, d), dtype=complex)
    out[0] = rho0.data
    for k in range(1, t.size):
        dt = t[k] - t[k - 1]
        n = max(1, int(np.ceil(dt / h0))) if np.isfinite(h0) else 1
        err = np.inf
        for _ in range(max_halvings):
            coarse = propagator(dt, n) @ y
            fine = propagator(dt, 2 * n) @ y
            err = float(np.max(np.abs(fine - coarse)))
            drift = abs(np.trace(fine.reshape(d, d)) - tr0)
            if err <= tol and drift <= trace_tol:
                break
            n *= 2
        else:
            raise IntegrationError(f"step halving failed on interval [{t[k-1]}, {t[k]}]", err)
        y = fine
        out[k] = y.reshape(d, d)
    return Trajectory(t, out, rho0.dims)


# --- diagnostics -----------------------------------------------------------

def spin_bath_model(n_bath: int = 4, seed: int = 0, coupling_range=(0.5, 1.5),
                    scale: float = 1.0, bath_state: str = "plus") -> JointModel:
    """Central qubit dephasing-coupled through ``sigma_z (x) sigma_z`` to a qubit bath.

    Couplings are drawn uniformly from ``coupling_range`` by
    ``numpy.random.default_rng(seed)`` (PCG64) and multiplied by ``scale``.
    """
    rng = np.random.default_rng(seed)
    g = scale * rng.uniform(*coupling_range, size=n_bath)
    dims = (2,) * (n_bath + 1)
    zero = Operator(np.zeros((2 ** (n_bath + 1),) * 2), dims)
    h_int = zero
    for k, gk in enumerate(g):
        h_int = h_int + gk * (embed(SIGMA_Z, 0, dims) @ embed(SIGMA_Z, k + 1, dims))
    if bath_state == "plus":
        plus = StateVector(np.array([1, 1]) / np.sqrt(2)).density()
        env = tensor_all([plus] * n_bath)
    elif bath_state == "mixed":
        env = DensityOperator.maximally_mixed((2,) * n_bath)
    else:
        raise ValueError(f"unknown bath_state {bath_state!r}")
    return JointModel(zero, zero, h_int, env)


def fit_dephasing_rate(times, coherence, fraction: float = 0.1) -> float:
    """Least-squares rate ``g`` in ``|c(t)| = |c(0)| exp(-2 g t)`` on the window's head."""
    t = np.asarray(times, float)
    c = np.abs(np.asarray(coherence))
    span = t[-1] - t[0]
    mask = (t - t[0]) <= fraction * span
    mask &= c > 0
    tt = t[mask] - t[0]
    y = np.log(c[mask] / c[0])
    if np.sum(tt * tt) == 0:
        return 0.0
    rate = -np.sum(tt * y) / (2.0 * np.sum(tt * tt))
    return max(0.0, float(rate))


def fitted_dephasing_model(joint: JointModel, rho_s0: DensityOperator, times,
                           fraction: float = 0.1) -> LindbladModel:
    """Markovian pure-dephasing model matched to the exact curve's initial decay."""
    exact = evolve_joint_trace(joint, rho_s0, times)
    rate = fit_dephasing_rate(exact.times, exact.element(0, 1), fraction)
    sys_dims = joint.system_dims
    ds = int(np.prod(sys_dims))
    h = np.zeros((ds, ds))
    return LindbladModel(Operator(h, sys_dims), [(embed(SIGMA_Z, 0, sys_dims), rate)])


@dataclass(frozen=True)
class DivergenceReport:
    times: np.ndarray
    divergence: np.ndarray
    exact_coherence: np.ndarray
    markov_coherence: np.ndarray
    revival: bool
    revival_time: float | None = None

    @property
    def max_divergence(self) -> float:
        return float(np.max(self.divergence))


def detect_revival(coherence, low: float = 0.25, high: float = 0.5):
    """Index where ``|c|`` climbs back above ``high*|c0|`` after dipping below ``low*|c0|``."""
    c = np.abs(np.asarray(coherence))
    c0 = c[0]
    below = np.flatnonzero(c < low * c0)
    if below.size == 0:
        return None
    after = np.flatnonzero(c[below[0]:] > high * c0)
    return None if after.size == 0 else int(below[0] + after[0])


def born_markov_diagnostic(joint: JointModel, fitted: LindbladModel, rho_s0: DensityOperator,
                           times, low: float = 0.25, high: float = 0.5) -> DivergenceReport:
    """Compare exact (joint-then-trace) and Markovian system trajectories."""
    if fitted.dims != joint.system_dims:
        raise DimensionError(f"fitted model dims {fitted.dims} != system dims {joint.system_dims}")
    exact = evolve_joint_trace(joint, rho_s0, times)
    markov = evolve_lindblad(fitted, rho_s0, times)
    div = np.array([trace_distance(a, b) for a, b in zip(exact.states, markov.states)])
    i, j = (0, 1) if rho_s0.dim > 1 else (0, 0)
    ce, cm = exact.element(i, j), markov.element(i, j)
    hit = detect_revival(ce, low, high) if abs(ce[0]) > 0 else None
    return DivergenceReport(exact.times, div, ce, cm, hit is not None,
                            None if hit is None else float(exact.times[hit]))


@dataclass(frozen=True)
class ZenoCurve:
    rates: np.ndarray
    survival: np.ndarray


def zeno_freeze(base_h: Operator, freeze_jump: Operator, rates, rho0: DensityOperator,
                horizon: float) -> ZenoCurve:
    """Survival ``Tr(rho0 rho(horizon))`` under monitoring jump ``sqrt(g) * freeze_jump``."""
    rates = np.asarray(list(rates), float)
    if rates.size == 0:
        raise ValueError("rate list is empty")
    survival = []
    for g in rates:
        model = LindbladModel(base_h, [(freeze_jump, float(g))])
        traj = evolve_lindblad(model, rho0, [0.0, horizon])
        survival.append(float(np.real(np.einsum("ij,ji->", rho0.data, traj.matrices[-1]))))
    return ZenoCurve(rates, np.array(survival))
