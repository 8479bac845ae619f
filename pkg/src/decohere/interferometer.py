"""Two-path and N-path interference with environmental which-path records.

The fringe visibility of a two-path state is set entirely by the overlap of
the environment records the two paths leave behind.  Screen geometry is
abstracted into a relative phase ``phi(x)``; by default ``phi(x) = 2*pi*x``,
i.e. one fringe per unit of screen coordinate.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .hilbert import DensityOperator, DimensionError, Operator, StateVector

TWO_PI = 2.0 * np.pi


def default_phase(x):
    return TWO_PI * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class TwoPathState:
    amp1: complex
    amp2: complex
    env1: StateVector
    env2: StateVector
    phase_fn: Callable = default_phase

    def __post_init__(self):
        p = abs(self.amp1) ** 2 + abs(self.amp2) ** 2
        if abs(p - 1.0) > 1e-10:
            raise ValueError(f"path amplitudes not normalized (|a1|^2+|a2|^2={p!r})")
        if self.env1.dims != self.env2.dims:
            raise DimensionError(f"environment records differ in dims: {self.env1.dims} vs {self.env2.dims}")

    @property
    def overlap(self) -> complex:
        """``<E2|E1>``."""
        return self.env2.inner(self.env1)

    @classmethod
    def equal_split(cls, env1: StateVector, env2: StateVector, phase_fn=default_phase) -> "TwoPathState":
        a = 1.0 / np.sqrt(2.0)
        return cls(a, a, env1, env2, phase_fn)


@dataclass(frozen=True)
class ScreenProfile:
    xs: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        if np.any(self.intensities < -1e-12):
            raise ValueError("screen intensities must be non-negative")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "intensity"])
        for x, i in zip(self.xs, self.intensities):
            w.writerow([repr(float(x)), repr(float(i))])
        return buf.getvalue()


def records_with_overlap(overlap: complex, dim: int = 2) -> tuple[StateVector, StateVector]:
    """Environment records ``E1, E2`` with ``<E2|E1> = overlap`` (|overlap| <= 1)."""
    if abs(overlap) > 1 + 1e-12 or dim < 2:
        raise ValueError("need |overlap| <= 1 and an environment of dimension >= 2")
    e1 = np.zeros(dim, dtype=complex)
    e1[0] = 1.0
    e2 = np.zeros(dim, dtype=complex)
    e2[0] = np.conj(overlap)
    e2[1] = np.sqrt(max(0.0, 1.0 - abs(overlap) ** 2))
    return StateVector(e1, (dim,)), StateVector.normalized(e2, (dim,))


def joint_density(state: TwoPathState) -> DensityOperator:
    """Path (qubit) x environment density operator of ``a1|0>|E1> + a2|1>|E2>``."""
    e1, e2 = state.env1.amplitudes, state.env2.amplitudes
    psi = np.concatenate([state.amp1 * e1, state.amp2 * e2])
    dims = (2,) + state.env1.dims
    return DensityOperator(np.outer(psi, psi.conj()), dims)


def screen_intensity(state: TwoPathState, xs) -> ScreenProfile:
    xs = np.asarray(xs, dtype=float)
    cross = state.amp1 * np.conj(state.amp2) * state.overlap
    phi = state.phase_fn(xs)
    inten = abs(state.amp1) ** 2 + abs(state.amp2) ** 2 + 2.0 * np.real(cross * np.exp(1j * phi))
    # rounding can push a perfect zero slightly negative
    inten = np.where((inten < 0) & (inten > -1e-12), 0.0, inten)
    return ScreenProfile(xs, inten)


def visibility(profile: ScreenProfile) -> float:
    if profile.intensities.size < 2:
        raise ValueError("visibility needs at least two samples")
    hi = float(np.max(profile.intensities))
    lo = float(np.min(profile.intensities))
    if hi + lo <= 0.0:
        raise ValueError("visibility undefined for an all-zero profile")
    return (hi - lo) / (hi + lo)


def recohere(state: TwoPathState, env_unitary: Operator) -> TwoPathState:
    """Rotate the second path's record; the eraser move that can restore fringes.

    Only ``E2`` is mapped: a unitary applied to both records would leave
    their overlap, and hence the visibility, unchanged.
    """
    if not env_unitary.is_unitary():
        raise ValueError("env_unitary must be unitary")
    return replace(state, env2=env_unitary.apply(state.env2))


@dataclass(frozen=True)
class MultiPathModel:
    """Finite sum over paths; pruned paths are flagged dead rather than removed."""

    path_phases: Sequence[Callable]
    weights: np.ndarray
    alive: np.ndarray = None
    global_shift: float = 0.0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=complex)
        if len(self.path_phases) != weights.size:
            raise ValueError("one phase function per path weight required")
        alive = np.ones(weights.size, bool) if self.alive is None else np.asarray(self.alive, bool)
        if alive.size != weights.size:
            raise ValueError("alive mask length must equal n_paths")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "alive", alive)

    @property
    def n_paths(self) -> int:
        return self.weights.size

    def prune(self, indices) -> "MultiPathModel":
        alive = self.alive.copy()
        alive[list(indices)] = False
        return replace(self, alive=alive)

    def shifted(self, shift: float) -> "MultiPathModel":
        return replace(self, global_shift=shift)


def two_slit_paths(n_paths: int = 12, separation: float = 1.0, slit_width: float = 0.1,
                   curvature: float = 2.0) -> MultiPathModel:
    """Paths split evenly between two slit groups centred at ``+-separation/2``.

    Path k crosses the slit plane at transverse offset ``s_k`` and picks up
    ``phi_k(x) = 2*pi*s_k*x + curvature*pi*(s_k - centre)**2 / slit_width**2``.
    With ``separation = 1`` the two groups beat with one fringe per unit x.
    """
    if n_paths < 2 or n_paths % 2:
        raise ValueError("n_paths must be an even number >= 2")
    per = n_paths // 2
    offsets = np.linspace(-slit_width / 2, slit_width / 2, per) if per > 1 else np.zeros(1)
    phases = []
    for centre in (-separation / 2, separation / 2):
        for off in offsets:
            s = centre + off
            quad = curvature * np.pi * (off / slit_width) ** 2

            def phi(x, s=s, quad=quad):
                return TWO_PI * s * np.asarray(x, dtype=float) + quad

            phases.append(phi)
    weights = np.full(n_paths, 1.0 / np.sqrt(n_paths), dtype=complex)
    return MultiPathModel(phases, weights)


def multipath_intensity(model: MultiPathModel, xs) -> ScreenProfile:
    idx = np.flatnonzero(model.alive)
    if idx.size == 0:
        raise ValueError("no alive paths")
    xs = np.asarray(xs, dtype=float)
    w = model.weights[idx]
    w = w / np.sqrt(np.sum(np.abs(w) ** 2))
    amp = np.zeros(xs.shape, dtype=complex)
    for k, wk in zip(idx, w):
        amp += wk * np.exp(1j * (model.path_phases[k](xs) + model.global_shift))
    return ScreenProfile(xs, np.abs(amp) ** 2)
