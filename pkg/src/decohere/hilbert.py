"""Finite-dimensional states and operators with quantum semantics.

Conventions used everywhere in the package:

* big-endian tensor ordering: subsystem 0 is the leftmost Kronecker factor,
  so its basis index is the most significant digit;
* hbar = 1;
* dense ``numpy`` matrices only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-10
NORM_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when operands have incompatible subsystem dimensions."""


class NotHermitianError(ValueError):
    pass


def _as_dims(dims: Iterable[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise DimensionError(f"subsystem dimensions must be positive, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state ``|psi>`` on a tensor-product space."""

    amplitudes: np.ndarray
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        dims = (amps.size,) if self.dims is None else _as_dims(self.dims)
        if int(np.prod(dims)) != amps.size:
            raise DimensionError(f"{amps.size} amplitudes do not fit dims {dims}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def normalized(cls, amplitudes, dims=None) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm, dims)

    @classmethod
    def basis(cls, index: int, dims: Sequence[int]) -> "StateVector":
        dims = _as_dims(dims)
        amps = np.zeros(int(np.prod(dims)), dtype=complex)
        amps[index] = 1.0
        return cls(amps, dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        _check_same_dims(self.dims, other.dims)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix acting on a tensor-product space."""

    data: np.ndarray
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        mat = np.asarray(self.data, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"operator must be a square matrix, got shape {mat.shape}")
        dims = (mat.shape[0],) if self.dims is None else _as_dims(self.dims)
        if int(np.prod(dims)) != mat.shape[0]:
            raise DimensionError(f"matrix side {mat.shape[0]} does not match dims {dims}")
        mat = np.array(mat, copy=True)
        mat.setflags(write=False)
        object.__setattr__(self, "data", mat)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.dims)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol)

    def is_unitary(self, tol: float = 1e-10) -> bool:
        eye = np.eye(self.dim)
        return bool(np.max(np.abs(self.data.conj().T @ self.data - eye)) <= tol)

    def apply(self, psi: StateVector) -> StateVector:
        _check_same_dims(self.dims, psi.dims)
        return StateVector.normalized(self.data @ psi.amplitudes, psi.dims)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        _check_same_dims(self.dims, other.dims)
        return Operator(self.data @ other.data, self.dims)

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_dims(self.dims, other.dims)
        return Operator(self.data + other.data, self.dims)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_dims(self.dims, other.dims)
        return Operator(self.data - other.data, self.dims)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.data * scalar, self.dims)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(-self.data, self.dims)


class DensityOperator(Operator):
    """Hermitian, unit-trace, positive semidefinite operator.

    Construction only checks shape; call :meth:`check` (or build through
    :func:`density_from_matrix`) to enforce the physical invariants.
    """

    def check(self, psd_floor: float = PSD_FLOOR) -> "DensityOperator":
        problems = density_violations(self.data, psd_floor)
        if problems:
            raise ValueError("invalid density operator: " + "; ".join(problems))
        return self

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityOperator":
        dims = _as_dims(dims)
        d = int(np.prod(dims))
        return cls(np.eye(d) / d, dims)


def density_violations(mat: np.ndarray, psd_floor: float = PSD_FLOOR) -> list[str]:
    problems = []
    herm = np.max(np.abs(mat - mat.conj().T))
    if herm > HERMITIAN_TOL:
        problems.append(f"not Hermitian (max |rho - rho^dag| = {herm:.3e})")
    tr = np.trace(mat)
    if abs(tr - 1.0) > TRACE_TOL:
        problems.append(f"trace {tr.real:.12g} != 1")
    lo = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]
    if lo < psd_floor:
        problems.append(f"negative eigenvalue {lo:.3e}")
    return problems


def density_from_matrix(mat, dims=None, psd_floor: float = PSD_FLOOR) -> DensityOperator:
    """Validate ``mat`` and clamp eigenvalues in ``[psd_floor, 0)`` to zero."""
    mat = np.asarray(mat, dtype=complex)
    problems = density_violations(mat, psd_floor)
    if problems:
        raise ValueError("invalid density operator: " + "; ".join(problems))
    herm = 0.5 * (mat + mat.conj().T)
    w, v = np.linalg.eigh(herm)
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        herm = (v * w) @ v.conj().T
        herm /= np.trace(herm).real
    return DensityOperator(herm, dims)


def _check_same_dims(a: tuple[int, ...], b: tuple[int, ...]) -> None:
    if tuple(a) != tuple(b):
        raise DimensionError(f"dimension mismatch: {a} vs {b}")


# --- standard operators --------------------------------------------------

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |1> -> |0>
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"I": I2, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


def identity(dims: Sequence[int]) -> Operator:
    dims = _as_dims(dims)
    return Operator(np.eye(int(np.prod(dims))), dims)


def embed(op: np.ndarray, site: int, dims: Sequence[int]) -> Operator:
    """Place a single-site matrix on ``site`` of a register with ``dims``."""
    dims = _as_dims(dims)
    out = np.ones((1, 1), dtype=complex)
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == site else np.eye(d))
    return Operator(out, dims)


def pauli_string(label: str) -> Operator:
    """``pauli_string("XIZ")`` is X on qubit 0, Z on qubit 2."""
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, PAULIS[ch])
    return Operator(out, (2,) * len(label))


# --- tensor composition and partial trace ----------------------------------

def tensor(a, b):
    """Kronecker product of two states or two operators."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims)
    if isinstance(a, StateVector) or isinstance(b, StateVector):
        raise TypeError("cannot tensor a state vector with an operator")
    cls = DensityOperator if isinstance(a, DensityOperator) and isinstance(b, DensityOperator) else Operator
    return cls(np.kron(a.data, b.data), a.dims + b.dims)


def tensor_all(items: Sequence):
    out = items[0]
    for item in items[1:]:
        out = tensor(out, item)
    return out


def partial_trace(rho: Operator, keep: Iterable[int]) -> DensityOperator:
    """Reduce ``rho`` to the subsystems listed in ``keep`` (order preserved)."""
    n = len(rho.dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"subsystem index out of range for dims {rho.dims}")
    drop = [k for k in range(n) if k not in keep]
    t = rho.data.reshape(rho.dims + rho.dims)
    # trace highest axes first so the remaining axis numbers stay valid
    for k in reversed(drop):
        m = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + m)
    kept_dims = tuple(rho.dims[k] for k in keep)
    d = int(np.prod(kept_dims))
    return DensityOperator(t.reshape(d, d), kept_dims)


def expectation(rho: Operator, obs: Operator) -> complex:
    """``Tr(rho O)``."""
    _check_same_dims(rho.dims, obs.dims)
    # Tr(AB) = sum_ij A_ij B_ji without forming the product
    return complex(np.einsum("ij,ji->", rho.data, obs.data))


# --- scalar measures -------------------------------------------------------

def purity(rho: Operator) -> float:
    return float(np.real(np.einsum("ij,ji->", rho.data, rho.data)))


def trace_distance(rho: Operator, sigma: Operator) -> float:
    _check_same_dims(rho.dims, sigma.dims)
    diff = rho.data - sigma.data
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    # eigenvalues at rounding level are zeros; their square roots would not be
    w = np.where(w > 1e-14 * max(w[-1], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: Operator, sigma: Operator) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Evaluated as the squared trace norm of ``sqrt(rho) sqrt(sigma)``; singular
    values carry rounding linearly, where eigenvalues of the sandwiched
    product would pass it through a square root.
    """
    _check_same_dims(rho.dims, sigma.dims)
    sv = np.linalg.svd(_psd_sqrt(rho.data) @ _psd_sqrt(sigma.data), compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(1.0, max(0.0, f))


def l1_coherence(rho: Operator) -> float:
    mat = np.abs(rho.data)
    return float(mat.sum() - np.trace(mat))


# --- propagators -----------------------------------------------------------

def matrix_exp(h: Operator, t: float = 1.0) -> Operator:
    """Unitary ``exp(-i H t)`` via Hermitian eigendecomposition."""
    if not h.is_hermitian():
        raise NotHermitianError("matrix_exp requires a Hermitian generator")
    w, v = np.linalg.eigh(h.data)
    return Operator((v * np.exp(-1j * w * t)) @ v.conj().T, h.dims)


# --- serialization ---------------------------------------------------------

def _interleave(arr: np.ndarray) -> list[list[float]]:
    flat = np.asarray(arr).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def to_json(obj) -> str:
    """Serialize a state or operator: dims plus row-major ``[re, im]`` pairs."""
    if isinstance(obj, StateVector):
        payload = {"kind": "state", "dims": list(obj.dims), "data": _interleave(obj.amplitudes)}
    elif isinstance(obj, Operator):
        kind = "density" if isinstance(obj, DensityOperator) else "operator"
        payload = {"kind": kind, "dims": list(obj.dims), "data": _interleave(obj.data)}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return json.dumps(payload)


def from_json(text: str):
    payload = json.loads(text)
    pairs = np.asarray(payload["data"], dtype=float).reshape(-1, 2)
    values = pairs[:, 0] + 1j * pairs[:, 1]
    dims = tuple(payload["dims"])
    kind = payload.get("kind", "operator")
    if kind == "state":
        return StateVector(values, dims)
    d = int(np.prod(dims))
    cls = DensityOperator if kind == "density" else Operator
    return cls(values.reshape(d, d), dims)


# --- random sampling (tests, fixtures, CLI) ----------------------------------

def random_state(dims: Sequence[int], rng: np.random.Generator) -> StateVector:
    dims = _as_dims(dims)
    d = int(np.prod(dims))
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return StateVector.normalized(z, dims)


def random_density(dims: Sequence[int], rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Ginibre-ensemble mixed state of the given rank (full rank by default)."""
    dims = _as_dims(dims)
    d = int(np.prod(dims))
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real, dims)


def random_hermitian(dims: Sequence[int], rng: np.random.Generator, scale: float = 1.0) -> Operator:
    dims = _as_dims(dims)
    d = int(np.prod(dims))
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return Operator(scale * 0.5 * (g + g.conj().T), dims)


def random_unitary(d: int, rng: np.random.Generator) -> Operator:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return Operator(q * ph, (d,))
