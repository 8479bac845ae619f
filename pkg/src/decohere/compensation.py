"""Decoherence compensation: decoherence-free subspaces and coherent error correction.

Error-correcting circuits are simulated on state vectors by applying
(multi-)controlled single-qubit gates to the reshaped amplitude tensor, so
the 17-qubit Shor pipeline never materializes a 2**17 square matrix.  No
projective measurement happens anywhere: syndromes are copied onto fresh
ancillas and the correction is a unitary controlled on their basis states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evolution import LindbladModel, evolve_lindblad
from .hilbert import (
    HADAMARD,
    PAULIS,
    SIGMA_X,
    SIGMA_Z,
    DimensionError,
    NotHermitianError,
    Operator,
    StateVector,
    partial_trace,
    trace_distance,
)

DEGENERACY_TOL = 1e-8


# --- decoherence-free subspaces --------------------------------------------

@dataclass(frozen=True)
class InteractionSet:
    ops: Sequence[Operator]

    def __post_init__(self):
        ops = tuple(self.ops)
        if not ops:
            raise ValueError("interaction set is empty")
        for op in ops:
            if not op.is_hermitian():
                raise NotHermitianError("interaction operators must be Hermitian")
            if op.dims != ops[0].dims:
                raise DimensionError("interaction operators must share dims")
        object.__setattr__(self, "ops", ops)

    @property
    def dims(self):
        return self.ops[0].dims


@dataclass(frozen=True)
class DFSBasis:
    vectors: tuple[StateVector, ...]
    labels: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        """Basis vectors as columns."""
        return np.column_stack([v.amplitudes for v in self.vectors])

    def equal_superposition(self) -> StateVector:
        return StateVector.normalized(self.matrix().sum(axis=1), self.vectors[0].dims)


def _cluster(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group sorted eigenvalue indices wherever consecutive gaps exceed ``tol``."""
    order = np.argsort(values)
    groups, current = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if values[b] - values[a] > tol:
            groups.append(np.array(current))
            current = []
        current.append(b)
    groups.append(np.array(current))
    return groups


def _scalar_subspaces(op: np.ndarray, basis: np.ndarray, tol: float):
    """Subspaces of span(basis) on which ``op`` acts as a scalar.

    An eigenvector of ``op`` inside the span is an eigenvector of the
    compression ``B^dag op B`` with the same eigenvalue, so candidates come
    from the compression; each is confirmed by a null-space solve of
    ``(op - lam) B c = 0``.
    """
    comp = basis.conj().T @ op @ basis
    w = np.linalg.eigvalsh(0.5 * (comp + comp.conj().T))
    out = []
    for group in _cluster(w, tol):
        lam = float(np.mean(w[group]))
        m = (op - lam * np.eye(op.shape[0])) @ basis
        _, s, vh = np.linalg.svd(m)
        s_full = np.zeros(basis.shape[1])
        s_full[: s.size] = s
        null = vh.conj().T[:, s_full <= max(tol, 1e-12) * max(1.0, np.abs(op).max())]
        if null.shape[1]:
            q, _ = np.linalg.qr(basis @ null)
            out.append((lam, _fix_phases(q)))
    return out


def _fix_phases(q: np.ndarray) -> np.ndarray:
    """Make each column's largest-modulus entry real and positive."""
    q = q.copy()
    for k in range(q.shape[1]):
        i = np.argmax(np.abs(q[:, k]) > np.abs(q[:, k]).max() - 1e-12)
        q[:, k] *= np.abs(q[i, k]) / q[i, k]
    return q


def find_dfs(interactions: InteractionSet, degeneracy_tol: float = DEGENERACY_TOL) -> list[DFSBasis]:
    """Maximal common eigenspaces of every interaction operator."""
    d = interactions.ops[0].dim
    pending = [((), np.eye(d, dtype=complex))]
    for op in interactions.ops:
        nxt = []
        for labels, basis in pending:
            for lam, sub in _scalar_subspaces(op.data, basis, degeneracy_tol):
                nxt.append((labels + (lam,), sub))
        pending = nxt
    dims = interactions.dims
    out = []
    for labels, basis in pending:
        vecs = tuple(StateVector.normalized(basis[:, k], dims) for k in range(basis.shape[1]))
        out.append(DFSBasis(vecs, labels))
    out.sort(key=lambda b: (-b.dim, b.labels))
    return out


def verify_dfs(basis: DFSBasis, interactions: InteractionSet, rates, horizon: float,
               n_times: int = 51) -> float:
    """Max trace distance from the start over a noise-only Lindblad evolution.

    Jump operators are the interaction operators themselves with the given
    rates; the probe state is the equal superposition of the basis vectors.
    """
    rates = np.broadcast_to(np.asarray(rates, float), (len(interactions.ops),))
    dims = interactions.dims
    if basis.vectors[0].dims != dims:
        raise DimensionError(f"basis dims {basis.vectors[0].dims} != interaction dims {dims}")
    d = interactions.ops[0].dim
    model = LindbladModel(Operator(np.zeros((d, d)), dims), list(zip(interactions.ops, rates)))
    rho0 = basis.equal_superposition().density()
    traj = evolve_lindblad(model, rho0, np.linspace(0.0, horizon, n_times))
    return max(trace_distance(rho0, r) for r in traj.states)


def collective_dephasing(n_qubits: int) -> InteractionSet:
    """``sum_k sigma_z^(k)``: every qubit sees the same phase noise."""
    dims = (2,) * n_qubits
    total = np.zeros((2 ** n_qubits,) * 2, dtype=complex)
    for k in range(n_qubits):
        total += _embed_single(SIGMA_Z, k, n_qubits)
    return InteractionSet([Operator(total, dims)])


def _embed_single(op: np.ndarray, site: int, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for k in range(n):
        out = np.kron(out, op if k == site else np.eye(2))
    return out


# --- gate-level state-vector simulation ------------------------------------

@dataclass(frozen=True)
class Gate:
    """Single-qubit ``matrix`` on ``target``, applied where each control qubit
    holds its required basis value."""

    matrix: np.ndarray
    target: int
    controls: tuple[tuple[int, int], ...] = ()


def cnot(control: int, target: int) -> Gate:
    return Gate(SIGMA_X, target, ((control, 1),))


def hadamard(target: int) -> Gate:
    return Gate(HADAMARD, target)


def apply_gate(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    idx: list = [slice(None)] * n
    for q, val in gate.controls:
        idx[q] = val
    sub = t[tuple(idx)]
    # target axis position inside the sliced view
    tpos = gate.target - sum(1 for q, _ in gate.controls if q < gate.target)
    new = np.moveaxis(np.tensordot(gate.matrix, sub, axes=([1], [tpos])), 0, tpos)
    out = t.copy()
    out[tuple(idx)] = new
    return out.reshape(-1)


def apply_circuit(psi: np.ndarray, gates: Sequence[Gate], n: int) -> np.ndarray:
    for g in gates:
        psi = apply_gate(psi, g, n)
    return psi


def circuit_unitary(gates: Sequence[Gate], n: int) -> np.ndarray:
    d = 2 ** n
    cols = [apply_circuit(np.eye(d, dtype=complex)[:, k], gates, n) for k in range(d)]
    return np.column_stack(cols)


# --- codes -----------------------------------------------------------------

@dataclass(frozen=True)
class StabilizerCode:
    name: str
    n_physical: int
    k_logical: int
    encoder_gates: tuple[Gate, ...]
    correctable: str

    @property
    def encoder(self) -> Operator:
        """Dense encoding unitary on ``logical (x) |0...0>``."""
        n = self.n_physical
        return Operator(circuit_unitary(self.encoder_gates, n), (2,) * n)


@dataclass(frozen=True)
class SyndromeCircuit:
    n_ancilla: int
    extraction: tuple[Gate, ...]
    correction: tuple[Gate, ...]
    n_code: int

    @property
    def n_total(self) -> int:
        return self.n_code + self.n_ancilla

    def extraction_unitary(self) -> Operator:
        n = self.n_total
        return Operator(circuit_unitary(self.extraction, n), (2,) * n)

    def correction_unitary(self) -> Operator:
        n = self.n_total
        return Operator(circuit_unitary(self.correction, n), (2,) * n)


def _repetition_encoder(q0: int, q1: int, q2: int) -> list[Gate]:
    return [cnot(q0, q1), cnot(q0, q2)]


def bit_flip_code() -> StabilizerCode:
    return StabilizerCode("bitflip", 3, 1, tuple(_repetition_encoder(0, 1, 2)), "single-qubit X")


def phase_flip_code() -> StabilizerCode:
    gates = _repetition_encoder(0, 1, 2) + [hadamard(q) for q in range(3)]
    return StabilizerCode("phaseflip", 3, 1, tuple(gates), "single-qubit Z")


def shor_code() -> StabilizerCode:
    gates = [cnot(0, 3), cnot(0, 6)] + [hadamard(q) for q in (0, 3, 6)]
    for b in (0, 3, 6):
        gates += _repetition_encoder(b, b + 1, b + 2)
    return StabilizerCode("shor", 9, 1, tuple(gates), "arbitrary single-qubit")


# parity pattern (a0, a1) of the pairs (q0,q1), (q1,q2) -> flipped qubit
_REPETITION_TABLE = {(1, 0): 0, (1, 1): 1, (0, 1): 2}


def _repetition_syndrome(block: Sequence[int], anc: Sequence[int], fix: np.ndarray,
                         basis_change: bool = False):
    q0, q1, q2 = block
    a0, a1 = anc
    ext = [cnot(q0, a0), cnot(q1, a0), cnot(q1, a1), cnot(q2, a1)]
    if basis_change:
        hs = [hadamard(q) for q in block]
        ext = hs + ext + hs
    corr = [Gate(fix, block[k], ((a0, s0), (a1, s1))) for (s0, s1), k in _REPETITION_TABLE.items()]
    return ext, corr


def bit_flip_syndrome() -> SyndromeCircuit:
    ext, corr = _repetition_syndrome((0, 1, 2), (3, 4), SIGMA_X)
    return SyndromeCircuit(2, tuple(ext), tuple(corr), 3)


def phase_flip_syndrome() -> SyndromeCircuit:
    ext, corr = _repetition_syndrome((0, 1, 2), (3, 4), SIGMA_Z, basis_change=True)
    return SyndromeCircuit(2, tuple(ext), tuple(corr), 3)


def shor_syndrome() -> SyndromeCircuit:
    """Bit-flip syndromes per block (ancillas 9-14), then block-sign syndromes (15-16).

    Each block's sign is the X-parity of its three qubits; an ancilla
    prepared by a Hadamard controls X on all six qubits of two blocks and is
    rotated back, which copies the parity of the block pair.
    """
    ext, corr = [], []
    for b, anc in zip((0, 3, 6), ((9, 10), (11, 12), (13, 14))):
        e, c = _repetition_syndrome((b, b + 1, b + 2), anc, SIGMA_X)
        ext += e
        corr += c
    # bit-flip correction must precede the block-sign extraction
    stage1 = ext + corr
    ext2 = []
    for anc, blocks in ((15, (0, 3)), (16, (3, 6))):
        ext2.append(hadamard(anc))
        for b in blocks:
            ext2 += [Gate(SIGMA_X, b + k, ((anc, 1),)) for k in range(3)]
        ext2.append(hadamard(anc))
    corr2 = [Gate(SIGMA_Z, b, ((15, s0), (16, s1)))
             for (s0, s1), b in (((1, 0), 0), ((1, 1), 3), ((0, 1), 6))]
    return SyndromeCircuit(8, tuple(stage1 + ext2), tuple(corr2), 9)


CODES = {
    "bitflip": (bit_flip_code, bit_flip_syndrome),
    "phaseflip": (phase_flip_code, phase_flip_syndrome),
    "shor": (shor_code, shor_syndrome),
}


def encode_redundant(logical: StateVector, code: StabilizerCode) -> StateVector:
    """``encoder (logical (x) |0...0>)``: a unitary spread, never a copy."""
    if logical.dim != 2 ** code.k_logical:
        raise DimensionError(f"logical state must have dimension {2 ** code.k_logical}")
    n = code.n_physical
    psi = np.zeros(2 ** n, dtype=complex)
    psi[:: 2 ** (n - code.k_logical)] = logical.amplitudes
    out = apply_circuit(psi, code.encoder_gates, n)
    return StateVector(out, (2,) * n)


def discretize_error(e) -> np.ndarray:
    """Coefficients ``(c_I, c_X, c_Y, c_Z)`` with ``c_P = Tr(P^dag e) / 2``."""
    e = np.asarray(getattr(e, "data", e), dtype=complex)
    if e.shape != (2, 2):
        raise DimensionError("discretize_error expects a 2x2 operator")
    return np.array([np.trace(PAULIS[p].conj().T @ e) / 2 for p in "IXYZ"])


def apply_local_error(state: StateVector, error, qubit: int) -> StateVector:
    """Apply a (possibly non-unitary) single-qubit operator and renormalize."""
    n = len(state.dims)
    mat = np.asarray(getattr(error, "data", error), dtype=complex)
    out = apply_gate(state.amplitudes, Gate(mat, qubit), n)
    return StateVector.normalized(out, state.dims)


@dataclass(frozen=True)
class CorrectionResult:
    joint: StateVector             # code (x) ancilla after correction
    code_state: np.ndarray         # reduced density matrix of the code qubits
    fidelity: float | None = None  # <codeword| rho_code |codeword>, when a reference is given


def correct_without_measurement(noisy: StateVector, code: StabilizerCode, circuit: SyndromeCircuit,
                                reference: StateVector | None = None) -> CorrectionResult:
    """Append fresh ancillas, run extraction then controlled correction."""
    if noisy.dims != (2,) * code.n_physical:
        raise DimensionError(f"noisy state must live on {code.n_physical} code qubits")
    n = circuit.n_total
    psi = np.kron(noisy.amplitudes, np.eye(2 ** circuit.n_ancilla)[0])
    psi = apply_circuit(psi, circuit.extraction, n)
    psi = apply_circuit(psi, circuit.correction, n)
    joint = StateVector(psi, (2,) * n)
    # ancillas are reset by tracing them out
    m = psi.reshape(2 ** code.n_physical, 2 ** circuit.n_ancilla)
    rho_code = m @ m.conj().T
    fid = None
    if reference is not None:
        r = reference.amplitudes
        fid = float(np.real(r.conj() @ rho_code @ r))
    return CorrectionResult(joint, rho_code, fid)


def recovery_fidelity(logical: StateVector, code_name: str, error, qubit: int) -> float:
    code_fn, circ_fn = CODES[code_name]
    code, circ = code_fn(), circ_fn()
    clean = encode_redundant(logical, code)
    noisy = apply_local_error(clean, error, qubit)
    return correct_without_measurement(noisy, code, circ, clean).fidelity


def rotation(axis: str, theta: float) -> np.ndarray:
    """``exp(-i theta P / 2)`` for a Pauli axis ``P``."""
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * PAULIS[axis.upper()]


def fidelity_sweep(code_name: str, axis: str, thetas_deg, qubit: int = 0,
                   logical: StateVector | None = None) -> np.ndarray:
    if logical is None:
        logical = StateVector.normalized([np.cos(0.3), np.exp(0.7j) * np.sin(0.3)])
    return np.array([recovery_fidelity(logical, code_name, rotation(axis, np.deg2rad(th)), qubit)
                     for th in thetas_deg])
