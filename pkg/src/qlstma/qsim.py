"""Dense statevector simulation of small variational circuits.

Conventions used throughout:

* Wire 0 is the least significant bit of the basis index, so basis state
  index ``b`` assigns wire ``q`` the bit ``(b >> q) & 1``.
* States are dense complex128 vectors of length ``2**n_qubits``.
* The feature encoder is an angle embedding built from Ry rotations. Ry is
  used rather than Rz because Rz acting on the ground state only shifts a
  global phase, leaving every Z-basis expectation constant regardless of
  the input.
* Each variational layer applies a general rotation
  ``Rot(phi, theta, omega) = Rz(omega) @ Ry(theta) @ Rz(phi)`` to every
  wire and then entangles neighbours with a linear CNOT chain
  (control q, target q+1). Closing the chain into a ring is available via
  the ``ring`` flag and is off by default.

All public operations are pure: they return new states and never mutate
their arguments. Gradients use the exact parameter-shift rule, so every
quantity here is deterministic (no sampling).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 12


def ry_matrix(theta: float | np.ndarray) -> np.ndarray:
    """Ry rotation matrix; broadcasts over a leading batch of angles."""
    theta = np.asarray(theta, dtype=np.float64)
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    m = np.empty(theta.shape + (2, 2), dtype=np.complex128)
    m[..., 0, 0] = c
    m[..., 0, 1] = -s
    m[..., 1, 0] = s
    m[..., 1, 1] = c
    return m


def rz_matrix(theta: float | np.ndarray) -> np.ndarray:
    """Rz rotation matrix, diag(exp(-i t/2), exp(i t/2))."""
    theta = np.asarray(theta, dtype=np.float64)
    phase = np.exp(-0.5j * theta)
    m = np.zeros(theta.shape + (2, 2), dtype=np.complex128)
    m[..., 0, 0] = phase
    m[..., 1, 1] = np.conj(phase)
    return m


def rot_matrix(
    phi: float | np.ndarray,
    theta: float | np.ndarray,
    omega: float | np.ndarray,
) -> np.ndarray:
    """General rotation Rz(omega) @ Ry(theta) @ Rz(phi)."""
    return rz_matrix(omega) @ ry_matrix(theta) @ rz_matrix(phi)


@dataclass
class StateVector:
    """Dense state of ``n_qubits`` wires, amplitudes indexed wire-0-first."""

    n_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


@dataclass
class VqcParams:
    """Variational angles with shape (n_layers, n_qubits, 3).

    The last axis holds the (phi, theta, omega) angles of one Rot gate.
    """

    angles: np.ndarray

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.ndim != 3 or self.angles.shape[2] != 3:
            raise ValueError(
                f"angles must have shape (n_layers, n_qubits, 3), got {self.angles.shape}"
            )
        if self.angles.shape[0] < 1 or self.angles.shape[1] < 1:
            raise ValueError("need at least one layer and one qubit")

    @property
    def n_layers(self) -> int:
        return int(self.angles.shape[0])

    @property
    def n_qubits(self) -> int:
        return int(self.angles.shape[1])

    @classmethod
    def zeros(cls, n_qubits: int, n_layers: int = 1) -> "VqcParams":
        return cls(np.zeros((n_layers, n_qubits, 3)))

    @classmethod
    def random(cls, n_qubits: int, n_layers: int, rng: np.random.Generator) -> "VqcParams":
        return cls(rng.uniform(0.0, 2.0 * np.pi, size=(n_layers, n_qubits, 3)))


def init_state(n_qubits: int) -> StateVector:
    """Ground state |0...0> on ``n_qubits`` wires (1 <= n <= 12)."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


@lru_cache(maxsize=None)
def _low_indices(n_qubits: int, wire: int) -> np.ndarray:
    # Basis indices whose bit `wire` is clear. Cached and treated read-only.
    idx = np.arange(1 << n_qubits)
    return idx[(idx >> wire) & 1 == 0]


@lru_cache(maxsize=None)
def _cnot_indices(n_qubits: int, control: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << n_qubits)
    src = idx[((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)]
    return src, src | (1 << target)


@lru_cache(maxsize=None)
def _z_signs(n_qubits: int) -> np.ndarray:
    # Row q holds the Pauli-Z eigenvalue of wire q for every basis index.
    idx = np.arange(1 << n_qubits)
    bits = (idx[None, :] >> np.arange(n_qubits)[:, None]) & 1
    return 1.0 - 2.0 * bits


def _apply_1q_inplace(amps: np.ndarray, n_qubits: int, wire: int, gate: np.ndarray) -> None:
    # amps has shape (..., 2**n); gate is (2, 2) or (batch, 2, 2).
    i0 = _low_indices(n_qubits, wire)
    i1 = i0 + (1 << wire)
    a = amps[..., i0]
    b = amps[..., i1]
    g = np.asarray(gate)
    amps[..., i0] = g[..., 0, 0, None] * a + g[..., 0, 1, None] * b
    amps[..., i1] = g[..., 1, 0, None] * a + g[..., 1, 1, None] * b


def _apply_cnot_inplace(amps: np.ndarray, n_qubits: int, control: int, target: int) -> None:
    src, dst = _cnot_indices(n_qubits, control, target)
    tmp = amps[..., src].copy()
    amps[..., src] = amps[..., dst]
    amps[..., dst] = tmp


def _check_wire(n_qubits: int, wire: int) -> None:
    if not 0 <= wire < n_qubits:
        raise IndexError(f"wire {wire} out of range for {n_qubits} qubits")


def apply_1q(state: StateVector, wire: int, gate: np.ndarray) -> StateVector:
    """Apply a single-qubit unitary to one wire, returning a new state."""
    _check_wire(state.n_qubits, wire)
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (2, 2):
        raise ValueError(f"gate must be 2x2, got shape {gate.shape}")
    if np.max(np.abs(gate.conj().T @ gate - np.eye(2))) > 1e-12:
        raise ValueError("gate is not unitary within 1e-12")
    amps = state.amplitudes.copy()
    _apply_1q_inplace(amps, state.n_qubits, wire, gate)
    return StateVector(state.n_qubits, amps)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Apply CNOT with the given control and target wires."""
    _check_wire(state.n_qubits, control)
    _check_wire(state.n_qubits, target)
    if control == target:
        raise ValueError("control and target must differ")
    amps = state.amplitudes.copy()
    _apply_cnot_inplace(amps, state.n_qubits, control, target)
    return StateVector(state.n_qubits, amps)


def angle_embed(state: StateVector, inputs: np.ndarray) -> StateVector:
    """Encode one real input per wire as an Ry rotation angle."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape != (state.n_qubits,):
        raise ValueError(
            f"expected {state.n_qubits} input angles, got shape {inputs.shape}"
        )
    amps = state.amplitudes.copy()
    for q in range(state.n_qubits):
        _apply_1q_inplace(amps, state.n_qubits, q, ry_matrix(inputs[q]))
    return StateVector(state.n_qubits, amps)


def entangling_layer(
    state: StateVector, layer_angles: np.ndarray, ring: bool = False
) -> StateVector:
    """One variational layer: Rot on every wire, then the CNOT chain."""
    n = state.n_qubits
    layer_angles = np.asarray(layer_angles, dtype=np.float64)
    if layer_angles.shape != (n, 3):
        raise ValueError(f"layer angles must have shape ({n}, 3), got {layer_angles.shape}")
    amps = state.amplitudes.copy()
    for q in range(n):
        gate = rot_matrix(layer_angles[q, 0], layer_angles[q, 1], layer_angles[q, 2])
        _apply_1q_inplace(amps, n, q, gate)
    for q in range(n - 1):
        _apply_cnot_inplace(amps, n, q, q + 1)
    if ring and n > 1:
        _apply_cnot_inplace(amps, n, n - 1, 0)
    return StateVector(n, amps)


def pauli_z_expectations(state: StateVector) -> np.ndarray:
    """Per-wire <Z> values, each in [-1, 1]."""
    probs = state.amplitudes.real**2 + state.amplitudes.imag**2
    return probs @ _z_signs(state.n_qubits).T


def vqc_forward(inputs: np.ndarray, params: VqcParams, ring: bool = False) -> np.ndarray:
    """Run the circuit: embed, entangle, measure Z on every wire."""
    n = params.n_qubits
    state = init_state(n)
    state = angle_embed(state, inputs)
    for layer in range(params.n_layers):
        state = entangling_layer(state, params.angles[layer], ring=ring)
    return pauli_z_expectations(state)


def _expectations_batch(
    inputs_b: np.ndarray, angles_b: np.ndarray, ring: bool = False
) -> np.ndarray:
    """Evaluate many circuits at once.

    inputs_b has shape (batch, n_qubits) and angles_b has shape
    (batch, n_layers, n_qubits, 3). Returns (batch, n_qubits) expectations.
    Used by the gradient path so the 2 evaluations per shifted angle share
    one pass through the gate kernels.
    """
    batch, n = inputs_b.shape
    n_layers = angles_b.shape[1]
    amps = np.zeros((batch, 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for q in range(n):
        _apply_1q_inplace(amps, n, q, ry_matrix(inputs_b[:, q]))
    for layer in range(n_layers):
        for q in range(n):
            gate = rot_matrix(
                angles_b[:, layer, q, 0],
                angles_b[:, layer, q, 1],
                angles_b[:, layer, q, 2],
            )
            _apply_1q_inplace(amps, n, q, gate)
        for q in range(n - 1):
            _apply_cnot_inplace(amps, n, q, q + 1)
        if ring and n > 1:
            _apply_cnot_inplace(amps, n, n - 1, 0)
    probs = amps.real**2 + amps.imag**2
    return probs @ _z_signs(n).T


def vqc_gradient(
    inputs: np.ndarray, params: VqcParams, ring: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Exact jacobians of the Z expectations via the parameter-shift rule.

    Every angle (input and variational alike) enters through a single
    rotation gate, so d<Z_k>/d theta = (E_k(theta + pi/2) - E_k(theta - pi/2)) / 2
    holds exactly. Returns

    * jac_inputs with shape (n_qubits, n_qubits), entry [k, j] being
      d<Z_k>/d inputs[j], and
    * jac_params with shape (n_qubits, n_layers, n_qubits, 3) against the
      variational angles.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    n = params.n_qubits
    if inputs.shape != (n,):
        raise ValueError(f"expected {n} input angles, got shape {inputs.shape}")
    n_layers = params.n_layers
    flat = np.concatenate([inputs, params.angles.ravel()])
    n_params = flat.size
    shifted = np.repeat(flat[None, :], 2 * n_params, axis=0)
    cols = np.arange(n_params)
    shifted[2 * cols, cols] += np.pi / 2
    shifted[2 * cols + 1, cols] -= np.pi / 2
    evals = _expectations_batch(
        shifted[:, :n], shifted[:, n:].reshape(2 * n_params, n_layers, n, 3), ring=ring
    )
    jac = (evals[0::2] - evals[1::2]) / 2.0
    jac_inputs = jac[:n].T.copy()
    jac_params = jac[n:].T.reshape(n, n_layers, n, 3).copy()
    return jac_inputs, jac_params
