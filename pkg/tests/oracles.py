"""Independent reference implementations used only by the test suite.

Everything here takes the long way around on purpose: dense Kronecker
operators instead of bit-indexed kernels, numeric differentiation instead
of analytic backward passes, and a dense linear solve instead of the
tridiagonal elimination. Implementations and oracles must never share a
code path.
"""

from __future__ import annotations

import numpy as np

_I2 = np.eye(2, dtype=np.complex128)
_Z = np.diag([1.0, -1.0]).astype(np.complex128)


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _rot(phi: float, theta: float, omega: float) -> np.ndarray:
    return _rz(omega) @ _ry(theta) @ _rz(phi)


def dense_1q_operator(n_qubits: int, wire: int, gate: np.ndarray) -> np.ndarray:
    """Full 2^n x 2^n operator for one single-qubit gate.

    Wire 0 is the least significant bit, so it sits rightmost in the
    Kronecker chain.
    """
    op = np.array([[1.0 + 0.0j]])
    for q in reversed(range(n_qubits)):
        op = np.kron(op, gate if q == wire else _I2)
    return op


def dense_cnot_operator(n_qubits: int, control: int, target: int) -> np.ndarray:
    """CNOT as an explicit permutation matrix built from the truth table."""
    dim = 1 << n_qubits
    m = np.zeros((dim, dim), dtype=np.complex128)
    for b in range(dim):
        j = b ^ (1 << target) if (b >> control) & 1 else b
        m[j, b] = 1.0
    return m


def dense_circuit_state(
    inputs: np.ndarray, angles: np.ndarray, ring: bool = False
) -> np.ndarray:
    """Run the embed + entangle circuit entirely through dense operators."""
    inputs = np.asarray(inputs, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64)
    n = inputs.size
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    for q in range(n):
        psi = dense_1q_operator(n, q, _ry(inputs[q])) @ psi
    for layer in range(angles.shape[0]):
        for q in range(n):
            gate = _rot(angles[layer, q, 0], angles[layer, q, 1], angles[layer, q, 2])
            psi = dense_1q_operator(n, q, gate) @ psi
        for q in range(n - 1):
            psi = dense_cnot_operator(n, q, q + 1) @ psi
        if ring and n > 1:
            psi = dense_cnot_operator(n, n - 1, 0) @ psi
    return psi


def dense_circuit_expectations(
    inputs: np.ndarray, angles: np.ndarray, ring: bool = False
) -> np.ndarray:
    """<Z_q> for every wire, via dense Z operators on the dense state."""
    n = np.asarray(inputs).size
    psi = dense_circuit_state(inputs, angles, ring=ring)
    out = np.empty(n)
    for q in range(n):
        z_op = dense_1q_operator(n, q, _Z)
        out[q] = np.real(np.vdot(psi, z_op @ psi))
    return out


def central_difference_jacobian(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference jacobian of a vector-valued f, shape (dim f, dim x)."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(x.size):
        step = np.zeros_like(x)
        step.flat[j] = h
        cols.append((np.asarray(f(x + step)) - np.asarray(f(x - step))) / (2 * h))
    return np.stack(cols, axis=-1)


def central_difference_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar f over an array argument."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for j in range(x.size):
        step = np.zeros_like(x)
        step.flat[j] = h
        grad.flat[j] = (f(x + step) - f(x - step)) / (2 * h)
    return grad


def fd_grads_over_dict(loss_fn, params: dict[str, np.ndarray], h: float = 1e-4) -> dict:
    """Finite-difference gradients of a scalar loss over named parameter arrays.

    loss_fn receives the whole dict and must not mutate it.
    """
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr, dtype=np.float64)
        for j in range(arr.size):
            bumped = {k: v.copy() for k, v in params.items()}
            bumped[name].flat[j] = arr.flat[j] + h
            up = loss_fn(bumped)
            bumped[name].flat[j] = arr.flat[j] - h
            down = loss_fn(bumped)
            g.flat[j] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def natural_spline_second_derivatives_dense(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Solve the full natural-spline system densely with np.linalg.solve.

    Unknowns are the second derivatives at every knot; the first and last
    rows pin them to zero (the natural boundary condition).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    m = xs.size
    h = np.diff(xs)
    a = np.zeros((m, m))
    rhs = np.zeros(m)
    a[0, 0] = 1.0
    a[m - 1, m - 1] = 1.0
    for i in range(1, m - 1):
        a[i, i - 1] = h[i - 1] / 6.0
        a[i, i] = (h[i - 1] + h[i]) / 3.0
        a[i, i + 1] = h[i] / 6.0
        rhs[i] = (ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]
    return np.linalg.solve(a, rhs)


def natural_spline_eval_dense(
    xs: np.ndarray, ys: np.ndarray, query: np.ndarray
) -> np.ndarray:
    """Evaluate the natural spline from the densely solved coefficients."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    m2 = natural_spline_second_derivatives_dense(xs, ys)
    query = np.atleast_1d(np.asarray(query, dtype=np.float64))
    out = np.empty_like(query)
    for k, x in enumerate(query):
        i = int(np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2))
        h = xs[i + 1] - xs[i]
        t0 = xs[i + 1] - x
        t1 = x - xs[i]
        out[k] = (
            m2[i] * t0**3 / (6 * h)
            + m2[i + 1] * t1**3 / (6 * h)
            + (ys[i] / h - m2[i] * h / 6) * t0
            + (ys[i + 1] / h - m2[i + 1] * h / 6) * t1
        )
    return out


def random_unitary_2x2(rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random 2x2 unitary from the QR decomposition."""
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))
