"""Exact statevector simulation for small qubit registers.

States are plain complex128 numpy arrays of length ``2**n``. Qubit 0 is the
least-significant bit of the basis index, so for two qubits the amplitude
order is |q1 q0> = |00>, |01>, |10>, |11>.

Every public operation returns a new array; the input state is never
modified.
"""
import numpy as np

from . import kernels

MAX_QUBITS = 12


def n_qubits(state):
    """Number of qubits encoded by a state vector's length."""
    dim = len(state)
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise ValueError(f"state length {dim} is not a power of two >= 2")
    return n


def zero_state(n):
    """|0...0> on ``n`` qubits."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be an integer in [1, {MAX_QUBITS}], got {n!r}")
    state = np.zeros(1 << n, dtype=np.complex128)
    state[0] = 1.0
    return state


def rx(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(theta):
    return np.array(
        [[np.exp(-0.5j * theta), 0.0], [0.0, np.exp(0.5j * theta)]], dtype=np.complex128
    )


_ROTATIONS = {"x": rx, "y": ry, "z": rz}

PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)


def _check_qubit(qubit, n):
    if not 0 <= qubit < n:
        raise IndexError(f"qubit index {qubit} out of range for {n} qubits")


def apply_gate(state, qubit, matrix):
    """Apply an arbitrary 2x2 ``matrix`` to one qubit."""
    n = n_qubits(state)
    _check_qubit(qubit, n)
    m = np.asarray(matrix, dtype=np.complex128)
    out = np.array(state, dtype=np.complex128, copy=True)
    kernels.apply_1q(out, int(qubit), m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    return out


def apply_rotation(state, axis, qubit, angle):
    """Rotate ``qubit`` about ``axis`` ('x', 'y' or 'z') by ``angle`` radians."""
    try:
        gate = _ROTATIONS[axis]
    except KeyError:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}") from None
    return apply_gate(state, qubit, gate(angle))


def apply_cnot(state, control, target):
    n = n_qubits(state)
    _check_qubit(control, n)
    _check_qubit(target, n)
    if control == target:
        raise ValueError("control and target must differ")
    out = np.array(state, dtype=np.complex128, copy=True)
    kernels.apply_cnot(out, int(control), int(target))
    return out


def apply_entangler(state):
    """CNOT ladder: CNOT(0,1), CNOT(1,2), ..., CNOT(n-2, n-1) in that order."""
    n = n_qubits(state)
    if n < 2:
        raise ValueError("the entangler needs at least two qubits")
    out = np.array(state, dtype=np.complex128, copy=True)
    for i in range(n - 1):
        kernels.apply_cnot(out, i, i + 1)
    return out


def z_expectations(state):
    """<sigma_z> of every qubit, computed from amplitude magnitudes."""
    n = n_qubits(state)
    probs = np.abs(np.asarray(state)) ** 2
    bits = (np.arange(len(probs))[:, None] >> np.arange(n)[None, :]) & 1
    return probs @ (1.0 - 2.0 * bits)


def expectation_weighted_z(state, weights):
    """<psi| sum_i w_i Z_i |psi>."""
    weights = np.asarray(weights, dtype=np.float64)
    n = n_qubits(state)
    if weights.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise ValueError("observable weights must be finite")
    return float(z_expectations(state) @ weights)


def norm(state):
    return float(np.sum(np.abs(state) ** 2))
