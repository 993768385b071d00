"""Pure numpy versions of the statevector kernels.

Same signatures and in-place semantics as the compiled ``_kernels`` module.
"""
from functools import lru_cache

import numpy as np


def apply_1q(state, qubit, m00, m01, m10, m11):
    """Apply a 2x2 matrix to ``qubit`` in place."""
    view = state.reshape(-1, 2, 1 << qubit)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = m00 * a0 + m01 * a1
    view[:, 1, :] = m10 * a0 + m11 * a1


def apply_cnot(state, control, target):
    """Apply CNOT(control -> target) in place."""
    n = state.shape[0].bit_length() - 1
    state[:] = state[_cnot_perm(n, control, target)]


@lru_cache(maxsize=None)
def _cnot_perm(n, control, target):
    idx = np.arange(1 << n)
    flip = ((idx >> control) & 1).astype(bool)
    return np.where(flip, idx ^ (1 << target), idx)


@lru_cache(maxsize=None)
def _ladder_perm(n):
    # new[k] = old[perm[k]]; composing CNOT(0,1), ..., CNOT(n-2,n-1) in order.
    perm = np.arange(1 << n)
    for c in range(n - 1):
        perm = perm[_cnot_perm(n, c, c + 1)]
    return perm


@lru_cache(maxsize=None)
def _z_signs(n):
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    return 1.0 - 2.0 * bits


def circuit_z(enc, ry, rz):
    """Per-qubit <Z> after Rx encoding and ``L`` Ry/Rz + CNOT-ladder layers.

    ``enc`` is (B, n); ``ry`` and ``rz`` are (B, L, n). Returns (B, n).
    """
    enc = np.asarray(enc, dtype=np.float64)
    ry = np.asarray(ry, dtype=np.float64)
    rz = np.asarray(rz, dtype=np.float64)
    batch, n = enc.shape
    n_layers = ry.shape[1]
    if ry.shape[0] != batch or rz.shape[0] != batch:
        raise ValueError("batch sizes differ")
    if ry.shape[2] != n or rz.shape[2] != n or rz.shape[1] != n_layers:
        raise ValueError("angle array shapes differ")
    dim = 1 << n

    # Rx product state built qubit by qubit, qubit 0 fastest-varying.
    c = np.cos(0.5 * enc)
    s = -1j * np.sin(0.5 * enc)
    state = np.ones((batch, 1), dtype=np.complex128)
    for i in range(n):
        state = np.concatenate([state * c[:, i : i + 1], state * s[:, i : i + 1]], axis=1)

    perm = _ladder_perm(n)
    for layer in range(n_layers):
        for i in range(n):
            cy = np.cos(0.5 * ry[:, layer, i])[:, None, None]
            sy = np.sin(0.5 * ry[:, layer, i])[:, None, None]
            pm = np.exp(-0.5j * rz[:, layer, i])[:, None, None]
            view = state.reshape(batch, dim >> (i + 1), 2, 1 << i)
            a0 = view[:, :, 0, :].copy()
            a1 = view[:, :, 1, :].copy()
            view[:, :, 0, :] = pm * (cy * a0 - sy * a1)
            view[:, :, 1, :] = np.conj(pm) * (sy * a0 + cy * a1)
        state = state[:, perm]

    probs = state.real**2 + state.imag**2
    return probs @ _z_signs(n)
