# cython: language_level=3
"""Compiled statevector kernels.

Mirrors :mod:`qbilevel._kernels_py` function for function. Qubit 0 is the
least-significant bit of the basis index.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin
from libc.stdlib cimport free, malloc

cnp.import_array()


def apply_1q(double complex[::1] state, int qubit,
             double complex m00, double complex m01,
             double complex m10, double complex m11):
    """Apply a 2x2 matrix to ``qubit`` in place."""
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t stride = 1 << qubit
    cdef Py_ssize_t base, k, i0, i1
    cdef double* d = <double*> &state[0]
    cdef double ar = m00.real, ai = m00.imag, br = m01.real, bi = m01.imag
    cdef double cr = m10.real, ci = m10.imag, er = m11.real, ei = m11.imag
    cdef double r0, q0, r1, q1
    with nogil:
        base = 0
        while base < dim:
            for k in range(stride):
                i0 = 2 * (base + k)
                i1 = i0 + 2 * stride
                r0 = d[i0]
                q0 = d[i0 + 1]
                r1 = d[i1]
                q1 = d[i1 + 1]
                d[i0] = ar * r0 - ai * q0 + br * r1 - bi * q1
                d[i0 + 1] = ar * q0 + ai * r0 + br * q1 + bi * r1
                d[i1] = cr * r0 - ci * q0 + er * r1 - ei * q1
                d[i1 + 1] = cr * q0 + ci * r0 + er * q1 + ei * r1
            base += 2 * stride


def apply_cnot(double complex[::1] state, int control, int target):
    """Apply CNOT(control -> target) in place."""
    cdef Py_ssize_t dim = state.shape[0]
    cdef Py_ssize_t cmask = 1 << control
    cdef Py_ssize_t tmask = 1 << target
    cdef Py_ssize_t k, j
    cdef double complex tmp
    with nogil:
        for k in range(dim):
            if (k & cmask) and not (k & tmask):
                j = k | tmask
                tmp = state[k]
                state[k] = state[j]
                state[j] = tmp


cdef inline void _rot_yz(double* re, double* im, Py_ssize_t dim, Py_ssize_t stride,
                         double ay, double az) noexcept nogil:
    # Ry(ay) then Rz(az), fused: row 0 scaled by e^{-i az/2}, row 1 by e^{+i az/2}.
    cdef double cy = cos(0.5 * ay)
    cdef double sy = sin(0.5 * ay)
    cdef double cz = cos(0.5 * az)
    cdef double sz = sin(0.5 * az)
    cdef Py_ssize_t base = 0
    cdef Py_ssize_t k, i0, i1
    cdef double r0, m0, r1, m1, ur, ui, vr, vi
    while base < dim:
        for k in range(stride):
            i0 = base + k
            i1 = i0 + stride
            r0 = re[i0]
            m0 = im[i0]
            r1 = re[i1]
            m1 = im[i1]
            ur = cy * r0 - sy * r1
            ui = cy * m0 - sy * m1
            vr = sy * r0 + cy * r1
            vi = sy * m0 + cy * m1
            re[i0] = cz * ur + sz * ui
            im[i0] = cz * ui - sz * ur
            re[i1] = cz * vr - sz * vi
            im[i1] = cz * vi + sz * vr
        base += 2 * stride


def circuit_z(const double[:, ::1] enc, const double[:, :, ::1] ry,
              const double[:, :, ::1] rz):
    """Per-qubit <Z> after Rx encoding and ``L`` Ry/Rz + CNOT-ladder layers.

    ``enc`` is (B, n); ``ry`` and ``rz`` are (B, L, n). Returns (B, n).
    """
    cdef Py_ssize_t batch = enc.shape[0]
    cdef Py_ssize_t n = enc.shape[1]
    cdef Py_ssize_t n_layers = ry.shape[1]
    if ry.shape[0] != batch or rz.shape[0] != batch:
        raise ValueError("batch sizes differ")
    if ry.shape[2] != n or rz.shape[2] != n or rz.shape[1] != n_layers:
        raise ValueError("angle array shapes differ")
    if n < 1 or n > 20:
        raise ValueError("qubit count out of range")
    cdef Py_ssize_t dim = 1 << n
    out = np.zeros((batch, n), dtype=np.float64)
    cdef double[:, ::1] z = out
    cdef double* re = <double*> malloc(dim * sizeof(double))
    cdef double* im = <double*> malloc(dim * sizeof(double))
    cdef double* re2 = <double*> malloc(dim * sizeof(double))
    cdef double* im2 = <double*> malloc(dim * sizeof(double))
    cdef Py_ssize_t* perm = <Py_ssize_t*> malloc(dim * sizeof(Py_ssize_t))
    if re == NULL or im == NULL or re2 == NULL or im2 == NULL or perm == NULL:
        free(re)
        free(im)
        free(re2)
        free(im2)
        free(perm)
        raise MemoryError()
    cdef Py_ssize_t b, l, i, k, j, width
    cdef double* swap
    # CNOT ladder as one basis permutation: new[k] = old[perm[k]]
    for k in range(dim):
        j = k
        for i in range(n - 2, -1, -1):
            if (j >> i) & 1:
                j ^= 1 << (i + 1)
        perm[k] = j
    cdef double ar, ai, p, c, s
    try:
        with nogil:
            for b in range(batch):
                # Rx product state, built qubit by qubit: |0> -> c, |1> -> -i s
                re[0] = 1.0
                im[0] = 0.0
                width = 1
                for i in range(n):
                    c = cos(0.5 * enc[b, i])
                    s = sin(0.5 * enc[b, i])
                    for k in range(width):
                        ar = re[k]
                        ai = im[k]
                        re[k] = c * ar
                        im[k] = c * ai
                        re[k + width] = s * ai
                        im[k + width] = -s * ar
                    width *= 2
                for l in range(n_layers):
                    for i in range(n):
                        _rot_yz(re, im, dim, 1 << i, ry[b, l, i], rz[b, l, i])
                    for k in range(dim):
                        re2[k] = re[perm[k]]
                        im2[k] = im[perm[k]]
                    swap = re
                    re = re2
                    re2 = swap
                    swap = im
                    im = im2
                    im2 = swap
                for k in range(dim):
                    p = re[k] * re[k] + im[k] * im[k]
                    for i in range(n):
                        if (k >> i) & 1:
                            z[b, i] -= p
                        else:
                            z[b, i] += p
    finally:
        free(re)
        free(im)
        free(re2)
        free(im2)
        free(perm)
    return out
