import numpy as np
import pytest

from oracles import dense_circuit_z
from qbilevel import kernels
from qbilevel import quantum_sim as qs


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.implementations()


@pytest.mark.parametrize("n,L", [(1, 0), (2, 1), (3, 2), (4, 3)])
def test_circuit_matches_dense(kernel_impl, n, L):
    rng = np.random.default_rng(n * 10 + L)
    enc = rng.uniform(0, np.pi, size=(3, n))
    ry = rng.uniform(-np.pi, np.pi, size=(3, L, n))
    rz = rng.uniform(-np.pi, np.pi, size=(3, L, n))
    got = kernels.circuit_z(enc, ry, rz, impl=kernel_impl)
    for b in range(3):
        np.testing.assert_allclose(got[b], dense_circuit_z(enc[b], ry[b], rz[b]), atol=1e-12)


def test_circuit_matches_gate_by_gate(kernel_impl):
    rng = np.random.default_rng(7)
    n, L = 6, 2
    enc = rng.uniform(0, np.pi, size=(1, n))
    ry = rng.uniform(-np.pi, np.pi, size=(1, L, n))
    rz = rng.uniform(-np.pi, np.pi, size=(1, L, n))
    s = qs.zero_state(n)
    for q in range(n):
        s = qs.apply_rotation(s, "x", q, enc[0, q])
    for layer in range(L):
        for q in range(n):
            s = qs.apply_rotation(s, "y", q, ry[0, layer, q])
            s = qs.apply_rotation(s, "z", q, rz[0, layer, q])
        s = qs.apply_entangler(s)
    np.testing.assert_allclose(kernels.circuit_z(enc, ry, rz, impl=kernel_impl)[0], qs.z_expectations(s), atol=1e-12)


def test_implementations_agree():
    impls = kernels.implementations()
    if len(impls) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(11)
    enc = rng.uniform(0, np.pi, size=(50, 6))
    ry = rng.uniform(-np.pi, np.pi, size=(50, 2, 6))
    rz = rng.uniform(-np.pi, np.pi, size=(50, 2, 6))
    a = kernels.circuit_z(enc, ry, rz, impl=impls["python"])
    b = kernels.circuit_z(enc, ry, rz, impl=impls["cython"])
    np.testing.assert_allclose(a, b, atol=1e-13)
    s = rng.normal(size=64) + 1j * rng.normal(size=64)
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    outs = []
    for impl in (impls["python"], impls["cython"]):
        v = s.copy()
        impl.apply_1q(v, 3, m[0, 0], m[0, 1], m[1, 0], m[1, 1])
        impl.apply_cnot(v, 4, 1)
        outs.append(v)
    np.testing.assert_allclose(outs[0], outs[1], atol=1e-13)


def test_shape_errors(kernel_impl):
    with pytest.raises(ValueError):
        kernels.circuit_z(np.zeros((2, 3)), np.zeros((1, 1, 3)), np.zeros((1, 1, 3)), impl=kernel_impl)
    with pytest.raises(ValueError):
        kernels.circuit_z(np.zeros((1, 3)), np.zeros((1, 1, 2)), np.zeros((1, 1, 3)), impl=kernel_impl)
