"""Independent reference implementations used by the tests.

Nothing here imports the package's simulation code: each oracle rebuilds
the quantity from first principles (dense matrices, exhaustive search,
value iteration, finite differences).
"""
import itertools

import numpy as np

I2 = np.eye(2, dtype=complex)


def dense_rx(t):
    return np.cos(t / 2) * I2 - 1j * np.sin(t / 2) * np.array([[0, 1], [1, 0]])


def dense_ry(t):
    return np.cos(t / 2) * I2 - 1j * np.sin(t / 2) * np.array([[0, -1j], [1j, 0]])


def dense_rz(t):
    return np.cos(t / 2) * I2 - 1j * np.sin(t / 2) * np.array([[1, 0], [0, -1]])


DENSE_ROT = {"x": dense_rx, "y": dense_ry, "z": dense_rz}


def embed(n, qubit, m):
    """Full 2^n operator of a one-qubit gate; qubit 0 is the rightmost Kronecker factor."""
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        out = np.kron(out, m if q == qubit else I2)
    return out


def dense_cnot(n, control, target):
    """CNOT from projectors: |0><0|_c (x) I + |1><1|_c (x) X_t."""
    p0 = np.array([[1, 0], [0, 0]], dtype=complex)
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    return embed(n, control, p0) + embed(n, control, p1) @ embed(n, target, x)


def dense_z(n, qubit):
    return embed(n, qubit, np.diag([1.0, -1.0]).astype(complex))


def dense_circuit_z(features, ry_angles, rz_angles):
    """<Z_i> of the Rx-encoded, layered Ry/Rz + CNOT-ladder circuit via dense matrices."""
    n = len(features)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    for q in range(n):
        psi = embed(n, q, dense_rx(features[q])) @ psi
    for ly, lz in zip(ry_angles, rz_angles):
        for q in range(n):
            psi = embed(n, q, dense_rz(lz[q])) @ embed(n, q, dense_ry(ly[q])) @ psi
        for q in range(n - 1):
            psi = dense_cnot(n, q, q + 1) @ psi
    return np.array([np.real(psi.conj() @ dense_z(n, q) @ psi) for q in range(n)])


def central_fd(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up = x.copy()
        dn = x.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g


def weak_orders(k):
    """Every ranking of k items allowing ties, as tuples of ranks 0..r."""
    seen = set()
    for ranks in itertools.product(range(k), repeat=k):
        used = sorted(set(ranks))
        if used == list(range(len(used))):
            seen.add(ranks)
    return sorted(seen)


class BruteClearing:
    """Exhaustive minimum as-bid-cost dispatch for integer quantities.

    For a fixed quantity vector, every integer dispatch vector is enumerated.
    Served energy is maximized (min of demand and supply); among dispatches
    serving that much, total as-bid cost is minimized; remaining ties go to
    the lexicographically largest dispatch when gencos are listed by
    (price, id).
    """

    def __init__(self, quantities):
        self.q = np.asarray(quantities, dtype=np.int64)
        k = len(self.q)
        grids = np.meshgrid(*[np.arange(v + 1) for v in self.q], indexing="ij")
        self.d = np.stack([g.ravel() for g in grids], axis=1) if k else np.zeros((1, 0), np.int64)
        self.sums = self.d.sum(axis=1)
        self.base = 6 ** k

    def solve_all(self, prices):
        """Optimal dispatch for every served total 0..sum(q), keyed by total."""
        prices = np.asarray(prices, dtype=np.int64)
        k = len(prices)
        cost = self.d @ prices
        pos = np.empty(k, dtype=np.int64)
        pos[np.lexsort((np.arange(k), prices))] = np.arange(k)
        score = self.d @ (6 ** (k - 1 - pos))
        key = cost * self.base + (self.base - 1 - score)
        out = {}
        for t in range(int(self.q.sum()) + 1):
            mask = self.sums == t
            idx = np.flatnonzero(mask)[np.argmin(key[mask])]
            out[t] = self.d[idx]
        return out


def toy_mdp():
    """Two states, two actions, deterministic transitions."""
    reward = np.array([[0.0, 0.5], [1.0, 0.0]])
    nxt = np.array([[1, 0], [0, 1]])
    return reward, nxt


def value_iteration(reward, nxt, gamma, iters=2000):
    q = np.zeros_like(reward)
    for _ in range(iters):
        v = q.max(axis=1)
        q = reward + gamma * v[nxt]
    return q
