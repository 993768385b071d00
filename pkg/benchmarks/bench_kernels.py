"""Compare the compiled and numpy kernel implementations.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per workload and the speedup. Requires the
extension to be built (``pip install -e . --no-build-isolation``).
"""
import argparse
import timeit

import numpy as np

from qbilevel import kernels


def workloads(rng):
    n = 6
    state = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    state /= np.linalg.norm(state)
    c, s = np.cos(0.3), np.sin(0.3)

    def single(impl):
        def run():
            psi = state.copy()
            for k in range(1000):
                impl.apply_1q(psi, k % n, c, -s, s, c)
        return run

    def cnot(impl):
        def run():
            psi = state.copy()
            for k in range(1000):
                impl.apply_cnot(psi, k % n, (k + 1) % n)
        return run

    out = {"apply_1q x1000": single, "apply_cnot x1000": cnot}
    for layers in (1, 2, 3):
        # one batched forward for a full parameter-shift sweep at this depth
        batch = 1 + 4 * layers * n
        enc = rng.uniform(0, np.pi, (batch, n))
        ry = rng.uniform(-np.pi, np.pi, (batch, layers, n))
        rz = rng.uniform(-np.pi, np.pi, (batch, layers, n))

        def circuit(impl, enc=enc, ry=ry, rz=rz):
            return lambda: kernels.circuit_z(enc, ry, rz, impl=impl)

        out[f"circuit_z L={layers} batch={batch}"] = circuit
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not available; only the numpy kernels can be timed")
    rng = np.random.default_rng(0)
    names = sorted(impls)
    print(f"{'workload':32s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, make in workloads(rng).items():
        times = {}
        for name in names:
            fn = make(impls[name])
            number = 10
            times[name] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
        row = f"{label:32s}" + "".join(f"{times[n] * 1e3:10.3f}ms" for n in names)
        if len(names) > 1:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
