"""Compare the compiled and NumPy density kernels.

Times the pointwise reference and membrane kernels on random stacks and one
assembled energy + gradient evaluation on a Kirchhoff-Love mesh.

    python benchmarks/bench_kernels.py [--points 100000] [--repeat 5] [--mesh 96]
"""
import argparse
import timeit

import numpy as np

from cosshell import _backend
from cosshell.discretization import DiscreteEnergy, FieldState, Problem, build_grid
from cosshell.energy import EnergyParams, membrane_density, reference_density


def random_states(rng, n):
    F = np.tile(np.eye(3, 2), (n, 1, 1)) + 0.3 * rng.standard_normal((n, 3, 2))
    G = 0.3 * rng.standard_normal((n, 3, 2))
    d = np.cross(F[:, :, 0], F[:, :, 1]) + 0.1 * rng.standard_normal((n, 3))
    # flip the director where J <= 0 and drop the rare degenerate draws
    d *= np.sign(np.einsum("ni,ni->n", d, np.cross(F[:, :, 0], F[:, :, 1])))[:, None]
    keep = np.einsum("ni,ni->n", d, np.cross(F[:, :, 0], F[:, :, 1])) > 1e-6
    return d[keep], F[keep], G[keep]


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def assembled(n):
    m = build_grid(n, n // 2, 2.0, 1.0)
    X, Y = m.nodes.T
    f = np.column_stack([1.1 * X, Y, 0.01 * np.sin(np.pi * X / 2) * np.sin(np.pi * Y)])
    d = np.tile([0.0, 0.0, 1.0], (m.n_nodes, 1))
    pr = Problem(m, ("left", "right"), f, d, EnergyParams(a2=0.01, a3=0.01), mode="kirchhoff_love")
    de = DiscreteEnergy(pr)
    return de, de.x_from_state(FieldState(f, d))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--mesh", type=int, default=96)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    d, F, G = random_states(rng, args.points)
    P = EnergyParams(a2=0.5, a3=0.3)
    de, x = assembled(args.mesh)
    names = _backend.available_backends()
    if "cython" not in names:
        print("compiled backend not built; timing the NumPy kernels only")

    rows = []
    active = _backend.kernels
    try:
        for name in names:
            ref = best_of(lambda: reference_density(P, d, F, G, backend=name), args.repeat)
            mem = best_of(lambda: membrane_density(P, F, backend=name), args.repeat)
            # the assembled path uses the import-time kernels; swap them for the timing
            _backend.kernels = _backend.get_kernels(name)
            asm = best_of(lambda: (de.energy(x), de.gradient(x)), args.repeat)
            rows.append((name, ref, mem, asm))
    finally:
        _backend.kernels = active

    print(f"{'backend':<8} {'reference':>12} {'membrane':>12} {'assembled':>12}   "
          f"({args.points} points, {args.mesh}x{args.mesh // 2} mesh, best of {args.repeat})")
    for name, ref, mem, asm in rows:
        print(f"{name:<8} {ref * 1e3:10.2f}ms {mem * 1e3:10.2f}ms {asm * 1e3:10.2f}ms")
    t = {r[0]: r[1:] for r in rows}
    if len(t) == 2:
        ratios = [p / c for p, c in zip(t["python"], t["cython"])]
        print(f"{'speedup':<8} " + " ".join(f"{r:11.1f}x" for r in ratios))


if __name__ == "__main__":
    main()
