"""Dark states of the collective lowering operator.

Counts kernel dimensions over the full 2^N space (homogeneous couplings)
and in the two-subensemble product space for several inhomogeneities, then
shows that the two-spin kernel is the rotated singlet.

    python recipes/dark_states.py
"""

import math

import numpy as np

from srlab.chip import TwoEnsembleSplit
from srlab.sse import build_collective_lowering, dark_space, full_space_lowering, rotated_singlet


def main():
    for n in range(1, 9):
        k = dark_space(full_space_lowering(np.ones(n))).shape[1]
        print(f"N={n}: full-space kernel {k:3d}  (binomial {math.comb(n, n // 2)})")
    for n1, n2 in [(1, 1), (2, 2), (3, 3), (4, 2)]:
        dims = [dark_space(build_collective_lowering(TwoEnsembleSplit.from_dg(n1, n2, dg))).shape[1] for dg in (0.0, 0.3, 0.7, 1.0)]
        print(f"(N1,N2)=({n1},{n2}): kernel dimension at dg=0, 0.3, 0.7, 1: {dims}")
    dg = 0.5
    K = dark_space(build_collective_lowering(TwoEnsembleSplit.from_dg(1, 1, dg)))
    fid = np.linalg.norm(K.T @ rotated_singlet(dg)) ** 2
    print(f"two spins, dg={dg}: rotated singlet lies in the kernel with fidelity {fid:.12f}")


if __name__ == "__main__":
    main()
