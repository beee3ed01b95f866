"""Relax a perturbed configuration at one spatial point and compare with the Poincare rate.

    python3 demos/relaxation.py
"""

import math

import numpy as np

from fene_decay_lab.config_space import assemble_operators, build_basis, poincare_constant, \
    poincare_eigenpairs
from fene_decay_lab.integrator import evolve_point
from fene_decay_lab.model import FeneParams


def main():
    basis = build_basis(FeneParams(k=1.0, dim=2), 12, 6)
    ops = assemble_operators(basis)
    lam1, C = poincare_constant(basis, ops)
    print(f"lambda1 = {lam1:.6f}, Poincare constant C = {C:.6f}")

    _, vecs = poincare_eigenpairs(basis, ops)
    v = vecs[:, 0] / math.sqrt(vecs[:, 0] @ ops.M @ vecs[:, 0])
    a = basis.one + 0.05 * v
    rotation = np.array([[0.0, 1.0], [-1.0, 0.0]])
    print("    t   relative_l2     implied rate")
    prev = None
    for step in range(6):
        d = a - basis.one
        rel = float(d @ ops.M @ d)
        rate = "" if prev is None else f"{-math.log(rel / prev) / 0.2:.6f}"
        print(f"  {0.2 * step:.1f}   {rel:.6e}   {rate}")
        prev = rel
        a = evolve_point(basis, ops, rotation, a, 0.2, dt=1e-3)
    print(f"expected rate 2 lambda1 = {2 * lam1:.6f}")


if __name__ == "__main__":
    main()
