"""Invariant measures supported on a proper subspace.

When the baths cannot reach every mode, the stationary covariance is singular.
Its rank equals the dimension of the Krylov space generated by the heated
directions, which is smaller than 2N.

    python3 demos/support_deficit.py
"""
import numpy as np

from hcnet import analyze, load_builtin

for name in ("chain3", "five_atoms", "six_particles"):
    spec = load_builtin(name)
    rep = analyze(spec)
    print(f"{name}: 2N = {spec.dim}, damped span {rep.dim_damped}, heated span {rep.dim_boundary}, "
          f"rank Q = {rep.rank_q}")
    if rep.rank_q < spec.dim:
        ev = np.linalg.eigvalsh(rep.Q)
        print(f"  smallest eigenvalues of Q: {ev[:3]}")
