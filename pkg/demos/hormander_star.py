"""Lie brackets of a quartic star: full rank generically, degenerate on a symmetric set.

Swapping the two leaves of the star maps solutions to solutions and fixes the
heated centre, so states with equal leaves stay in a 4 dimensional set. The
bracket rank there stays at 4 however deep the brackets go.

    python3 demos/hormander_star.py
"""
import numpy as np

from hcnet import load_builtin
from hcnet.lie import lie_basis

spec = load_builtin("star_quartic")
rng = np.random.default_rng(1)
for depth in (2, 4, 6, 8):
    b = lie_basis(spec, depth)
    generic = [b.rank_at(rng.normal(size=6)) for _ in range(3)]
    c, p1, p2 = rng.normal(size=3)
    print(f"depth {depth}: {len(b.fields):4d} fields, generic rank {generic}, "
          f"rank at equal leaves {b.rank_at([c, c, c, p1, p2, p2])}")
