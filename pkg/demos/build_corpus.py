"""Regenerate the network files shipped in ``hcnet/networks``.

Hand-built examples come first; seeded random harmonic networks fill the
corpus up to 20 harmonic entries. Run from the repository root:

    python3 demos/build_corpus.py
"""
from pathlib import Path

import numpy as np

from hcnet.network import NetworkSpec, Polynomial, chain, dumps_network, random_network

OUT = Path(__file__).resolve().parents[1] / "src" / "hcnet" / "networks"
SEED = 2026
HARMONIC_TARGET = 20

QUARTIC = Polynomial((0, 0, 0, 0, 1))
SQUARE = Polynomial((0, 0, 1))


def named():
    # vertices are 0-based here; the files are 1-based
    yield chain(1, [0], [0], name="single")
    yield chain(3, [0], [0], name="chain3")
    yield chain(3, [0, 2], [0, 2], temperature={0: 1.0, 2: 2.0}, name="chain3_ends")
    yield chain(4, range(4), range(4), temperature=0.7, name="chain4_gibbs")
    yield chain(5, [2], [2], name="chain5_middle")
    yield NetworkSpec(4, [(0, 1), (1, 2), (2, 3), (0, 3)], {0, 2}, {0, 2}, {0: 1.0, 2: 1.0}, name="diamond")
    yield NetworkSpec(3, [(0, 1), (0, 2), (1, 2)], {1}, {1}, {1: 1.0}, name="triangle")
    yield NetworkSpec(3, [(0, 1), (0, 2)], {0}, {0}, {0: 1.0}, name="star")
    yield NetworkSpec(5, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 4)], {0}, {0}, {0: 1.0}, name="five_atoms")
    yield NetworkSpec(
        6,
        [(0, 1), (0, 2), (0, 3), (0, 4), (1, 5)],
        set(range(6)),
        {1, 4},
        {1: 1.0, 4: 1.5},
        name="six_particles",
    )
    yield NetworkSpec(
        3, [(0, 1), (0, 2)], {0}, {0}, {0: 1.0}, pinning=SQUARE, interaction=QUARTIC, name="star_quartic"
    )
    yield chain(3, range(3), [0], pinning=SQUARE, interaction=QUARTIC, name="quartic_chain")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for old in OUT.glob("*.json"):
        old.unlink()
    specs = list(named())
    seen = {dumps_network(s.replace(name="")) for s in specs}
    harmonic = sum(s.is_harmonic for s in specs)
    rng = np.random.default_rng(SEED)
    k = 0
    while harmonic < HARMONIC_TARGET:
        s = random_network(rng, n_max=6)
        temps = {v: round(t, 2) for v, t in s.temperatures.items()}
        s = s.replace(temperatures=temps, name="")
        key = dumps_network(s)
        if key in seen:
            continue
        seen.add(key)
        k += 1
        specs.append(s.replace(name=f"random{k:02d}"))
        harmonic += 1
    for s in specs:
        (OUT / f"{s.name}.json").write_text(dumps_network(s) + "\n")
        print(f"wrote {s.name}")


if __name__ == "__main__":
    main()
