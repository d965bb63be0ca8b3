"""Shared lattice fixtures for the test suite.

``chiral_fixtures`` lists dark-mode-free chiral systems (lattice + drain)
whose steady states are pure and given by the closed form;
``certification_fixtures`` adds chiral systems that do carry dark modes,
usable for symmetry certification but not for unique steady states.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from chiraldrain import (
    Lattice,
    build_bipartite_random,
    build_chain,
    build_hofstadter,
)

INVERSION_HOPPINGS = [0.9, 1.3, -1.3, -0.9]
INVERSION_POTENTIALS = [0.4, -0.7, 0.0, 0.7, -0.4]


def random_chain(n: int) -> Lattice:
    rng = np.random.default_rng(n)
    return build_chain(n, rng.uniform(0.5, 1.5, n - 1))


def inversion_chain() -> Lattice:
    """5-site chain whose inversion about the center flips H to -conj(H)."""
    return build_chain(5, INVERSION_HOPPINGS, INVERSION_POTENTIALS)


@lru_cache(maxsize=1)
def chiral_fixtures() -> tuple[tuple[str, Lattice, int], ...]:
    out = []
    for n in range(3, 13):
        out.append((f"chain-uniform-{n}", build_chain(n), 0))
    for n in range(4, 13):
        out.append((f"chain-random-{n}", random_chain(n), 0))
    out.append(
        ("bipartite-random-6", build_bipartite_random([0, 1, 0, 1, 1, 0], seed=3), 0)
    )
    out.append(("inversion-5", inversion_chain(), 2))
    hof = build_hofstadter(4, 1.0, np.pi / 2)
    for coord in [(0, 2), (2, 0), (2, 2), (2, 4)]:
        out.append((f"hofstadter-pi2-{coord}", hof, hof.site_index(coord)))
    return tuple(out)


@lru_cache(maxsize=1)
def certification_fixtures() -> tuple[tuple[str, Lattice, int], ...]:
    out = list(chiral_fixtures())
    hof = build_hofstadter(4, 1.0, 2 * np.pi / 5)
    for coord in [(2, 2), (1, 2)]:
        out.append((f"hofstadter-2pi5-{coord}", hof, hof.site_index(coord)))
    return tuple(out)
