"""Exclusion-process simulator with moving-wall constraints.

The package provides reproducible per-site Poisson clocks (`clocks`),
an exact event-driven single-species engine (`dynamics`), permutation-valued
multi-species dynamics (`multispecies`), Monte Carlo and pathwise identity
verifiers (`identities`), closed-form asymptotic formulas and rescalers
(`asymptotics`), small-system master-equation oracles (`oracles`) and the
statistical helpers used by the verification runs (`stats`).
"""

from . import asymptotics, clocks, dynamics, identities, multispecies, oracles, stats, walls

__all__ = [
    "asymptotics",
    "clocks",
    "dynamics",
    "identities",
    "multispecies",
    "oracles",
    "stats",
    "walls",
]

__version__ = "0.1.0"
