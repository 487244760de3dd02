"""Seed derivation.

Every random stream in the package descends from one integer master seed.
The integer seed of a stage is the first 32-bit word of
``SeedSequence(master, spawn_key=(STAGE,))`` with the stage tags below.
Inside the sampler, the cascade started from node ``v`` on pass ``p`` draws
from ``SeedSequence(stage_seed, spawn_key=(p, v))`` and the visiting order of
pass ``p`` from ``SeedSequence(stage_seed, spawn_key=(p,))``. No wall-clock
entropy is ever used.
"""
from __future__ import annotations

import numpy as np

SAMPLER = 0
SOLVER = 1
SVD = 2
EVALUATION = 3

_STAGES = {"sampler": SAMPLER, "solver": SOLVER, "svd": SVD, "evaluation": EVALUATION}


def seed_sequence(master: int, *key: int) -> np.random.SeedSequence:
    if master is None or int(master) < 0:
        raise ValueError("master seed must be a non-negative integer")
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))


def generator(master: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(master, *key)))


def stage_seed(master: int, stage: str | int) -> int:
    """Derive the 32-bit integer seed handed to one pipeline stage."""
    tag = _STAGES[stage] if isinstance(stage, str) else int(stage)
    return int(seed_sequence(master, tag).generate_state(1)[0])


def check_random_state(seed) -> np.random.Generator:
    """Turn ``None``, an int or a Generator into a Generator.

    ``None`` maps to seed 0 so that nothing is ever nondeterministic.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    if isinstance(seed, (int, np.integer)):
        return generator(int(seed))
    raise TypeError(f"cannot build a random generator from {seed!r}")
