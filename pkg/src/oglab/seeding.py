"""Counter-based seed derivation.

Every random stream in oglab is keyed by a tuple of non-negative integers, e.g.
``(run_seed, EVAL_STREAM, eval_index, episode_index)``. The tuple is fed to
``numpy.random.SeedSequence`` as entropy, so streams with different keys are
statistically independent and no stream depends on how many draws another made.
"""

import numpy as np

TRAIN_STREAM = 0
EVAL_STREAM = 1
DATASET_STREAM = 2
INIT_STREAM = 3
ORACLE_STREAM = 4


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint32)[0])


def derive_rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))
