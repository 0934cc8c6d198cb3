import numpy as np

REACTOR_STREAM = 0
ANNEALED_STREAM = 1


def substream(master_seed: int, tag: int, *keys: int) -> np.random.Generator:
    """
    Returns a random generator derived from the master seed and a key path.

    The same (master_seed, tag, keys) always yields the same stream, whatever
    process or order it is created in. ``tag`` keeps the reactor realizations
    and the annealed sampling blocks on disjoint streams.

    Args:
        master_seed: Non-negative experiment seed.
        tag: Stream family, REACTOR_STREAM or ANNEALED_STREAM.
        keys: Non-negative integers identifying the task (M, N, index, ...).

    Returns:
        A numpy Generator backed by PCG64.
    """
    entropy = [int(master_seed), int(tag), *(int(key) for key in keys)]
    if any(value < 0 for value in entropy):
        raise ValueError(f"seed and stream keys must be non-negative: {entropy}")
    return np.random.default_rng(np.random.SeedSequence(entropy))
