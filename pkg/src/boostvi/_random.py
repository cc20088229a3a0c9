import numpy as np


def seed_sequence(seed):
    """Coerce an int, a tuple of ints, or a SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawn() mutates its receiver
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence([int(s) for s in seed])
    return np.random.SeedSequence(int(seed))


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed_sequence(seed)))


def substreams(seed, count):
    """``count`` independent generators derived from ``seed``."""
    return [np.random.Generator(np.random.PCG64(s))
            for s in seed_sequence(seed).spawn(count)]
