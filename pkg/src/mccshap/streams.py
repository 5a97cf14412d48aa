"""Counter-based random streams for Monte-Carlo iterations.

Iterations are grouped in fixed-size blocks. Block ``b`` of target ``t``
under seed ``s`` draws from ``SeedSequence([s, *t, b])``, so every
iteration's randomness is a function of (seed, target, iteration index)
alone and any split of blocks across workers reproduces the same numbers.
"""

import numpy as np

BLOCK_SIZE = 4096
_MASK64 = (1 << 64) - 1


def target_tag(indices) -> tuple:
    """Stream key for a feature or coalition; insensitive to member order."""
    idx = sorted(int(i) for i in indices)
    return (len(idx), *idx)


def block_generator(seed: int, tag: tuple, block: int) -> np.random.Generator:
    entropy = [int(seed) & _MASK64, *tag, int(block)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def blocks(n_iterations: int):
    """Yield ``(block_index, start, size)`` covering ``n_iterations``."""
    for b, start in enumerate(range(0, n_iterations, BLOCK_SIZE)):
        yield b, start, min(BLOCK_SIZE, n_iterations - start)


def derive_seed(seed: int, *labels) -> int:
    """Independent 63-bit seed for a named sub-task (e.g. model fitting)."""
    ints = [int(seed) & _MASK64]
    for label in labels:
        ints.extend(label.encode() if isinstance(label, str) else [int(label) & _MASK64])
    return int(np.random.SeedSequence(ints).generate_state(1, dtype=np.uint64)[0] >> 1)
