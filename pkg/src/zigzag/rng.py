"""Counter-based random streams for reproducible, order-independent sampling.

All randomness in a run is derived from a single 64-bit scenario seed through
Philox keys of the form (seed, purpose << 48 | counter).  A draw belonging to
trajectory ``i`` at substep ``j`` is a pure function of (seed, purpose, j, i),
so ensembles can be evaluated in lockstep, in chunks, or one trajectory at a
time and produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

# Purpose tags keep independent uses of the seed from colliding.
PURPOSE_JUMP = 0  # Bernoulli draws for chirality/label flips
PURPOSE_CHANNEL = 1  # channel selection when several flips compete
PURPOSE_POSITION = 2  # equilibrium position sampling
PURPOSE_LABEL = 3  # equilibrium chirality/label sampling

_MASK64 = (1 << 64) - 1


def philox_key(seed: int, purpose: int, counter: int = 0) -> list[int]:
    """Build the 128-bit Philox key for one (seed, purpose, counter) slot."""
    if purpose < 0 or purpose >= (1 << 16):
        raise ValueError(f"purpose tag out of range: {purpose}")
    return [int(seed) & _MASK64, ((purpose << 48) | (counter & ((1 << 48) - 1))) & _MASK64]


def stream(seed: int, purpose: int, counter: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, purpose, counter) slot."""
    return np.random.Generator(np.random.Philox(key=philox_key(seed, purpose, counter)))


def uniforms(seed: int, purpose: int, counter: int, n: int) -> np.ndarray:
    """Draw the n leading uniforms of the (seed, purpose, counter) stream.

    Element ``i`` is the draw owned by trajectory index ``i``; it does not
    depend on n, so growing an ensemble never changes existing trajectories.
    """
    return stream(seed, purpose, counter).random(n)
