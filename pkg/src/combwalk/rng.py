"""Deterministic random number streams and seed derivation.

Everything stochastic in this package flows through the splitmix64
generator: a 64-bit counter advanced by a fixed odd constant, whose output
is a bijective avalanche mix of the counter.  The same arithmetic is
implemented twice -- on Python integers (masked to 64 bits) for the scalar
trajectory engine and on ``numpy.uint64`` arrays for the batched Monte
Carlo kernels -- and unit tests pin the two paths to identical output.

Draw discipline: a walk consumes exactly one 64-bit output per step.  A
uniform index in ``range(degree)`` is taken as ``((z >> 11) * degree) >> 53``,
i.e. the top 53 bits are treated as a uniform integer and scaled without
any floating-point rounding.  This makes replay byte-stable across
platforms and across the scalar/vector implementations.

Seed derivation is stateless: ``derive_seed(master, i)`` mixes
``master + GOLDEN * (i + 1)``.  Because ``GOLDEN`` is odd and the mix is a
bijection, derived seeds are injective in ``i`` for a fixed master.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U53 = np.uint64(53)

#: scale turning the top 53 bits of a draw into a float in [0, 1)
_INV53 = 2.0 ** -53


def mix64(z: int) -> int:
    """Bijective 64-bit finalizer (splitmix64 output function)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` on a ``uint64`` array."""
    z = (z ^ (z >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    return z ^ (z >> _U31)


def derive_seed(master: int, index: int) -> int:
    """Derive the ``index``-th child seed of ``master``.

    Injective in ``index`` for a fixed master, identical across platforms.
    """
    return mix64((master + GOLDEN * (index + 1)) & MASK64)


def derive_seed_array(master: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized :func:`derive_seed` for a ``uint64`` index array."""
    idx = np.asarray(indices, dtype=np.uint64)
    return mix64_array(np.uint64(master & MASK64) + _U_GOLDEN * (idx + np.uint64(1)))


def derive_child_array(seeds: np.ndarray, index: int) -> np.ndarray:
    """Per-element :func:`derive_seed`: child ``index`` of each seed."""
    shift = np.uint64((GOLDEN * (index + 1)) & MASK64)
    return mix64_array(seeds + shift)


def uniform_from_bits(z: int) -> float:
    """Map a 64-bit draw to a float uniform on [0, 1)."""
    return (z >> 11) * _INV53


def index_from_bits(z: int, degree: int) -> int:
    """Map a 64-bit draw to a uniform index in ``range(degree)``."""
    return ((z >> 11) * degree) >> 53


class RngStream:
    """A single splitmix64 draw stream.

    Identical ``(algorithm_id, seed)`` reproduce identical draw sequences
    on every platform.  Streams are cheap; use one per walker and never
    share a stream between concurrent walkers.
    """

    algorithm_id = "splitmix64"

    __slots__ = ("seed", "state")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        return uniform_from_bits(self.next_u64())

    def draw_index(self, degree: int) -> int:
        """One draw, mapped to a uniform index in ``range(degree)``."""
        return index_from_bits(self.next_u64(), degree)

    def spawn(self, index: int) -> "RngStream":
        """Child stream with a seed derived from this stream's seed."""
        return RngStream(derive_seed(self.seed, index))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(seed={self.seed:#x}, state={self.state:#x})"


def advance_states(states: np.ndarray) -> np.ndarray:
    """Advance a ``uint64`` state array in place; return the fresh draws."""
    states += _U_GOLDEN
    return mix64_array(states)


def index_from_bits_array(z: np.ndarray, degree: np.ndarray) -> np.ndarray:
    """Vectorized :func:`index_from_bits`; ``degree`` must be uint64."""
    return ((z >> _U11) * degree) >> _U53
