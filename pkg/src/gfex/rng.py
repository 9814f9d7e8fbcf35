"""Counter-based, splittable random number generation.

Two coordinated generators are used, both keyed by 64-bit words derived
with the SplitMix64 mixing function (Steele, Lea & Flood constants):

* numpy ``Philox`` bit generators for bulk array sampling at the Python
  level.  A Philox key is two 64-bit words derived from the user seed and
  a stream path, so distinct replicas/streams are independent and any
  stream can be regenerated without touching the others.
* raw SplitMix64 sequences inside numba kernels (see ``_kernels``), with
  child-cell keys derived from (parent key, event index).

All constants are version-pinned below; bumping them is a format change.
No global mutable RNG state exists anywhere in the package.
"""

from __future__ import annotations

import numpy as np

RNG_SCHEME_VERSION = 1

# SplitMix64 constants (64-bit golden gamma and the two mixing multipliers).
SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
SM64_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
SM64_MUL2 = np.uint64(0x94D049BB133111EB)

_U64 = np.uint64
_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (pure python, exact u64)."""
    x &= _MASK
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK
    return x ^ (x >> 31)


def derive_key(seed: int, *path: int) -> int:
    """Fold a stream path into one 64-bit key.

    Each path word is absorbed as ``key = mix64(key + gamma * word')`` with
    the word itself pre-mixed, so sibling streams (differing in one word)
    are decorrelated.
    """
    key = mix64(seed & _MASK)
    for w in path:
        key = mix64((key + 0x9E3779B97F4A7C15 * (mix64(w & _MASK) | 1)) & _MASK)
    return key


def splitmix64_stream(key: int, n: int) -> np.ndarray:
    """First ``n`` raw u64 outputs of the SplitMix64 sequence from ``key``."""
    out = np.empty(n, dtype=np.uint64)
    state = key & _MASK
    for i in range(n):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        out[i] = mix64(state)
    return out


def philox(seed: int, *path: int) -> np.random.Generator:
    """A numpy Generator on the Philox stream addressed by ``path``.

    The 128-bit Philox key is ``(derive_key(seed, *path), derive_key(seed,
    *path, 0xA5A5))`` so streams never collide for distinct paths.
    """
    k0 = derive_key(seed, *path)
    k1 = derive_key(seed, *path, 0xA5A5)
    bg = np.random.Philox(key=(k0 << 64) | k1)
    return np.random.Generator(bg)


def child_key(parent_key: int, index: int) -> int:
    """Key for the ``index``-th child stream of a kernel-side cell."""
    return derive_key(parent_key, index + 1)
