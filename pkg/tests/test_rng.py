import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from gfex.rng import child_key, derive_key, mix64, philox, splitmix64_stream


def test_mix64_reference_values():
    # SplitMix64 finalizer of the first few outputs from seed 0 (classic
    # published sequence of the full generator mix(seed += gamma))
    state = (0 + 0x9E3779B97F4A7C15) & (2**64 - 1)
    assert mix64(state) == 0xE220A8397B1DCDAF


def test_streams_are_reproducible_and_distinct():
    a1 = philox(42, 1, 0).standard_normal(8)
    a2 = philox(42, 1, 0).standard_normal(8)
    b = philox(42, 1, 1).standard_normal(8)
    c = philox(43, 1, 0).standard_normal(8)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert not np.array_equal(a1, c)


def test_splitmix_stream_deterministic():
    s1 = splitmix64_stream(derive_key(7, 1), 16)
    s2 = splitmix64_stream(derive_key(7, 1), 16)
    assert np.array_equal(s1, s2)
    assert len(set(s1.tolist())) == 16


@given(st.integers(min_value=0, max_value=2**64 - 1),
       st.integers(min_value=0, max_value=2**32))
@settings(max_examples=50, deadline=None)
def test_derive_key_in_range_and_split(seed, word):
    k = derive_key(seed, word)
    assert 0 <= k < 2**64
    assert derive_key(seed, word) == k
    assert child_key(k, 0) != child_key(k, 1)


def test_kernel_splitmix_matches_python():
    # the numba-side sequence must agree with the python reference
    from numba import njit

    from gfex._kernels import _u01

    @njit(cache=False)
    def run(key, n):
        out = np.empty(n)
        s = np.uint64(key)
        for i in range(n):
            s, u = _u01(s)
            out[i] = u
        return out

    key = derive_key(11, 5)
    kernel_vals = run(np.uint64(key), 6)
    raw = splitmix64_stream(key, 6)
    py_vals = [((int(r) >> 11) + 0.5) / 9007199254740992.0 for r in raw]
    assert np.allclose(kernel_vals, py_vals, rtol=0, atol=0)
