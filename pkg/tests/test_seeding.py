import numpy as np
from hypothesis import given, strategies as st

from noniid.seeding import hash64, rng_for, splitmix64


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    golden = 0x9E3779B97F4A7C15
    outs = [splitmix64((k * golden) % 2 ** 64) for k in range(3)]
    assert outs[0] == 0xE220A8397B1DCDAF
    assert outs[1] == 0x6E789E6AA1B965F4
    assert outs[2] == 0x06C45D188009454F


@given(st.integers(0, 2 ** 63), st.integers(0, 10 ** 6))
def test_hash64_deterministic_and_in_range(master, index):
    h = hash64(master, index)
    assert h == hash64(master, index)
    assert 0 <= h < 2 ** 64


def test_rng_for_streams_differ_and_repeat():
    a = rng_for(7, 0).random(4)
    assert np.array_equal(a, rng_for(7, 0).random(4))
    assert not np.array_equal(a, rng_for(7, 1).random(4))
