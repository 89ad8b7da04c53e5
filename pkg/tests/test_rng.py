import numpy as np
import pytest
from numpy.testing import assert_array_equal

from nbprocess.rng import STREAMS, chain_stream, get_state, named_stream, rng_stream, set_state


def test_same_seed_same_sequence():
    assert_array_equal(rng_stream(42, 3).random(100), rng_stream(42, 3).random(100))


def test_streams_differ():
    a = rng_stream(42, 1).random(1000)
    b = rng_stream(42, 2).random(1000)
    assert not np.array_equal(a, b)
    # crude independence screen on the paired uniforms
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_named_and_chain_streams_disjoint():
    firsts = {named_stream(7, name).integers(2**63) for name in STREAMS}
    firsts |= {chain_stream(7, c).integers(2**63) for c in range(4)}
    assert len(firsts) == len(STREAMS) + 4


def test_state_roundtrip():
    rng = rng_stream(5)
    rng.random(17)
    saved = get_state(rng)
    expected = rng.random(10)
    other = np.random.Generator(np.random.PCG64())
    set_state(other, saved)
    assert_array_equal(other.random(10), expected)


def test_negative_seed():
    with pytest.raises(ValueError):
        rng_stream(-1)
