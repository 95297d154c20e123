import numpy as np
import pytest

from nmfpurify.rng import BLOCK, Streams, blocks, label_id


def test_same_key_same_stream():
    a = Streams(5).generator("batch", 3, 1).random(10)
    b = Streams(5).generator("batch", 3, 1).random(10)
    assert np.array_equal(a, b)


def test_distinct_keys_distinct_streams():
    s = Streams(5)
    draws = {tuple(s.generator(lbl, *c).random(4)) for lbl, c in
             [("batch", (0,)), ("batch", (1,)), ("pairs", (0,)), ("batch", (0, 1))]}
    assert len(draws) == 4
    assert not np.array_equal(Streams(6).generator("batch", 0).random(4),
                              Streams(5).generator("batch", 0).random(4))


def test_child_seeds_are_stable_and_distinct():
    s = Streams(11)
    assert s.child("sweep", 1).seed == Streams(11).child("sweep", 1).seed
    assert len({s.child("sweep", k).seed for k in range(20)}) == 20


def test_seed_range():
    Streams(2**64 - 1)
    with pytest.raises(ValueError):
        Streams(-1)
    with pytest.raises(ValueError):
        Streams(2**64)


def test_blocks_cover_range():
    spans = blocks(10000)
    assert spans[0] == (0, BLOCK) and spans[-1][1] == 10000
    assert all(a[1] == b[0] for a, b in zip(spans, spans[1:]))
    assert blocks(3, 2) == [(0, 2), (2, 3)]
    assert label_id("batch") == label_id("batch") != label_id("pairs")
