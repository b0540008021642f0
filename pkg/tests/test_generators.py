import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from modewitness.generators import (
    Generator,
    GeneratorSet,
    Partition,
    canonical_partitions,
    local_count,
    locality_of,
    set_size,
)


def test_two_mode_second_order_set():
    gens = GeneratorSet(2, 2)
    expected = {"q1", "p1", "q2", "p2", "q1^2", "q1 p1", "p1^2", "q2^2", "q2 p2", "p2^2",
                "q1 q2", "p1 p2", "q1 p2", "q2 p1"}
    assert len(gens) == 14
    assert set(gens.labels()) == expected
    nonlocal_ = {str(g) for g in gens if locality_of(g, Partition.parse("1|2")) is None}
    assert nonlocal_ == {"q1 q2", "p1 p2", "q1 p2", "q2 p1"}


@pytest.mark.parametrize("order", [1, 2, 3])
@pytest.mark.parametrize("modes", [1, 2, 3, 4, 5])
def test_counts_match_enumeration(order, modes):
    gens = GeneratorSet(order, modes)
    assert len(gens) == set_size(order, modes)
    local = gens.local_indices(Partition.singletons(modes))
    assert len(local) == local_count(order, modes) == modes * order * (order + 3) // 2


def test_canonical_order_starts_with_quadratures():
    assert GeneratorSet(2, 3).labels()[:6] == ["q1", "q2", "q3", "p1", "p2", "p3"]


@given(st.lists(st.integers(0, 2), min_size=4, max_size=4).filter(lambda k: 0 < sum(k) <= 3))
def test_text_round_trip(k):
    g = Generator(tuple(k))
    assert Generator.parse(str(g), 2) == g


def test_generator_validation():
    with pytest.raises(ValueError):
        Generator((1, 0, 0))
    with pytest.raises(ValueError):
        Generator((0, 0))
    with pytest.raises(ValueError):
        Generator.parse("q3", 2)
    with pytest.raises(ValueError):
        GeneratorSet(4, 2)


def test_partition_parsing():
    p = Partition.parse("12|3")
    assert p.modes == 3 and p.shape() == (2, 1)
    assert str(p) == "12|3"
    assert Partition.parse("1|2|3").refines(p)
    with pytest.raises(ValueError):
        Partition.parse("12|2")
    with pytest.raises(ValueError):
        Partition.parse("1|3")
    with pytest.raises(ValueError):
        Partition.parse("1|2", modes=3)


def test_canonical_partitions():
    assert [str(p) for p in canonical_partitions(3)] == ["1|2|3", "12|3"]
    shapes = [p.shape() for p in canonical_partitions(5)]
    assert len(shapes) == len(set(shapes)) == 6
    assert (4, 1) in shapes and (1, 1, 1, 1, 1) in shapes


def test_locality_counts_block_generators():
    gens = GeneratorSet(2, 3)
    p = Partition.parse("12|3")
    labels = gens.block_labels(p)
    assert labels[gens.index_of("q1 q2")] == 0
    assert labels[gens.index_of("q1 p3")] == -1
    assert math.isclose(sum(labels >= 0), 14 + 5)
