import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloudmr.classify import (
    BatchStats,
    ClassifierConfig,
    RoutingTable,
    VClass,
    classify,
    load_classifier_file,
    measure,
    route,
)
from cloudmr.errors import EmptyBatch, InvalidConfig

from oracles import brute_argmax, distinct_shapes

UNIT = ClassifierConfig(1.0, 1.0, 1.0, 1.0)


def test_all_equal_scores_pick_first_in_tie_order():
    assert classify(BatchStats(1, 1, 1, 1.0), UNIT) is VClass.VOLUME
    reordered = ClassifierConfig(1, 1, 1, 1, (VClass.VALUE, VClass.VARIETY, VClass.VELOCITY, VClass.VOLUME))
    assert classify(BatchStats(1, 1, 1, 1.0), reordered) is VClass.VALUE


def test_unique_maximum_volume():
    cfg = ClassifierConfig(volume_ref=1e6, velocity_ref=1e6, variety_ref=10)
    assert classify(BatchStats(5e6, 2e5, 3, 0.5), cfg) is VClass.VOLUME


def test_invalid_config():
    with pytest.raises(InvalidConfig):
        classify(BatchStats(1, 1, 1, 0.1), ClassifierConfig(volume_ref=0))
    with pytest.raises(InvalidConfig):
        classify(BatchStats(1, 1, 1, 0.1), ClassifierConfig(tie_order=(VClass.VALUE,)))


def _random_stats(rng):
    return BatchStats(
        rng.uniform(0, 1e8),
        rng.uniform(0, 1e7),
        rng.randint(1, 12),
        rng.random(),
    )


def test_hundred_random_batches_match_brute_force():
    rng = random.Random(11)
    cfg = ClassifierConfig(2e7, 3e6, 6, 1.0)
    for _ in range(100):
        s = _random_stats(rng)
        expected = brute_argmax(s.volume_bytes, s.arrival_rate, s.schema_kinds, s.value_score, (2e7, 3e6, 6, 1.0))
        assert classify(s, cfg).value == expected


def test_route_lookup_and_constant_table():
    table = RoutingTable({VClass.VOLUME: "g_vol", VClass.VELOCITY: "g_vel", VClass.VARIETY: "g_var", VClass.VALUE: "g_val"})
    assert route(VClass.VOLUME, table) == "g_vol"
    const = RoutingTable.constant("only")
    assert {route(v, const) for v in VClass} == {"only"}


def test_routing_table_must_be_total():
    with pytest.raises(InvalidConfig):
        RoutingTable({VClass.VOLUME: "g"})


def test_classify_route_partitions_batches():
    rng = random.Random(3)
    table = RoutingTable({VClass.VOLUME: "a", VClass.VELOCITY: "b", VClass.VARIETY: "a", VClass.VALUE: "c"})
    cfg = ClassifierConfig(5e7, 5e6, 6, 1.0)
    batches = [_random_stats(rng) for _ in range(300)]
    groups: dict[str, set[int]] = {}
    for i, b in enumerate(batches):
        groups.setdefault(route(classify(b, cfg), table), set()).add(i)
    union = set().union(*groups.values())
    assert union == set(range(len(batches)))
    assert sum(len(g) for g in groups.values()) == len(batches)


def test_measure_shapes_and_rate():
    assert measure(["a,1"] * 10, 0.2, 1.0).schema_kinds == 1
    records = ["x,1", "y,2", "z,1.5", "w,2,3", "q,7"]
    assert measure(records, 0.2, 1.0).schema_kinds == distinct_shapes(records) == 3
    stats = measure(b"x" * 99 + b"\n", 0.5, 10.0)
    assert stats.volume_bytes == 100
    assert stats.arrival_rate == 10.0


def test_measure_empty_batch():
    with pytest.raises(EmptyBatch):
        measure([], 0.1, 1.0)
    with pytest.raises(EmptyBatch):
        measure(b"", 0.1, 1.0)


def test_config_file(tmp_path):
    path = tmp_path / "cls.json"
    path.write_text(
        json.dumps(
            {
                "classifier": {"volume_ref": 10, "velocity_ref": 1, "variety_ref": 2, "tie_order": ["VALUE", "VOLUME", "VELOCITY", "VARIETY"]},
                "routing": {"VOLUME": "g1", "VELOCITY": "g2", "VARIETY": "g2", "VALUE": "g3"},
            }
        )
    )
    cfg, table = load_classifier_file(path)
    assert cfg.volume_ref == 10 and cfg.tie_order[0] is VClass.VALUE
    assert route(classify(BatchStats(0, 0, 1, 0.5), cfg), table) == "g3"


stats_strategy = st.builds(
    BatchStats,
    st.integers(0, 10**9),
    st.integers(0, 10**8),
    st.integers(1, 50),
    st.floats(0, 1),
)


@given(stats_strategy, st.integers(1, 10**6))
def test_scale_invariance(stats, factor):
    cfg = ClassifierConfig(1000, 300, 5, 1)
    assert classify(stats, cfg) == classify(stats, cfg.scaled(factor))


@given(stats_strategy)
def test_deterministic_and_matches_oracle(stats):
    cfg = ClassifierConfig(1000, 300, 5, 1)
    first = classify(stats, cfg)
    assert first == classify(stats, cfg)
    assert first.value == brute_argmax(stats.volume_bytes, stats.arrival_rate, stats.schema_kinds, stats.value_score, (1000, 300, 5, 1))
