import itertools
import json
import math
import os
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudmr.errors import BlockUnavailable, DuplicateFile, DuplicateNode, NoNodes, UnknownFile, UnknownNode
from cloudmr.store import BlockStore, split_aligned


def test_empty_file_has_no_blocks(store):
    m = store.put_file("empty", b"", block_size=64, replication=3)
    assert m.blocks == []
    assert m.total_size == 0
    assert store.get_file("empty") == b""


def test_ceiling_split_130_bytes():
    s = BlockStore(3)
    m = s.put_file("f", bytes(range(130)), block_size=64, replication=3)
    assert [len(s.read_block(b)) for b in m.blocks] == [64, 64, 2]
    assert m.block_lengths == [64, 64, 2]


def test_random_kib_round_trip(store):
    payload = random.Random(7).randbytes(1024)
    store.put_file("kib", payload, block_size=100)
    assert store.get_file("kib") == payload


def test_duplicate_and_unknown(store):
    store.put_file("a", b"x")
    with pytest.raises(DuplicateFile):
        store.put_file("a", b"y")
    with pytest.raises(UnknownFile):
        store.get_file("nope")


def test_read_survives_two_of_three_replicas_down(store):
    m = store.put_file("f", b"payload" * 50, block_size=64, replication=3)
    holders = sorted(store.placements[m.blocks[0]])
    store.kill_node(holders[0])
    store.kill_node(holders[1])
    assert store.get_file("f") == b"payload" * 50


def test_single_replica_lost():
    s = BlockStore(3)
    m = s.put_file("f", b"abc", replication=1)
    (holder,) = s.placements[m.blocks[0]]
    s.kill_node(holder)
    with pytest.raises(BlockUnavailable):
        s.get_file("f")


def test_remove_rereplicates_to_forced_maximum():
    s = BlockStore(3)
    m = s.put_file("f", bytes(500), block_size=64, replication=3)
    s.remove_node("dn01")
    for bid in m.blocks:
        assert s.placements[bid] == {"dn00", "dn02"}
    assert s.get_file("f") == bytes(500)


def test_add_node_then_three_distinct_placements():
    s = BlockStore(3)
    s.add_node("dn03")
    m = s.put_file("g", bytes(1000), block_size=50, replication=3)
    alive = set(s.alive_nodes())
    used = set()
    for bid in m.blocks:
        holders = s.placements[bid]
        assert len(holders) == 3 and holders <= alive
        used |= holders
    # round-robin over four nodes eventually touches all of them
    assert used == alive


def test_exhaustive_placement_distinctness():
    # every subset of killed nodes, every replication level, on 4 nodes
    for r in range(1, 5):
        s = BlockStore(4)
        m = s.put_file("f", bytes(range(256)) * 4, block_size=37, replication=r)
        for bid in m.blocks:
            holders = s.placements[bid]
            assert len(holders) == r
        for k in range(0, 4):
            for dead in itertools.combinations(s.alive_nodes(), k):
                covered = all(s.placements[b] - set(dead) for b in m.blocks)
                if k <= r - 1:
                    assert covered


def test_remove_last_node_then_no_nodes():
    s = BlockStore(1)
    s.remove_node("dn00")
    with pytest.raises(NoNodes):
        s.put_file("x", b"1")


def test_node_errors(store):
    with pytest.raises(DuplicateNode):
        store.add_node("dn00")
    with pytest.raises(UnknownNode):
        store.remove_node("zz")
    with pytest.raises(UnknownNode):
        store.kill_node("zz")


def test_remove_live_sole_holder_keeps_data():
    s = BlockStore(3)
    m = s.put_file("f", b"only copy", replication=1)
    (holder,) = s.placements[m.blocks[0]]
    s.remove_node(holder)
    assert s.get_file("f") == b"only copy"


def test_rebalance_after_kill_restores_copies():
    s = BlockStore(4)
    m = s.put_file("f", bytes(300), block_size=64, replication=3)
    s.kill_node("dn00")
    s.rebalance()
    alive = set(s.alive_nodes())
    for bid in m.blocks:
        assert len(s.placements[bid] & alive) == 3


def test_record_aligned_split_keeps_lines_whole():
    data = b"".join(f"line {i} {'x' * (i % 13)}\n".encode() for i in range(200))
    chunks = split_aligned(data, 64)
    assert b"".join(chunks) == data
    assert all(c.endswith(b"\n") for c in chunks)
    assert all(len(c) <= 64 for c in chunks)


def test_record_longer_than_block_gets_own_block():
    data = b"short\n" + b"y" * 100 + b"\nend\n"
    chunks = split_aligned(data, 16)
    assert b"".join(chunks) == data
    assert b"y" * 100 + b"\n" in chunks


def test_persistence_layout_and_reopen(tmp_path):
    s = BlockStore(3, root=tmp_path)
    m = s.put_file("/data/a.txt", b"hello\nworld\n", block_size=6, align=b"\n")
    for bid in m.blocks:
        for node in s.placements[bid]:
            assert (tmp_path / node / f"{bid.file_id}.{bid.index}").is_file()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["files"]["/data/a.txt"]["total_size"] == 12

    again = BlockStore(root=tmp_path)
    assert again.get_file("/data/a.txt") == b"hello\nworld\n"
    again.remove_node("dn00")
    assert not (tmp_path / "dn00").exists()
    assert BlockStore(root=tmp_path).get_file("/data/a.txt") == b"hello\nworld\n"


@settings(max_examples=60, deadline=None)
@given(st.binary(max_size=3000), st.integers(1, 700), st.integers(1, 4), st.integers(1, 5))
def test_round_trip_and_block_count_law(payload, block_size, replication, nodes):
    s = BlockStore(nodes)
    m = s.put_file("p", payload, block_size=block_size, replication=replication)
    assert s.get_file("p") == payload
    assert len(m.blocks) == math.ceil(len(payload) / block_size)
    lengths = [len(s.read_block(b)) for b in m.blocks]
    assert all(n == block_size for n in lengths[:-1])
    for bid in m.blocks:
        assert len(s.placements[bid]) == min(replication, nodes)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_reads_survive_r_minus_one_crashes(data):
    r = data.draw(st.integers(1, 3))
    s = BlockStore(data.draw(st.integers(r, 6)))
    payload = data.draw(st.binary(min_size=1, max_size=800))
    s.put_file("p", payload, block_size=data.draw(st.integers(1, 200)), replication=r)
    victims = data.draw(st.lists(st.sampled_from(s.alive_nodes()), unique=True, max_size=r - 1))
    for v in victims:
        s.kill_node(v)
    assert s.get_file("p") == payload


def test_concurrent_readers_and_writer():
    from concurrent.futures import ThreadPoolExecutor

    s = BlockStore(4)
    payloads = {f"f{i}": os.urandom(2048) for i in range(8)}
    for name, p in payloads.items():
        s.put_file(name, p, block_size=128)

    def read_all(_):
        return all(s.get_file(n) == p for n, p in payloads.items())

    with ThreadPoolExecutor(8) as pool:
        futures = [pool.submit(read_all, i) for i in range(16)]
        s.put_file("extra", b"z" * 5000, block_size=100)
        assert all(f.result() for f in futures)
