"""In-process miniature of a master/slave block file store.

One name-node index (files, block placements) sits in front of several
data-nodes that hold raw block replicas.  Files are write-once, split into
fixed-size blocks and replicated onto distinct nodes chosen round-robin.

The store works purely in memory by default.  When ``root`` is given each
replica is also written to ``<root>/<node-id>/<file-id>.<block-index>`` and the
name-node state to ``<root>/manifest.json``, so a store can be reopened by a
later process (the CLI relies on this).
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from cloudmr.errors import (
    BlockUnavailable,
    DuplicateFile,
    DuplicateNode,
    NoNodes,
    UnknownFile,
    UnknownNode,
)

log = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 64 * 1024
DEFAULT_REPLICATION = 3
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True, order=True)
class BlockId:
    file_id: str
    index: int

    def __str__(self) -> str:
        return f"{self.file_id}.{self.index}"

    @classmethod
    def parse(cls, text: str) -> "BlockId":
        file_id, _, index = text.rpartition(".")
        return cls(file_id, int(index))


@dataclass
class FileManifest:
    """Name-node record of one stored file.

    ``block_lengths`` is kept next to ``blocks`` because record-aligned files
    have blocks shorter than ``block_size``.
    """

    name: str
    total_size: int
    block_size: int
    blocks: list[BlockId]
    replication: int
    block_lengths: list[int] = field(default_factory=list)
    record_aligned: bool = False

    @property
    def file_id(self) -> str | None:
        return self.blocks[0].file_id if self.blocks else None

    def block_offsets(self) -> list[int]:
        """Byte offset of each block within the file."""
        offsets, pos = [], 0
        for length in self.block_lengths:
            offsets.append(pos)
            pos += length
        return offsets

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "total_size": self.total_size,
            "block_size": self.block_size,
            "blocks": [str(b) for b in self.blocks],
            "block_lengths": list(self.block_lengths),
            "replication": self.replication,
            "record_aligned": self.record_aligned,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FileManifest":
        return cls(
            name=d["name"],
            total_size=d["total_size"],
            block_size=d["block_size"],
            blocks=[BlockId.parse(b) for b in d["blocks"]],
            replication=d["replication"],
            block_lengths=list(d["block_lengths"]),
            record_aligned=d.get("record_aligned", False),
        )


@dataclass
class DataNode:
    id: str
    alive: bool = True


def split_fixed(data: bytes, block_size: int) -> list[bytes]:
    return [data[i : i + block_size] for i in range(0, len(data), block_size)]


def split_aligned(data: bytes, block_size: int, sep: bytes = b"\n") -> list[bytes]:
    """Split ``data`` into blocks of at most ``block_size`` bytes that end on ``sep``.

    A single record longer than ``block_size`` gets a block of its own.
    """
    chunks = []
    start, n = 0, len(data)
    while start < n:
        end = min(start + block_size, n)
        if end < n:
            cut = data.rfind(sep, start, end)
            if cut == -1:
                cut = data.find(sep, end)
            end = n if cut == -1 else cut + len(sep)
        chunks.append(data[start:end])
        start = end
    return chunks


class BlockStore:
    """Name node plus a set of data nodes.

    Mutations (``put_file``, node changes, ``rebalance``) are serialized by a
    store-wide lock; reads only hold it while looking up placements.
    """

    def __init__(
        self,
        nodes: int | Iterable[str] = 0,
        root: str | os.PathLike | None = None,
        block_size: int = DEFAULT_BLOCK_SIZE,
        replication: int = DEFAULT_REPLICATION,
    ):
        if block_size <= 0:
            raise ValueError("block_size must be positive")
        if replication < 1:
            raise ValueError("replication must be >= 1")
        self.block_size = block_size
        self.replication = replication
        self.root = Path(root) if root is not None else None
        self.nodes: dict[str, DataNode] = {}
        self.files: dict[str, FileManifest] = {}
        self.placements: dict[BlockId, set[str]] = {}
        self._data: dict[str, dict[BlockId, bytes]] = {}
        self._cursor = 0
        self._next_file = 0
        self._lock = threading.RLock()

        if self.root is not None and (self.root / MANIFEST_NAME).exists():
            self._load()
        else:
            ids = [f"dn{i:02d}" for i in range(nodes)] if isinstance(nodes, int) else list(nodes)
            for node_id in ids:
                self._add(node_id)
            self._save()

    # -- node management -------------------------------------------------

    def alive_nodes(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.alive)

    def _add(self, node_id: str) -> None:
        if node_id in self.nodes:
            raise DuplicateNode(node_id)
        self.nodes[node_id] = DataNode(node_id)
        self._data[node_id] = {}
        if self.root is not None:
            (self.root / node_id).mkdir(parents=True, exist_ok=True)

    def add_node(self, node_id: str) -> "BlockStore":
        """Register a fresh data node; it becomes eligible for later placements."""
        with self._lock:
            self._add(node_id)
            self._save()
        return self

    def kill_node(self, node_id: str) -> "BlockStore":
        """Crash a node: its replicas become unreachable and nothing is recovered."""
        with self._lock:
            self._node(node_id).alive = False
            self._save()
        return self

    def remove_node(self, node_id: str) -> "BlockStore":
        """Decommission a node, re-replicating its blocks before dropping it.

        A live node being removed still serves as a copy source, so blocks it
        held alone survive.  A dead node contributes nothing.
        """
        with self._lock:
            node = self._node(node_id)
            extra_source = node_id if node.alive else None
            node.alive = False
            self._rebalance(extra_source)
            del self.nodes[node_id]
            self._data.pop(node_id, None)
            for holders in self.placements.values():
                holders.discard(node_id)
            if self.root is not None:
                shutil.rmtree(self.root / node_id, ignore_errors=True)
            self._save()
        return self

    def rebalance(self) -> "BlockStore":
        """Restore every readable block to ``min(replication, alive)`` copies."""
        with self._lock:
            self._rebalance(None)
            self._save()
        return self

    def _node(self, node_id: str) -> DataNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def _rebalance(self, extra_source: str | None) -> None:
        alive = self.alive_nodes()
        for manifest in self.files.values():
            target = min(manifest.replication, len(alive))
            for bid in manifest.blocks:
                holders = self.placements[bid]
                live = sorted(h for h in holders if self.nodes[h].alive)
                if len(live) >= target:
                    continue
                sources = live + ([extra_source] if extra_source in holders else [])
                if not sources:
                    log.warning("block %s lost: no live replica", bid)
                    continue
                payload = self._read_replica(sources[0], bid)
                candidates = [n for n in alive if n not in holders]
                start = self._cursor % len(candidates) if candidates else 0
                rotated = candidates[start:] + candidates[:start]
                for node_id in rotated[: target - len(live)]:
                    self._write_replica(node_id, bid, payload)
                    holders.add(node_id)
                self._cursor += 1

    # -- file operations -------------------------------------------------

    def put_file(
        self,
        name: str,
        data: bytes,
        block_size: int | None = None,
        replication: int | None = None,
        align: bytes | None = None,
    ) -> FileManifest:
        """Store ``data`` under ``name``.

        With ``align`` set (e.g. ``b"\\n"``) blocks are cut on record
        separators so that no record straddles two blocks.
        """
        block_size = self.block_size if block_size is None else block_size
        replication = self.replication if replication is None else replication
        if block_size <= 0:
            raise ValueError("block_size must be positive")
        if replication < 1:
            raise ValueError("replication must be >= 1")
        data = bytes(data)
        with self._lock:
            if name in self.files:
                raise DuplicateFile(name)
            alive = self.alive_nodes()
            if not alive:
                raise NoNodes("no alive data nodes")
            chunks = split_aligned(data, block_size, align) if align else split_fixed(data, block_size)
            file_id = f"f{self._next_file:06d}"
            self._next_file += 1
            k = min(replication, len(alive))
            blocks = []
            for index, chunk in enumerate(chunks):
                bid = BlockId(file_id, index)
                chosen = [alive[(self._cursor + j) % len(alive)] for j in range(k)]
                self._cursor += 1
                for node_id in chosen:
                    self._write_replica(node_id, bid, chunk)
                self.placements[bid] = set(chosen)
                blocks.append(bid)
            manifest = FileManifest(
                name=name,
                total_size=len(data),
                block_size=block_size,
                blocks=blocks,
                replication=replication,
                block_lengths=[len(c) for c in chunks],
                record_aligned=bool(align),
            )
            self.files[name] = manifest
            self._save()
            return manifest

    def manifest(self, name: str) -> FileManifest:
        try:
            return self.files[name]
        except KeyError:
            raise UnknownFile(name) from None

    def read_block(self, bid: BlockId) -> bytes:
        with self._lock:
            holders = self.placements.get(bid)
            if holders is None:
                raise UnknownFile(str(bid))
            live = sorted(h for h in holders if self.nodes[h].alive)
        if not live:
            raise BlockUnavailable(f"all replicas of block {bid} are on dead nodes")
        return self._read_replica(live[0], bid)

    def get_file(self, name: str) -> bytes:
        manifest = self.manifest(name)
        return b"".join(self.read_block(b) for b in manifest.blocks)

    def list_files(self) -> list[FileManifest]:
        return [self.files[k] for k in sorted(self.files)]

    def __contains__(self, name: str) -> bool:
        return name in self.files

    # -- replica I/O and persistence --------------------------------------

    def _replica_path(self, node_id: str, bid: BlockId) -> Path:
        assert self.root is not None
        return self.root / node_id / f"{bid.file_id}.{bid.index}"

    def _write_replica(self, node_id: str, bid: BlockId, payload: bytes) -> None:
        if self.root is None:
            self._data[node_id][bid] = payload
        else:
            self._replica_path(node_id, bid).write_bytes(payload)

    def _read_replica(self, node_id: str, bid: BlockId) -> bytes:
        if self.root is None:
            return self._data[node_id][bid]
        return self._replica_path(node_id, bid).read_bytes()

    def _save(self) -> None:
        if self.root is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        state = {
            "block_size": self.block_size,
            "replication": self.replication,
            "cursor": self._cursor,
            "next_file": self._next_file,
            "nodes": [{"id": n.id, "alive": n.alive} for n in self.nodes.values()],
            "files": {name: m.to_dict() for name, m in sorted(self.files.items())},
            "placements": {str(b): sorted(h) for b, h in sorted(self.placements.items())},
        }
        tmp = self.root / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(state, indent=2))
        os.replace(tmp, self.root / MANIFEST_NAME)

    def _load(self) -> None:
        assert self.root is not None
        state = json.loads((self.root / MANIFEST_NAME).read_text())
        self.block_size = state["block_size"]
        self.replication = state["replication"]
        self._cursor = state["cursor"]
        self._next_file = state["next_file"]
        for n in state["nodes"]:
            self.nodes[n["id"]] = DataNode(n["id"], n["alive"])
            self._data[n["id"]] = {}
        self.files = {name: FileManifest.from_dict(m) for name, m in state["files"].items()}
        self.placements = {BlockId.parse(b): set(h) for b, h in state["placements"].items()}

