"""Embedding index: exact top-k cosine retrieval with binary persistence.

The scan is exhaustive and exact; ranking is deterministic with ties
broken by ascending id. An approximate backend could slot in behind the
same search contract, but none ships here.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["EmbeddingRecord", "SearchIndex", "IndexFormatError"]

INDEX_MAGIC = b"CEDGIDX1"
INDEX_VERSION = 1


class IndexFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    vector: np.ndarray


class SearchIndex:
    """Append-mostly store of (id, vector) records plus metadata by id."""

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._records: list[EmbeddingRecord] = []
        self._by_id: dict[str, int] = {}
        self.metadata: dict[str, dict] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._by_id

    @property
    def records(self) -> tuple[EmbeddingRecord, ...]:
        return tuple(self._records)

    def add(self, record_id: str, vector: np.ndarray,
            metadata: dict | None = None) -> None:
        if record_id in self._by_id:
            raise ValueError(f"duplicate record id {record_id!r}")
        vector = np.asarray(vector, dtype=np.float64).ravel()
        if vector.shape != (self.dimension,):
            raise ValueError(
                f"vector has dimension {vector.shape[0]}, index expects {self.dimension}"
            )
        self._by_id[record_id] = len(self._records)
        self._records.append(EmbeddingRecord(record_id, vector))
        if metadata is not None:
            self.metadata[record_id] = dict(metadata)

    def vector(self, record_id: str) -> np.ndarray:
        return self._records[self._by_id[record_id]].vector

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Top-k records by cosine similarity, ties broken by ascending id."""
        if not self._records:
            raise ValueError("search on an empty index")
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query, dtype=np.float64).ravel()
        if query.shape != (self.dimension,):
            raise ValueError(
                f"query has dimension {query.shape[0]}, index expects {self.dimension}"
            )
        qnorm = np.linalg.norm(query)
        if qnorm == 0.0:
            raise ValueError("cosine undefined for a zero query vector")
        matrix = np.stack([r.vector for r in self._records])
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("index contains a zero vector")
        scores = np.clip((matrix @ query) / (norms * qnorm), -1.0, 1.0)
        ranked = sorted(
            zip((r.id for r in self._records), scores.tolist()),
            key=lambda pair: (-pair[1], pair[0]),
        )
        return ranked[: min(k, len(ranked))]

    # --- persistence

    @staticmethod
    def _sidecar(path: str | Path) -> Path:
        return Path(str(path) + ".meta.jsonl")

    def persist(self, path: str | Path) -> None:
        """Write the binary index plus a JSON Lines metadata sidecar."""
        with open(path, "wb") as fh:
            fh.write(INDEX_MAGIC)
            fh.write(struct.pack("<I", INDEX_VERSION))
            fh.write(struct.pack("<I", self.dimension))
            fh.write(struct.pack("<Q", len(self._records)))
            for record in self._records:
                id_bytes = record.id.encode("utf-8")
                fh.write(struct.pack("<I", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(record.vector.astype("<f8").tobytes())
        with open(self._sidecar(path), "w", encoding="utf-8") as fh:
            for record in self._records:
                meta = self.metadata.get(record.id)
                if meta is not None:
                    fh.write(
                        json.dumps({"id": record.id, "metadata": meta},
                                   ensure_ascii=False, sort_keys=True) + "\n"
                    )

    @classmethod
    def load(cls, path: str | Path) -> "SearchIndex":
        def read(fh, size: int, what: str) -> bytes:
            buf = fh.read(size)
            if len(buf) != size:
                raise IndexFormatError(
                    f"truncated index while reading {what} at offset {fh.tell() - len(buf)}"
                )
            return buf

        with open(path, "rb") as fh:
            magic = read(fh, len(INDEX_MAGIC), "magic")
            if magic != INDEX_MAGIC:
                raise IndexFormatError(f"bad index magic {magic!r}")
            (version,) = struct.unpack("<I", read(fh, 4, "version"))
            if version != INDEX_VERSION:
                raise IndexFormatError(f"unsupported index version {version}")
            (dimension,) = struct.unpack("<I", read(fh, 4, "dimension"))
            (count,) = struct.unpack("<Q", read(fh, 8, "record count"))
            index = cls(dimension)
            for _ in range(count):
                (id_len,) = struct.unpack("<I", read(fh, 4, "id length"))
                record_id = read(fh, id_len, "record id").decode("utf-8")
                payload = read(fh, 8 * dimension, f"vector of {record_id!r}")
                vector = np.frombuffer(payload, dtype="<f8").copy()
                index.add(record_id, vector)
        sidecar = cls._sidecar(path)
        if sidecar.exists():
            with open(sidecar, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    doc = json.loads(line)
                    if doc["id"] in index:
                        index.metadata[doc["id"]] = doc.get("metadata", {})
        return index
