"""Model configuration, the named parameter store, and checkpoint files."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..frontend import Vocabulary
from .tensor import Tensor

__all__ = [
    "ModelConfig",
    "ParameterStore",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_MAGIC = b"MMSCSCKP"
CHECKPOINT_VERSION = 1

MODALITIES = ("T", "F", "A", "G")


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and switches of the whole model.

    ``embed_dim`` must be even (sinusoidal position codes pair dimensions)
    and divisible by ``text_heads`` so the concatenated heads match the
    residual width.
    """

    embed_dim: int = 128
    text_heads: int = 8
    graph_heads: int = 8
    out_dim: int = 768
    margin: float = 0.05
    max_tokens: int = 100
    max_name_words: int = 6
    max_api_words: int = 20
    max_graph_nodes: int = 32
    hops: int = 1
    modalities: tuple[str, ...] = MODALITIES

    def __post_init__(self):
        for name in (
            "embed_dim", "text_heads", "graph_heads", "out_dim",
            "max_tokens", "max_name_words", "max_api_words",
            "max_graph_nodes", "hops",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.embed_dim % 2 != 0:
            raise ValueError("embed_dim must be even for positional encoding")
        if self.embed_dim % self.text_heads != 0:
            raise ValueError("embed_dim must be divisible by text_heads")
        bad = [m for m in self.modalities if m not in MODALITIES]
        if bad or not self.modalities:
            raise ValueError(f"modalities must be a non-empty subset of {MODALITIES}")
        object.__setattr__(self, "modalities", tuple(self.modalities))

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.text_heads

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modalities"] = list(self.modalities)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["modalities"] = tuple(d.get("modalities", MODALITIES))
        return cls(**d)


class ParameterStore:
    """Named, shaped, learnable tensors plus the seed they grew from.

    Creation order is part of the model identity: the seeded generator is
    consumed in call order, so the same construction sequence always yields
    the same initial values.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def create(self, name: str, shape: tuple[int, ...], fan_in: int | None = None,
               init: str = "uniform") -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already exists")
        if init == "uniform":
            fan = fan_in if fan_in is not None else shape[0]
            bound = 1.0 / np.sqrt(fan)
            data = self._rng.uniform(-bound, bound, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def install(self, name: str, data: np.ndarray) -> None:
        """Install a raw array (checkpoint load path)."""
        if name in self._params:
            raise ValueError(f"parameter {name!r} already exists")
        self._params[name] = Tensor(
            np.ascontiguousarray(data, dtype=np.float64), requires_grad=True
        )

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._params[name]
        except KeyError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def require(self, names: list[str]) -> None:
        missing = [n for n in names if n not in self._params]
        if missing:
            raise KeyError("missing parameters: " + ", ".join(missing))

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Current gradients; parameters untouched by the pass yield zeros."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._params.items()
        }


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, store: ParameterStore, config: ModelConfig,
                    vocab: Vocabulary) -> None:
    """Write a versioned binary checkpoint (parameters + config + vocab)."""
    meta = {
        "config": config.to_dict(),
        "seed": store.seed,
        "vocab": list(vocab.words),
    }
    meta_bytes = json.dumps(meta, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<Q", len(store)))
        for name, t in store.items():
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", t.data.ndim))
            fh.write(struct.pack(f"<{t.data.ndim}Q", *t.data.shape))
            fh.write(t.data.astype("<f8").tobytes())


def _read(fh, size: int, what: str) -> bytes:
    buf = fh.read(size)
    if len(buf) != size:
        raise CheckpointError(
            f"truncated checkpoint while reading {what} at offset {fh.tell() - len(buf)}"
        )
    return buf


def load_checkpoint(path: str | Path) -> tuple[ParameterStore, ModelConfig, Vocabulary]:
    with open(path, "rb") as fh:
        magic = _read(fh, len(CHECKPOINT_MAGIC), "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", _read(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", _read(fh, 4, "metadata length"))
        meta = json.loads(_read(fh, meta_len, "metadata").decode("utf-8"))
        config = ModelConfig.from_dict(meta["config"])
        vocab = Vocabulary(words=tuple(meta["vocab"]))
        store = ParameterStore(seed=meta.get("seed", 0))
        (count,) = struct.unpack("<Q", _read(fh, 8, "parameter count"))
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read(fh, 4, "name length"))
            name = _read(fh, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read(fh, 4, "rank"))
            shape = struct.unpack(f"<{ndim}Q", _read(fh, 8 * ndim, "shape"))
            size = int(np.prod(shape)) if shape else 1
            payload = _read(fh, 8 * size, f"payload of {name!r}")
            data = np.frombuffer(payload, dtype="<f8").reshape(shape)
            store.install(name, data)
    return store, config, vocab
