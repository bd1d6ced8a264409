"""Binary checkpoint archive of named float32 tensors plus Adam state.

Layout, all integers little-endian::

    "AGFV" | u32 version | u64 step | u32 count | count x entry
    u8 has_optimizer [| u64 adam_t | u32 count | count x entry]

    entry = u16 name_len | name (UTF-8) | u8 rank (<= 4) | rank x u32 dim
            | float32 payload (little-endian, C order)

Entries are written in lexicographic name order. Optimizer entries are named
``m.<param>`` and ``v.<param>``.
"""

import logging
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from aggfov.common.config import AdamConfig
from aggfov.common.errors import (
    BadMagicError,
    CheckpointError,
    MissingParameterError,
    ShapeMismatchError,
    TruncatedCheckpointError,
    UnsupportedVersionError,
)
from aggfov.model.network import HallucinationNet, build_network
from aggfov.training.optim import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"AGFV"
FORMAT_VERSION = 1
_FLOAT = np.dtype("<f4")
MAX_RANK = 4


@dataclass
class Checkpoint:
    """Decoded archive contents."""

    step: int
    tensors: dict[str, np.ndarray]
    adam_t: Optional[int] = None
    moments: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def has_optimizer(self) -> bool:
        return self.adam_t is not None


def _encode_entries(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype=_FLOAT)
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<B", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())
    return b"".join(parts)


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialize a checkpoint to bytes."""
    out = [MAGIC, struct.pack("<IQ", FORMAT_VERSION, checkpoint.step)]
    out.append(_encode_entries(checkpoint.tensors))
    if checkpoint.adam_t is None:
        out.append(struct.pack("<B", 0))
    else:
        out.append(struct.pack("<BQ", 1, checkpoint.adam_t))
        out.append(_encode_entries(checkpoint.moments))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.pos + size
        if end > len(self.data):
            raise TruncatedCheckpointError(
                f"checkpoint truncated while reading {what} at byte {self.pos}"
            )
        chunk = self.data[self.pos : end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple[int, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def entries(self) -> dict[str, np.ndarray]:
        (count,) = self.unpack("<I", "tensor count")
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = self.unpack("<H", "name length")
            raw_name = self.take(name_len, "tensor name")
            try:
                name = raw_name.decode("utf-8")
            except UnicodeDecodeError:
                raise CheckpointError(
                    f"tensor name {raw_name!r} at byte {self.pos - name_len} "
                    "is not valid UTF-8"
                ) from None
            (rank,) = self.unpack("<B", f"rank of {name}")
            if rank > MAX_RANK:
                raise CheckpointError(
                    f"tensor {name} declares rank {rank}, at most {MAX_RANK} allowed"
                )
            shape = self.unpack(f"<{rank}I", f"dims of {name}")
            size = math.prod(shape)
            payload = self.take(size * _FLOAT.itemsize, f"payload of {name}")
            arrays[name] = np.frombuffer(payload, dtype=_FLOAT).reshape(shape).copy()
        return arrays


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Parse checkpoint bytes.

    Raises:
        BadMagicError: Not a checkpoint
        UnsupportedVersionError: Unknown format version
        TruncatedCheckpointError: Data ends early
        CheckpointError: A tensor name is not UTF-8 or its rank exceeds 4
    """
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad checkpoint magic {data[:4]!r}, expected {MAGIC!r}")
    reader = _Reader(data)
    reader.pos = 4
    (version,) = reader.unpack("<I", "version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    (step,) = reader.unpack("<Q", "step")
    tensors = reader.entries()
    (flag,) = reader.unpack("<B", "optimizer flag")
    if not flag:
        return Checkpoint(step=step, tensors=tensors)
    (adam_t,) = reader.unpack("<Q", "optimizer step")
    moments = reader.entries()
    return Checkpoint(step=step, tensors=tensors, adam_t=adam_t, moments=moments)


def read_checkpoint(path: str | Path) -> Checkpoint:
    """Read and parse a checkpoint file."""
    return decode_checkpoint(Path(path).read_bytes())


def save_checkpoint(
    net: HallucinationNet,
    state: Optional[AdamState],
    path: str | Path,
    step: int = 0,
) -> Path:
    """Write weights, running statistics and optional Adam state atomically."""
    checkpoint = Checkpoint(step=step, tensors=net.params.state_arrays())
    if state is not None:
        checkpoint.adam_t = state.t
        for name, m in state.m.items():
            checkpoint.moments[f"m.{name}"] = m
        for name, v in state.v.items():
            checkpoint.moments[f"v.{name}"] = v
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(checkpoint))
    os.replace(tmp, path)
    logger.info("Saved checkpoint at step %d to %s", step, path)
    return path


def _restore_optimizer(
    checkpoint: Checkpoint, net: HallucinationNet, config: AdamConfig
) -> AdamState:
    state = AdamState(config=config, t=checkpoint.adam_t or 0)
    for name, tensor in net.params.params.items():
        m_name, v_name = f"m.{name}", f"v.{name}"
        if m_name not in checkpoint.moments and v_name not in checkpoint.moments:
            # parameter never stepped
            continue
        for key in (m_name, v_name):
            if key not in checkpoint.moments:
                raise MissingParameterError(key, found=sorted(checkpoint.moments))
            actual = tuple(checkpoint.moments[key].shape)
            if actual != tensor.shape:
                raise ShapeMismatchError(key, tensor.shape, actual)
        state.m[name] = checkpoint.moments[m_name].astype(tensor.dtype)
        state.v[name] = checkpoint.moments[v_name].astype(tensor.dtype)
    return state


def load_checkpoint(
    path: str | Path,
    net: Optional[HallucinationNet] = None,
    adam: Optional[AdamConfig] = None,
) -> tuple[HallucinationNet, Optional[AdamState], int]:
    """Load a checkpoint into ``net`` (a fresh network when omitted).

    Returns:
        ``(net, optimizer state or None, step)``

    Raises:
        CheckpointError: Any of the format or registry validation failures
    """
    checkpoint = read_checkpoint(path)
    if net is None:
        net = build_network(seed=0)
    net.params.load_arrays(checkpoint.tensors)
    state = None
    if checkpoint.has_optimizer:
        state = _restore_optimizer(checkpoint, net, adam or AdamConfig())
    logger.info("Loaded checkpoint from %s (step %d)", path, checkpoint.step)
    return net, state, checkpoint.step
