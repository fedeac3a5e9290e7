"""Binary checkpoints for policy and critic parameters.

Byte layout (all integers little-endian):

    offset  size  field
    0       8     magic ``b"SYMBOPT\\0"``
    8       4     format version (uint32, currently 1)
    12      8     RNG seed (int64)
    20      8     training-step counter (uint64)
    28      4     tensor count (uint32)
    then per tensor, in file order:
            2     name length L (uint16)
            L     name (UTF-8)
            1     ndim (uint8)
            4*n   shape dims (uint32 each)
            8*k   row-major float64 data

Round-trips exactly: loading a saved checkpoint restores bit-identical
parameter tensors, seed and step counter.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .policy import POLICY_TENSORS, CriticParams, PolicyParams

MAGIC = b"SYMBOPT\x00"
VERSION = 1

_CRITIC_NAMES = ("critic_w", "critic_b")


@dataclass
class Checkpoint:
    params: PolicyParams
    critic: CriticParams
    seed: int
    step: int


def _tensor_items(params: PolicyParams, critic: CriticParams):
    for name, _, _ in POLICY_TENSORS:
        yield name, np.asarray(getattr(params, name), dtype=np.float64)
    yield "critic_w", np.asarray(critic.w, dtype=np.float64)
    yield "critic_b", np.asarray([critic.b], dtype=np.float64)


def save_checkpoint(path, params: PolicyParams, critic: CriticParams,
                    seed: int, step: int) -> None:
    tensors = list(_tensor_items(params, critic))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IqQI", VERSION, seed, step, len(tensors)))
        for name, arr in tensors:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(np.ascontiguousarray(arr).tobytes())


class CheckpointError(ValueError):
    pass


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, seed, step, count = struct.unpack_from("<IqQI", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    off = 8 + struct.calcsize("<IqQI")
    tensors: dict[str, np.ndarray] = {}
    try:
        _read_tensors(data, off, count, tensors, path)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc

    expected = {name for name, _, _ in POLICY_TENSORS} | set(_CRITIC_NAMES)
    if set(tensors) != expected:
        raise CheckpointError(
            f"{path}: tensor names {sorted(tensors)} != expected {sorted(expected)}")
    for name, shape, _ in POLICY_TENSORS:
        if tensors[name].shape != shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {tensors[name].shape}, expected {shape}")

    params = PolicyParams(**{name: tensors[name] for name, _, _ in POLICY_TENSORS})
    critic = CriticParams(w=tensors["critic_w"], b=float(tensors["critic_b"][0]))
    return Checkpoint(params=params, critic=critic, seed=int(seed), step=int(step))


def _read_tensors(data: bytes, off: int, count: int,
                  tensors: dict, path) -> None:
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape)
        off += 8 * size
        tensors[name] = arr.copy()
    if off != len(data):
        raise CheckpointError(f"{path}: {len(data) - off} trailing bytes")
