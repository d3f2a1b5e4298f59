"""Named parameter store and its binary checkpoint format.

Checkpoints are versioned and bit-exact: a magic/version header, then each
parameter (and its Adam moment buffers) as a length-prefixed name, shape, and
raw little-endian float64 payload.
"""
from __future__ import annotations

import struct

import numpy as np

from .autodiff import Tensor

MAGIC = b"ALPSCHED"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable checkpoint: bad magic, wrong version, or truncated payload."""


class ParameterStore:
    """Named parameter tensors plus per-parameter Adam moment buffers.

    Names are unique and shapes are fixed after `add`; the tensors are leaf
    nodes shared by every forward pass, so one backward over a combined loss
    accumulates all gradients here.
    """

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.moment1: dict[str, np.ndarray] = {}
        self.moment2: dict[str, np.ndarray] = {}
        self.step_count: int = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        tensor = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = tensor
        self.moment1[name] = np.zeros_like(tensor.data)
        self.moment2[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def gradients(self) -> dict[str, np.ndarray]:
        return {name: t.grad for name, t in self.params.items() if t.grad is not None}

    def clone_values(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, arr in values.items():
            self.params[name].data[...] = arr


def _pack_array(name: str, arr: np.ndarray) -> bytes:
    encoded = name.encode()
    head = struct.pack("<H", len(encoded)) + encoded
    head += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return head + payload


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def read(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise CheckpointError("corrupt checkpoint: truncated payload")
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def _read_array(reader: _Reader) -> tuple[str, np.ndarray]:
    (name_len,) = reader.unpack("<H")
    name = reader.read(name_len).decode()
    (ndim,) = reader.unpack("<B")
    shape = reader.unpack(f"<{ndim}I") if ndim else ()
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(reader.read(count * 8), dtype="<f8").reshape(shape)
    return name, data.astype(np.float64)


def save_checkpoint(store: ParameterStore, path) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<IQI", FORMAT_VERSION, store.step_count, len(store.params))
    for name in store.names():
        blob += _pack_array(name, store.params[name].data)
        blob += _pack_array(name + ".m1", store.moment1[name])
        blob += _pack_array(name + ".m2", store.moment2[name])
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path) -> ParameterStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    reader = _Reader(blob)
    if reader.read(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, step_count, count = reader.unpack("<IQI")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint version {version} not supported (expected {FORMAT_VERSION})")
    store = ParameterStore()
    store.step_count = step_count
    for _ in range(count):
        name, value = _read_array(reader)
        store.add(name, value)
        m1_name, m1 = _read_array(reader)
        m2_name, m2 = _read_array(reader)
        if m1_name != name + ".m1" or m2_name != name + ".m2":
            raise CheckpointError("corrupt checkpoint: moment buffers out of order")
        store.moment1[name][...] = m1
        store.moment2[name][...] = m2
    if reader.pos != len(blob):
        raise CheckpointError("corrupt checkpoint: trailing bytes")
    return store
