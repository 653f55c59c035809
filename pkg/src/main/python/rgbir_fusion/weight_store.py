"""Named tensor store, its binary file format, and weight-tree (un)flattening"""
import dataclasses
import math
import struct
from collections import OrderedDict
from typing import Iterable, Optional

import numpy as np

from rgbir_fusion.fusion_config import WEIGHTS_MAGIC, WEIGHTS_VERSION
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.tensor_core import Tensor

_HEADER = struct.Struct("<4sII")
_NAME_LEN = struct.Struct("<H")
_RANK = struct.Struct("<B")


class WeightStore:
    """
    Ordered map name -> float64 tensor backing serialization and module
    construction. Names are unique ASCII strings.
    """
    def __init__(self, entries: Optional[dict] = None, version: int = WEIGHTS_VERSION):
        self.__entries = OrderedDict()
        self.__version = version
        for name, tensor in (entries or {}).items():
            self.add(name, tensor)

    @property
    def version(self) -> int:
        """Format version the store was created with or loaded from."""
        return self.__version

    @property
    def names(self) -> list:
        """Entry names in insertion order."""
        return list(self.__entries)

    def add(self, name: str, tensor) -> None:
        """Adds a new entry; duplicate or non-ASCII names are rejected."""
        if name in self.__entries:
            raise FusionKernelException(f"Duplicate weight name: {name}")
        if not name or not name.isascii() or len(name) > 0xFFFF:
            raise FusionKernelException(f"Invalid weight name: {name!r}")
        array = np.array(tensor, dtype=np.float64)
        if not 1 <= array.ndim <= 255:
            raise FusionKernelException(f"Weight {name} must have rank >= 1, got {array.shape}")
        self.__entries[name] = array

    def missing(self, names: Iterable[str]) -> list:
        """Names from ``names`` absent from the store."""
        return [name for name in names if name not in self.__entries]

    def items(self):
        """(name, tensor) pairs in insertion order."""
        return self.__entries.items()

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.__entries[name]
        except KeyError as ex:
            raise FusionKernelException(f"Missing weight: {name}") from ex

    def __contains__(self, name: str) -> bool:
        return name in self.__entries

    def __len__(self) -> int:
        return len(self.__entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        return (self.names == other.names and self.version == other.version and
                all(np.array_equal(self[name], other[name]) and
                    self[name].shape == other[name].shape for name in self.names))

    __hash__ = None


def save_weights(store: WeightStore, path: str) -> None:
    """Writes the store in the little-endian MMDW binary format."""
    chunks = [_HEADER.pack(WEIGHTS_MAGIC, store.version, len(store))]
    for name, tensor in store.items():
        encoded = name.encode("ascii")
        chunks.append(_NAME_LEN.pack(len(encoded)) + encoded)
        chunks.append(_RANK.pack(tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(tensor.astype("<f8").tobytes())
    try:
        with open(path, "wb") as file:
            file.write(b"".join(chunks))
    except OSError as ex:
        raise FusionKernelException(f"Wrong file or file path: {path}") from ex


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        if size < 0 or self.offset + size > len(self.payload):
            raise FusionKernelException("Truncated weight file")
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, layout: struct.Struct) -> tuple:
        return layout.unpack(self.take(layout.size))


def load_weights(path: str) -> WeightStore:
    """Reads a store written by save_weights, reproducing every tensor bit-exactly."""
    try:
        with open(path, "rb") as file:
            payload = file.read()
    except OSError as ex:
        raise FusionKernelException(f"Wrong file or file path: {path}") from ex
    reader = _Reader(payload)
    if len(payload) < 4 or payload[:4] != WEIGHTS_MAGIC:
        raise FusionKernelException("Bad magic in weight file")
    _, version, count = reader.unpack(_HEADER)
    if version != WEIGHTS_VERSION:
        raise FusionKernelException(f"Unsupported weight file version: {version}")
    store = WeightStore(version=version)
    for _ in range(count):
        (name_len,) = reader.unpack(_NAME_LEN)
        try:
            name = reader.take(name_len).decode("ascii")
        except UnicodeDecodeError as ex:
            raise FusionKernelException("Invalid weight name encoding") from ex
        (rank,) = reader.unpack(_RANK)
        extents = struct.unpack(f"<{rank}I", reader.take(4 * rank))
        values = np.frombuffer(reader.take(8 * math.prod(extents)), dtype="<f8")
        store.add(name, values.astype(np.float64).reshape(extents))
    if reader.offset != len(payload):
        raise FusionKernelException("Unexpected trailing bytes in weight file")
    return store


def _join(prefix: str, key) -> str:
    return f"{prefix}.{key}" if prefix else str(key)


def flatten_weights(tree, prefix: str = "") -> "OrderedDict[str, Tensor]":
    """Maps every tensor leaf of a nested weights object to a dotted name.

    Dataclasses, dicts, lists and tuples are walked; ints, floats and strings
    are static configuration and are not stored.
    """
    flat = OrderedDict()
    if isinstance(tree, np.ndarray):
        flat[prefix] = tree
    elif dataclasses.is_dataclass(tree):
        for item in dataclasses.fields(tree):
            flat.update(flatten_weights(getattr(tree, item.name), _join(prefix, item.name)))
    elif isinstance(tree, dict):
        for key, value in tree.items():
            flat.update(flatten_weights(value, _join(prefix, key)))
    elif isinstance(tree, (list, tuple)):
        for index, value in enumerate(tree):
            flat.update(flatten_weights(value, _join(prefix, index)))
    return flat


def restore_weights(template, store: WeightStore, prefix: str = ""):
    """Rebuilds ``template`` with every tensor leaf read from ``store``."""
    if isinstance(template, np.ndarray):
        tensor = store[prefix]
        if tensor.shape != template.shape:
            raise FusionKernelException(
                f"Weight {prefix} has shape {tensor.shape}, expected {template.shape}")
        return tensor
    if dataclasses.is_dataclass(template):
        changes = {item.name: restore_weights(getattr(template, item.name), store,
                                              _join(prefix, item.name))
                   for item in dataclasses.fields(template)}
        return dataclasses.replace(template, **changes)
    if isinstance(template, dict):
        return {key: restore_weights(value, store, _join(prefix, key))
                for key, value in template.items()}
    if isinstance(template, (list, tuple)):
        return type(template)(restore_weights(value, store, _join(prefix, index))
                              for index, value in enumerate(template))
    return template


def store_from_weights(tree, prefix: str = "") -> WeightStore:
    """Flattens a weights object into a fresh store."""
    return WeightStore(flatten_weights(tree, prefix))


def parameter_count(tree) -> int:
    """Number of scalar parameters held by a weights object."""
    return int(sum(tensor.size for tensor in flatten_weights(tree).values()))
