"""Layer topology, parameter containers and the OGNP checkpoint format."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import ConfigurationError, VaultError

ACTIVATIONS = ("relu", "identity", "tanh")
KINDS = ("dense", "gru")

# Weights are drawn from U(-INIT_SCALE / sqrt(fan_in), INIT_SCALE / sqrt(fan_in)); biases start at 0.
INIT_SCALE = 1.0

CHECKPOINT_MAGIC = b"OGNP"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    activation: str = "identity"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigurationError(f"layer widths must be positive, got {self.in_dim}->{self.out_dim}")

    def shapes(self, index: int) -> dict[str, tuple[int, ...]]:
        """Tensor names and shapes for this layer when it sits at position ``index``.

        Dense weights are stored (out, in). GRU blocks stack the update, reset and
        candidate gates along the first axis in that order.
        """
        if self.kind == "dense":
            return {f"{index}.W": (self.out_dim, self.in_dim), f"{index}.b": (self.out_dim,)}
        h = self.out_dim
        return {
            f"{index}.Wx": (3 * h, self.in_dim),
            f"{index}.Wh": (3 * h, h),
            f"{index}.b": (3 * h,),
        }


Topology = tuple[LayerSpec, ...]


def dense(in_dim: int, out_dim: int, activation: str = "relu") -> LayerSpec:
    return LayerSpec("dense", in_dim, out_dim, activation)


def gru(in_dim: int, hidden: int) -> LayerSpec:
    return LayerSpec("gru", in_dim, hidden)


def mlp_topology(in_dim: int, hidden: tuple[int, ...] | list[int], out_dim: int,
                 out_activation: str = "identity") -> Topology:
    layers, prev = [], in_dim
    for width in hidden:
        layers.append(dense(prev, width, "relu"))
        prev = width
    layers.append(dense(prev, out_dim, out_activation))
    return tuple(layers)


def recurrent_topology(in_dim: int, linear: int, hidden: int, out_dim: int,
                       out_activation: str = "identity") -> Topology:
    """dense(ReLU) -> GRU -> dense head; the shape of every recurrent network in the baselines."""
    return (dense(in_dim, linear, "relu"), gru(linear, hidden), dense(hidden, out_dim, out_activation))


def validate_topology(topology: Topology) -> None:
    if not topology:
        raise ConfigurationError("empty topology")
    for i in range(1, len(topology)):
        if topology[i].in_dim != topology[i - 1].out_dim:
            raise ConfigurationError(
                f"layer {i} expects width {topology[i].in_dim}, previous layer emits {topology[i - 1].out_dim}"
            )


def parameter_count(topology: Topology) -> int:
    return sum(int(np.prod(s)) for i, layer in enumerate(topology) for s in layer.shapes(i).values())


@dataclass
class NetworkParams:
    topology: Topology
    tensors: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        self.topology = tuple(self.topology)
        validate_topology(self.topology)
        expected = {name: shape for i, layer in enumerate(self.topology) for name, shape in layer.shapes(i).items()}
        if set(expected) != set(self.tensors):
            raise ConfigurationError(f"tensor names {sorted(self.tensors)} do not match topology {sorted(expected)}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ConfigurationError(f"{name} has shape {self.tensors[name].shape}, topology needs {shape}")

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.tensors.values())).dtype

    def names(self) -> Iterator[str]:
        for i, layer in enumerate(self.topology):
            yield from layer.shapes(i)

    def map(self, fn) -> NetworkParams:
        return NetworkParams(self.topology, {k: fn(v) for k, v in self.tensors.items()})

    def astype(self, dtype) -> NetworkParams:
        return self.map(lambda v: v.astype(dtype))

    def copy(self) -> NetworkParams:
        return self.map(np.copy)

    def zeros_like(self) -> NetworkParams:
        return self.map(np.zeros_like)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.tensors[n].ravel() for n in self.names()])

    def with_flat(self, vector: np.ndarray) -> NetworkParams:
        out, offset = {}, 0
        for name in self.names():
            shape = self.tensors[name].shape
            size = int(np.prod(shape))
            out[name] = vector[offset:offset + size].reshape(shape).astype(self.dtype)
            offset += size
        return NetworkParams(self.topology, out)

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in self.names():
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.tensors[name]).tobytes())
        return h.hexdigest()


def init_params(topology: Topology, rng: np.random.Generator, dtype=np.float32) -> NetworkParams:
    topology = tuple(topology)
    validate_topology(topology)
    tensors = {}
    for i, layer in enumerate(topology):
        for name, shape in layer.shapes(i).items():
            if name.endswith(".b"):
                tensors[name] = np.zeros(shape, dtype=dtype)
            else:
                bound = INIT_SCALE / np.sqrt(shape[1])
                tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return NetworkParams(topology, tensors)


def same_topology(a: NetworkParams, b: NetworkParams) -> bool:
    return a.topology == b.topology


# -- checkpoint file -------------------------------------------------------------

_KIND_CODES = {k: i for i, k in enumerate(KINDS)}
_ACT_CODES = {a: i for i, a in enumerate(ACTIVATIONS)}


def params_to_bytes(params: NetworkParams) -> bytes:
    """Serialise as: magic, version u8, layer count u32, per layer (kind u8, activation u8,
    in u32, out u32), then every tensor in topology order as little-endian float32."""
    out = bytearray(CHECKPOINT_MAGIC)
    out += struct.pack("<BI", CHECKPOINT_VERSION, len(params.topology))
    for layer in params.topology:
        out += struct.pack("<BBII", _KIND_CODES[layer.kind], _ACT_CODES[layer.activation], layer.in_dim, layer.out_dim)
    for name in params.names():
        out += np.ascontiguousarray(params.tensors[name], dtype="<f4").tobytes()
    return bytes(out)


def params_from_bytes(blob: bytes) -> NetworkParams:
    if blob[:4] != CHECKPOINT_MAGIC:
        raise VaultError("bad_magic", "not an OGNP checkpoint")
    if len(blob) < 9:
        raise VaultError("truncated_body", "checkpoint header cut short")
    version, n_layers = struct.unpack_from("<BI", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise VaultError("unsupported_version", f"checkpoint version {version}")
    offset = 9
    kinds, acts = {v: k for k, v in _KIND_CODES.items()}, {v: k for k, v in _ACT_CODES.items()}
    layers = []
    for _ in range(n_layers):
        if offset + 10 > len(blob):
            raise VaultError("truncated_body", "topology descriptor cut short")
        kind, act, i, o = struct.unpack_from("<BBII", blob, offset)
        offset += 10
        if kind not in kinds or act not in acts:
            raise VaultError("invalid_header", "unknown layer code in checkpoint")
        layers.append(LayerSpec(kinds[kind], i, o, acts[act]))
    topology = tuple(layers)
    tensors = {}
    for idx, layer in enumerate(topology):
        for name, shape in layer.shapes(idx).items():
            nbytes = 4 * int(np.prod(shape))
            if offset + nbytes > len(blob):
                raise VaultError("truncated_body", f"tensor {name} cut short")
            tensors[name] = np.frombuffer(blob, dtype="<f4", count=nbytes // 4, offset=offset).reshape(shape).astype(np.float32)
            offset += nbytes
    if offset != len(blob):
        raise VaultError("count_mismatch", f"{len(blob) - offset} trailing bytes after last tensor")
    return NetworkParams(topology, tensors)


def save_params(path: str | Path, params: NetworkParams) -> None:
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path: str | Path) -> NetworkParams:
    return params_from_bytes(Path(path).read_bytes())
