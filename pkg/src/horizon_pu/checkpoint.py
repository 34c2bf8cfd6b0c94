"""Binary checkpoints for single nets, per-period net sets and MTPU models.

Layout::

    b"HZPU"                      magic
    uint32 LE                    format version
    uint32 LE                    header length in bytes
    header                       UTF-8 JSON, sorted keys, no whitespace
    parameter blocks             little-endian float32, net by net, layer by
                                 layer, weight matrix (fan_in x fan_out,
                                 row-major) then bias

Header keys: ``format_version``, ``kind`` (``dense`` | ``multi`` | ``mtpu``),
``seed``, ``epsilon``, ``T`` (``multi`` and ``mtpu`` only) and ``nets``, a list
of ``{"layer_dims": [...], "scalar_output": bool}``.  For ``mtpu`` the first
entry is the trunk and the remaining ``T`` are the heads in period order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .mtpu import MtpuModel
from .net import DenseNet

MAGIC = b"HZPU"
FORMAT_VERSION = 1
_LE_F32 = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: str
    nets: list[DenseNet]
    seed: int = 0
    epsilon: float = 1e-5

    @property
    def T(self) -> int | None:
        if self.kind == "mtpu":
            return len(self.nets) - 1
        if self.kind == "multi":
            return len(self.nets)
        return None

    def model(self) -> MtpuModel:
        if self.kind != "mtpu":
            raise CheckpointError(f"checkpoint holds {self.kind!r}, not an MTPU model")
        return MtpuModel(self.nets[0], self.nets[1:])

    @classmethod
    def from_mtpu(cls, model: MtpuModel, seed=0, epsilon=1e-5) -> "Checkpoint":
        return cls("mtpu", [model.trunk] + list(model.heads), seed, epsilon)


def dumps(ckpt: Checkpoint) -> bytes:
    if ckpt.kind not in ("dense", "multi", "mtpu"):
        raise CheckpointError(f"unknown checkpoint kind {ckpt.kind!r}")
    if ckpt.kind == "dense" and len(ckpt.nets) != 1:
        raise CheckpointError("a dense checkpoint holds exactly one network")
    header = {
        "format_version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "seed": int(ckpt.seed),
        "epsilon": float(ckpt.epsilon),
        "nets": [{"layer_dims": net.layer_dims, "scalar_output": net.scalar_output} for net in ckpt.nets],
    }
    if ckpt.T is not None:
        header["T"] = ckpt.T
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(head)), head]
    for net in ckpt.nets:
        for p in net.params():
            parts.append(np.ascontiguousarray(p, dtype=_LE_F32).tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> Checkpoint:
    if blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    offset = 12 + hlen
    nets = []
    for entry in header["nets"]:
        dims = entry["layer_dims"]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims, dims[1:]):
            for shape in ((fan_in, fan_out), (fan_out,)):
                count = int(np.prod(shape))
                end = offset + 4 * count
                if end > len(blob):
                    raise CheckpointError("truncated parameter block")
                arr = np.frombuffer(blob, dtype=_LE_F32, count=count, offset=offset).astype(np.float32).reshape(shape)
                (weights if len(shape) == 2 else biases).append(arr)
                offset = end
        nets.append(DenseNet(weights, biases, scalar_output=entry["scalar_output"]))
    if offset != len(blob):
        raise CheckpointError("trailing bytes after parameter blocks")
    ckpt = Checkpoint(header["kind"], nets, header.get("seed", 0), header.get("epsilon", 1e-5))
    if ckpt.T is not None and header.get("T") != ckpt.T:
        raise CheckpointError("header T does not match the stored networks")
    return ckpt


def save(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(ckpt))


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return loads(fh.read())
