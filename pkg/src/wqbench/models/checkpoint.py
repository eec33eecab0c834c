"""Named-tensor checkpoint container.

Layout: 4-byte magic, little-endian u32 format version, u64 header
length, UTF-8 JSON header (spec, seed, normalization stats, parameter
names and shapes in payload order), then raw little-endian float64
parameter payloads.  Loading restores bit-identical parameters.
"""

import dataclasses
import json
import struct

import numpy as np

from .. import ndcore as nd
from ..dataio.normalize import NormStats
from ..errors import ContractError
from .spec import ModelSpec
from .build import TrainedModel

_MAGIC = b"WQBM"
_VERSION = 1


def save_checkpoint(model, path):
    names = sorted(model.parameters)
    header = {
        "spec": dataclasses.asdict(model.spec),
        "seed": int(model.seed),
        "normalization": (
            model.normalization_stats.to_dict()
            if model.normalization_stats is not None
            else None
        ),
        "params": [
            {"name": n, "shape": list(model.parameters[n].data.shape)}
            for n in names
        ],
        "epoch_losses": [float(x) for x in model.epoch_losses],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            data = np.ascontiguousarray(
                model.parameters[n].data, dtype="<f8"
            )
            fh.write(data.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ContractError("not a model checkpoint: bad magic")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ContractError(
                "unsupported checkpoint version %d" % version
            )
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        spec = ModelSpec(**header["spec"])
        params = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise ContractError("truncated checkpoint payload")
            data = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
            params[entry["name"]] = nd.Tensor(data, requires_grad=True)
    stats = (
        NormStats.from_dict(header["normalization"])
        if header["normalization"] is not None
        else None
    )
    model = TrainedModel(
        spec=spec,
        parameters=params,
        seed=header["seed"],
        normalization_stats=stats,
    )
    model.epoch_losses = [float(x) for x in header.get("epoch_losses", [])]
    return model
