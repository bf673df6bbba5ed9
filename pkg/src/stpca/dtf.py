"""DTF v1 tensor files and the labeled-dataset JSON sidecar.

A DTF v1 file is one JSON header line

    {"order": n, "shape": [d1, ..., dn], "dtype": "c128", "layout": "mode1-fastest"}

followed by the raw payload: little-endian interleaved (re, im) float64
pairs in mode-1-fastest order.  The byte layout is normative; golden tests
pin it.

The sidecar is a JSON object with exactly the keys
``{labels, true_features, scenario, spec, seed}``.

All writers are atomic (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Union

import numpy as np

from .synthdata import LabeledTensorDataset
from .tensor import DenseTensor

__all__ = [
    "write_dtf",
    "read_dtf",
    "write_sidecar",
    "read_sidecar",
    "write_dataset",
    "read_dataset",
    "atomic_write_bytes",
]

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dtf_bytes(tensor: DenseTensor) -> bytes:
    header = {
        "order": tensor.order,
        "shape": list(tensor.shape),
        "dtype": "c128",
        "layout": "mode1-fastest",
    }
    payload = np.ascontiguousarray(tensor.data.flatten(order="F")).astype("<c16").tobytes()
    return (json.dumps(header) + "\n").encode("ascii") + payload


def write_dtf(path: PathLike, tensor: DenseTensor) -> None:
    atomic_write_bytes(path, dtf_bytes(tensor))


def read_dtf(path: PathLike) -> DenseTensor:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        header = json.loads(header_line.decode("ascii"))
        for key in ("order", "shape", "dtype", "layout"):
            if key not in header:
                raise ValueError(f"DTF header missing key {key!r}")
        if header["dtype"] != "c128" or header["layout"] != "mode1-fastest":
            raise ValueError(f"unsupported DTF header {header}")
        shape = tuple(int(d) for d in header["shape"])
        if len(shape) != int(header["order"]):
            raise ValueError("DTF header order/shape mismatch")
        count = int(np.prod(shape))
        raw = fh.read()
    if len(raw) < 16 * count:
        raise ValueError(
            f"DTF payload truncated: expected {16 * count} bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<c16", count=count)
    return DenseTensor(data.reshape(shape, order="F"))


def sidecar_dict(dataset: LabeledTensorDataset) -> dict:
    return {
        "labels": [int(v) for v in dataset.labels],
        "true_features": [int(v) for v in dataset.true_features],
        "scenario": dataset.scenario,
        "spec": dataset.spec,
        "seed": int(dataset.spec.get("seed", 0)),
    }


def write_sidecar(path: PathLike, dataset: LabeledTensorDataset) -> None:
    payload = json.dumps(sidecar_dict(dataset), indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, payload.encode("ascii"))


def read_sidecar(path: PathLike) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        side = json.load(fh)
    for key in ("labels", "true_features", "scenario", "spec", "seed"):
        if key not in side:
            raise ValueError(f"sidecar missing key {key!r}")
    return side


def write_dataset(prefix: PathLike, dataset: LabeledTensorDataset) -> tuple[Path, Path]:
    """Write ``<prefix>.dtf``plus ``<prefix>.json``; returns both paths."""
    prefix = Path(prefix)
    dtf_path = prefix.with_suffix(".dtf")
    side_path = prefix.with_suffix(".json")
    write_dtf(dtf_path, dataset.tensor)
    write_sidecar(side_path, dataset)
    return dtf_path, side_path


def read_dataset(prefix: PathLike) -> LabeledTensorDataset:
    prefix = Path(prefix)
    tensor = read_dtf(prefix.with_suffix(".dtf"))
    side = read_sidecar(prefix.with_suffix(".json"))
    return LabeledTensorDataset(
        tensor=tensor,
        labels=np.asarray(side["labels"], dtype=np.int64),
        true_features=np.asarray(side["true_features"], dtype=np.int64),
        scenario=side["scenario"],
        spec=side["spec"],
    )
