"""Flat binary parameter checkpoints.

`<prefix>.bin` holds V, P_pos, W1, W2 as little-endian float64, concatenated in that order.
`<prefix>.manifest` has one `name<TAB>shape<TAB>byte_offset` line per tensor, shape written
as `rowsxcols`. `<prefix>.metadata.json` carries free-form run metadata.
"""
import os
from typing import Tuple

import numpy as np
import torch

import desmil.utils.numerics as numerics
import desmil.utils.python.io as py_io
from desmil.modeling.primary import PARAM_NAMES, ModelParams
from desmil.utils.torch_utils import safe_write_bytes

LE_FLOAT64 = np.dtype("<f8")


def checkpoint_paths(path_prefix: str):
    return {
        "bin": f"{path_prefix}.bin",
        "manifest": f"{path_prefix}.manifest",
        "metadata": f"{path_prefix}.metadata.json",
    }


def save_checkpoint(params: ModelParams, path_prefix: str, metadata: dict = None):
    paths = checkpoint_paths(path_prefix)
    py_io.create_containing_folder(paths["bin"])
    chunks, manifest_lines = [], []
    offset = 0
    for name in PARAM_NAMES:
        array = getattr(params, name).detach().cpu().numpy().astype(LE_FLOAT64)
        raw = array.tobytes(order="C")
        shape = "x".join(str(s) for s in array.shape)
        manifest_lines.append(f"{name}\t{shape}\t{offset}\n")
        chunks.append(raw)
        offset += len(raw)
    safe_write_bytes(b"".join(chunks), paths["bin"])
    safe_write_bytes("".join(manifest_lines).encode("utf-8"), paths["manifest"])
    py_io.write_json(metadata or {}, paths["metadata"])


def load_checkpoint(path_prefix: str) -> Tuple[ModelParams, dict]:
    paths = checkpoint_paths(path_prefix)
    for path in paths.values():
        py_io.assert_exists(path)
    with open(paths["bin"], "rb") as f:
        raw = f.read()
    tensors = {}
    for row in py_io.read_tsv_rows(paths["manifest"]):
        name, shape_str, offset_str = row
        shape = tuple(int(s) for s in shape_str.split("x"))
        offset = int(offset_str)
        count = int(np.prod(shape))
        if offset + count * LE_FLOAT64.itemsize > len(raw):
            raise RuntimeError(f"{paths['bin']} is truncated at tensor {name}")
        array = np.frombuffer(raw, dtype=LE_FLOAT64, count=count, offset=offset).reshape(shape)
        tensors[name] = torch.tensor(array.astype(np.float64), dtype=numerics.DTYPE)
    if set(tensors) != set(PARAM_NAMES):
        raise RuntimeError(f"{paths['manifest']} lists {sorted(tensors)}, expected {PARAM_NAMES}")
    params = ModelParams(**tensors)
    params.validate()
    return params, py_io.read_json(paths["metadata"])


def checkpoint_exists(path_prefix: str) -> bool:
    return all(os.path.exists(path) for path in checkpoint_paths(path_prefix).values())
