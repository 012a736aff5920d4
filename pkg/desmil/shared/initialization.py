import hashlib
import json
import os
import random
import time
from dataclasses import dataclass
from typing import Any

import numpy as np
import torch

import desmil.utils.python.io as py_io
import desmil.utils.zlog as zlog

MANIFEST_FILE_NAME = "manifest.json"


@dataclass
class QuickInitContainer:
    run_dir: str
    run_id: str
    seed: int
    log_writer: Any


def quick_init(args, mode: str, verbose=True) -> QuickInitContainer:
    """Seeds randomness, prepares the run directory, starts the log writer, writes the manifest.

    Args:
        args (RunConfig): resolved configuration of the command being run; must carry
            `out` (output root) and `seed`.
        mode (str): CLI mode name, recorded in the manifest.
        verbose (bool): whether to print the resolved configuration.

    Returns:
        QuickInitContainer with the run directory, run id, seed and log writer.

    """
    if verbose:
        print_args(args)
    seed = init_seed(given_seed=args.seed, verbose=verbose)
    run_id = get_run_id(build_manifest(args=args, mode=mode))
    run_dir = init_output_dir(os.path.join(args.out, f"run_{run_id}"))
    write_manifest(args=args, mode=mode, output_dir=run_dir)
    log_writer = init_log_writer(output_dir=run_dir)
    return QuickInitContainer(run_dir=run_dir, run_id=run_id, seed=seed, log_writer=log_writer)


def init_seed(given_seed, verbose=True):
    """Seeds python, numpy and torch from one integer and returns it.

    Every component that draws random numbers additionally builds its own generator from the
    configured seed, so results do not depend on global state; the global seeding only guards
    third-party code.

    Args:
        given_seed (int): random seed (must be non-negative).
        verbose: whether to print random seed.

    Returns:
        int: value used to initialize random seeds.

    """
    if given_seed < 0:
        raise ValueError(f"seed must be non-negative, got {given_seed}")
    random.seed(given_seed)
    np.random.seed(given_seed)
    torch.manual_seed(given_seed)
    if verbose:
        print("Using seed: {}".format(given_seed))
    return given_seed


def torch_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


def build_manifest(args, mode: str) -> dict:
    return {"mode": mode, "config": args.to_dict()}


def get_run_id(manifest: dict) -> str:
    """First 12 hex digits of the SHA-1 of the manifest's canonical JSON."""
    canonical = json.dumps(manifest, sort_keys=True, default=str)
    return hashlib.sha1(canonical.encode("utf-8")).hexdigest()[:12]


def write_manifest(args, mode: str, output_dir: str, file_name=MANIFEST_FILE_NAME) -> dict:
    """Writes the resolved configuration, mode and run id of a command to `output_dir`."""
    manifest = build_manifest(args=args, mode=mode)
    manifest["run_id"] = get_run_id(manifest)
    py_io.write_json(manifest, os.path.join(init_output_dir(output_dir), file_name))
    return manifest


def init_output_dir(output_dir):
    os.makedirs(output_dir, exist_ok=True)
    return output_dir


def init_log_writer(output_dir):
    log_dir = os.path.join(output_dir, "logs", str(int(time.time())))
    return zlog.ZBufferedLogger(log_dir, overwrite=True)


def print_args(args):
    for k, v in args.to_dict().items():
        print("  {}: {}".format(k, v))
