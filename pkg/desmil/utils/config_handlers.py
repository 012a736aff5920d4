# -*- coding: utf-8 -*-
"""Layered run configurations: a base configuration patched by overrides (RFC 7396)."""
import itertools
import json
from typing import Iterator, Sequence, Tuple

import _jsonnet  # type: ignore


def json_merge_patch(target_json: str, patch_json: str) -> str:
    """Applies `patch_json` to `target_json` with JSON Merge Patch.

    Objects merge recursively, a `null` member deletes the key, and any other value (lists
    included) replaces the target's value.
    """
    snippet = "std.mergePatch({target}, {patch})".format(target=target_json, patch=patch_json)
    return _jsonnet.evaluate_snippet("merge_patch", snippet)


def _check_json(json_str: str, position: int) -> str:
    try:
        json.loads(json_str)
    except ValueError as e:
        raise ValueError(f"config document {position} is not valid JSON: {e}") from e
    return json_str


def merge_jsons_in_order(jsons: Sequence[str]) -> str:
    """Merges json documents left to right: the first is the base, each later one a patch."""
    if not jsons:
        raise ValueError("at least one config document is required")
    composite_json = _check_json(jsons[0], 0)
    for position, patch_json in enumerate(jsons[1:], start=1):
        composite_json = json_merge_patch(composite_json, _check_json(patch_json, position))
    return composite_json


def merge_config_dicts(base: dict, *overrides: dict) -> dict:
    merged = merge_jsons_in_order([json.dumps(base)] + [json.dumps(o) for o in overrides])
    return json.loads(merged)


def sweep_configs(
    base: dict, lambdas: Sequence[float], interests: Sequence[int]
) -> Iterator[Tuple[float, int, dict]]:
    """Yields `(lambda, c, config)` for the λ × c grid, λ-major, each merged into `base`."""
    for decorrelation_lambda, num_interests in itertools.product(lambdas, interests):
        yield decorrelation_lambda, num_interests, merge_config_dicts(
            base, {"decorrelation_lambda": decorrelation_lambda, "num_interests": num_interests}
        )
