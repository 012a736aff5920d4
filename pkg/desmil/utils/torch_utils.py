import copy
import hashlib
import os
from typing import Dict

import torch

CPU_DEVICE = torch.device("cpu")


def copy_state_dict(state_dict, target_device=None):
    copied_state_dict = copy.deepcopy(state_dict)
    if target_device is None:
        return copied_state_dict
    else:
        return {k: v.to(target_device) for k, v in copied_state_dict.items()}


def state_dict_fingerprint(state_dict: Dict[str, torch.Tensor]) -> str:
    """SHA-1 over the raw bytes of every tensor, in sorted key order."""
    hasher = hashlib.sha1()
    for k in sorted(state_dict):
        hasher.update(k.encode("utf-8"))
        hasher.update(state_dict[k].detach().cpu().contiguous().numpy().tobytes())
    return hasher.hexdigest()


def state_dicts_equal(state_dict1, state_dict2) -> bool:
    if state_dict1.keys() != state_dict2.keys():
        return False
    return all(torch.equal(state_dict1[k], state_dict2[k]) for k in state_dict1)


def safe_write_bytes(data: bytes, path, temp_path=None):
    if temp_path is None:
        temp_path = path + "._temp"
    with open(temp_path, "wb") as f:
        f.write(data)
    os.replace(temp_path, path)
