import os

import pytest
import torch

import desmil.shared.initialization as initialization
import desmil.utils.zconf as zconf
from desmil.utils.python.io import read_json


@zconf.run_config
class RunConfiguration(zconf.RunConfig):
    out = zconf.attr(type=str, required=True)
    seed = zconf.attr(type=int, default=0)
    num_interests = zconf.attr(type=int, default=4)


def test_run_id_is_deterministic():
    manifest = {"mode": "train", "config": {"seed": 0, "num_interests": 4}}
    reordered = {"config": {"num_interests": 4, "seed": 0}, "mode": "train"}
    run_id = initialization.get_run_id(manifest)
    assert len(run_id) == 12
    assert run_id == initialization.get_run_id(reordered)
    assert run_id != initialization.get_run_id({"mode": "eval", "config": manifest["config"]})


def test_init_seed():
    assert initialization.init_seed(3, verbose=False) == 3
    first = torch.rand(2)
    initialization.init_seed(3, verbose=False)
    assert torch.equal(first, torch.rand(2))
    with pytest.raises(ValueError):
        initialization.init_seed(-1, verbose=False)


def test_torch_generator():
    a = torch.rand(3, generator=initialization.torch_generator(7))
    b = torch.rand(3, generator=initialization.torch_generator(7))
    assert torch.equal(a, b)


def test_quick_init(tmp_path):
    args = RunConfiguration(out=str(tmp_path), seed=2)
    quick_init_out = initialization.quick_init(args=args, mode="train", verbose=False)
    assert quick_init_out.seed == 2
    assert quick_init_out.run_dir == os.path.join(str(tmp_path), f"run_{quick_init_out.run_id}")
    manifest = read_json(os.path.join(quick_init_out.run_dir, "manifest.json"))
    assert manifest == {
        "mode": "train",
        "config": {"out": str(tmp_path), "seed": 2, "num_interests": 4},
        "run_id": quick_init_out.run_id,
    }
    with quick_init_out.log_writer.log_context():
        quick_init_out.log_writer.write_entry("split", {"num_items": 3})
    assert os.listdir(os.path.join(quick_init_out.run_dir, "logs"))

    again = initialization.quick_init(args=args, mode="train", verbose=False)
    assert again.run_id == quick_init_out.run_id
    other = initialization.quick_init(args=args.copy(), mode="sweep", verbose=False)
    assert other.run_dir != quick_init_out.run_dir
