import numpy as np
import pytest

import desmil.data.core as data_core
import desmil.data.splits as splits


def _dataset(lengths):
    events = []
    for u, n in enumerate(lengths):
        for t in range(n):
            events.append((f"u{u:03d}", f"i{(u + t) % 13:02d}", t))
    return data_core.build_dataset(events)


def test_floor_fraction():
    assert splits.floor_fraction(0.29, 100) == 29
    assert splits.floor_fraction(0.5, 15) == 7
    assert splits.floor_fraction(0.1, 9) == 0


def test_split_classic_is_disjoint_partition():
    ds = _dataset([5] * 20)
    train, valid, test = splits.split_classic(ds, ratios=(0.8, 0.1, 0.1), seed=3)
    assert (train.num_users, valid.num_users, test.num_users) == (16, 2, 2)
    all_users = train.users() + valid.users() + test.users()
    assert sorted(all_users) == ds.users()
    assert len(set(all_users)) == ds.num_users


def test_split_classic_depends_on_seed_only():
    ds = _dataset([4] * 30)
    first = splits.split_classic(ds, seed=1)
    second = splits.split_classic(ds, seed=1)
    assert [d.users() for d in first] == [d.users() for d in second]
    other = splits.split_classic(ds, seed=2)
    assert [d.users() for d in first] != [d.users() for d in other]


@pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.5), (1.0, 0.0, 0.0), (0.8, 0.2)])
def test_split_classic_bad_ratios(ratios):
    with pytest.raises(ValueError):
        splits.split_classic(_dataset([3] * 10), ratios=ratios)


def test_split_classic_too_few_users():
    with pytest.raises(ValueError):
        splits.split_classic(_dataset([3, 3]))


def test_split_ood_cuts():
    ds = _dataset([20, 5])
    split = splits.split_ood(ds, z=0.5)
    assert split.train.sequences[0] == ds.sequences[0][:10]
    assert split.valid.sequences[0] == ds.sequences[0][10:12]
    assert split.test_inputs.sequences[0] == ds.sequences[0][:10]
    assert split.test_targets.sequences[0] == ds.sequences[0][10:]
    # short users train only
    assert split.train.sequences[1] == ds.sequences[1]
    assert 1 not in split.valid.sequences
    assert 1 not in split.test_inputs.sequences
    assert 1 not in split.test_targets.sequences


def test_split_ood_larger_z_shortens_targets():
    ds = _dataset([30])
    assert len(splits.split_ood(ds, z=0.5).test_targets.sequences[0]) == 15
    assert len(splits.split_ood(ds, z=0.9).test_targets.sequences[0]) == 3


@pytest.mark.parametrize("z", [0.4, 0.95, 1.0])
def test_split_ood_rejects_z(z):
    with pytest.raises(ValueError):
        splits.split_ood(_dataset([20]), z=z)


def test_holdout_split():
    ds = _dataset([10, 1])
    inputs, targets = splits.holdout_split(ds, ratio=0.8)
    assert inputs.sequences[0] == ds.sequences[0][:8]
    assert targets.sequences[0] == ds.sequences[0][8:]
    assert inputs.sequences[1] == ds.sequences[1]
    assert 1 not in targets.sequences


def test_ood_bundle_valid_inputs_are_train_heads():
    ds = _dataset([20, 12])
    bundle = splits.ood_bundle(ds, z=0.7)
    for user in bundle.valid_targets.users():
        assert bundle.valid_inputs.sequences[user] == bundle.train.sequences[user]
    assert len(bundle.test_inputs.sequences[0]) == 14


def test_shift_bundle(tmp_path):
    train_path = tmp_path / "train.tsv"
    shifted_path = tmp_path / "shifted.tsv"
    train_path.write_text("".join(f"u1\ta{t}\t{t}\n" for t in range(10)))
    shifted_path.write_text("u1\tb0\t1\nu1\tb1\t2\nu2\tb2\t1\n")
    train_ds, shifted_ds = data_core.ingest_many([str(train_path), str(shifted_path)])
    bundle = splits.shift_bundle(train_ds, shifted_ds, holdout_ratio=0.8)
    assert len(bundle.train.sequences[0]) == 8
    assert len(bundle.valid_targets.sequences[0]) == 2
    assert bundle.test_inputs.sequences[0] == train_ds.sequences[0]
    assert bundle.test_targets.users() == [0]
    assert [bundle.test_targets.item_id(i) for i in bundle.test_targets.sequences[0]] == [
        "b0",
        "b1",
    ]


def test_split_dir_io(tmp_path):
    bundle = splits.classic_bundle(_dataset([6] * 12), seed=0)
    splits.write_split_dir(bundle, str(tmp_path / "split"), manifest={"mode": "classic"})
    for name in splits.BUNDLE_FILES:
        assert (tmp_path / "split" / f"{name}.tsv").exists()
    reloaded = splits.read_split_dir(str(tmp_path / "split"))
    assert reloaded.num_items == bundle.num_items
    assert reloaded.train.num_events == bundle.train.num_events
    pairs = splits.pair_users(reloaded.test_inputs, reloaded.test_targets)
    assert len(pairs) == bundle.test_targets.num_users


@pytest.mark.parametrize("length, z, num_inputs", [(10, 0.5, 5), (20, 0.9, 18)])
def test_split_ood_input_target_counts(length, z, num_inputs):
    ds = _dataset([length])
    split = splits.split_ood(ds, z=z)
    assert len(split.test_inputs.sequences[0]) == num_inputs
    assert len(split.test_targets.sequences[0]) == length - num_inputs


def test_split_ood_short_users_train_only():
    rng = np.random.default_rng(0)
    lengths = rng.integers(1, 30, size=1000).tolist()
    ds = _dataset(lengths)
    split = splits.split_ood(ds, z=0.5)
    held_out = set(split.valid.users()) | set(split.test_inputs.users())
    held_out |= set(split.test_targets.users())
    for user, n in enumerate(lengths):
        if n < 10:
            assert user not in held_out
            assert split.train.sequences[user] == ds.sequences[user]
        else:
            assert user in split.valid.sequences and user in split.test_targets.sequences


@pytest.mark.parametrize("z", [0.5, 0.6, 0.7, 0.8, 0.9])
def test_split_ood_time_order(z):
    ds = _dataset(list(range(10, 40)))
    split = splits.split_ood(ds, z=z)
    for user in split.valid.users():
        train_end = max(split.train.timestamps[user])
        valid_times = split.valid.timestamps[user]
        target_start = min(split.test_targets.timestamps[user])
        assert train_end < min(valid_times)
        assert train_end < target_start
        # at z = 0.5 the targets start where the valid window starts
        if z >= 0.6:
            assert max(valid_times) < target_start
        else:
            assert min(valid_times) == target_start
