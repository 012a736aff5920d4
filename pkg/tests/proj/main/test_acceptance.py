import numpy as np
import pytest

import desmil.data.splits as splits
import desmil.modeling.model_setup as model_setup
import desmil.synth.core as synth
from desmil.evaluate.core import evaluate_model
from desmil.modeling.primary import DesmilModel
from desmil.proj.main.components.container_setup import create_data_container
from desmil.proj.main.components.outputs import plateau_mean
from desmil.proj.main.runscript import WEIGHT_COLLAPSE_THRESHOLD, train

ACCEPTANCE_ETA_W = 1.0


def _shift_bundle(seed):
    result = synth.generate(synth.SynthConfig(seed=seed))
    return splits.shift_bundle(result.train, result.test)


def _train_config(**kwargs):
    defaults = dict(
        embedding_dim=32,
        num_interests=4,
        batch_size=128,
        max_length=20,
        eta_w=ACCEPTANCE_ETA_W,
        # an updated weight first enters the loss one epoch later
        min_epochs=2,
        max_epochs=3,
        eval_every=100,
        patience=3,
    )
    defaults.update(kwargs)
    return model_setup.TrainConfig(**defaults)


@pytest.mark.slow
def test_weights_do_not_collapse_on_synthetic_data():
    result = train(_shift_bundle(seed=0), _train_config())
    w = result.weight_table.w
    assert w.min() >= 0.0 and w.max() <= 1.0
    assert np.median(w) < 0.99
    assert result.weight_table.fraction_below(WEIGHT_COLLAPSE_THRESHOLD) < 0.05
    assert np.median(w) > 0.5


@pytest.mark.slow
def test_decorrelation_helps_under_shift():
    recalls = {0.0: [], 1.0: []}
    plateaus = {0.0: [], 1.0: []}
    for seed in range(5):
        bundle = _shift_bundle(seed)
        container = create_data_container(bundle, max_length=20)
        for decorrelation_lambda in [0.0, 1.0]:
            result = train(
                bundle, _train_config(seed=seed, decorrelation_lambda=decorrelation_lambda)
            )
            if decorrelation_lambda > 0:
                assert np.median(result.weight_table.w) < 0.99
            report = evaluate_model(DesmilModel(result.params), container.test_examples)
            recalls[decorrelation_lambda].append(report["recall50"])
            plateaus[decorrelation_lambda].append(plateau_mean(result.traces))
    assert np.mean(recalls[1.0]) >= np.mean(recalls[0.0])
    assert sum(p1 < p0 for p0, p1 in zip(plateaus[0.0], plateaus[1.0])) >= 4
