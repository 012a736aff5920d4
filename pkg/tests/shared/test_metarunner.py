import pytest

from desmil.shared.metarunner import AbstractMetarunner


class ScriptedMetarunner(AbstractMetarunner):
    def __init__(self, num_steps, improvements, eval_every_steps, patience, min_steps=0):
        super().__init__(eval_every_steps=eval_every_steps, patience=patience, min_steps=min_steps)
        self.num_steps = num_steps
        self.improvements = list(improvements)
        self.evaluated = []
        self.stopped_at = None
        self.done = False

    def yield_train_step(self):
        yield from range(1, self.num_steps + 1)

    def evaluate(self, step):
        self.evaluated.append(step)
        return self.improvements.pop(0) if self.improvements else False

    def on_early_stop(self, step):
        self.stopped_at = step

    def done_training(self):
        self.done = True

    def returned_result(self):
        return self.evaluated


def _scripted(num_steps, improvements=(), eval_every_steps=1, patience=0):
    return ScriptedMetarunner(num_steps, improvements, eval_every_steps, patience)


def test_evaluates_on_cadence_and_at_the_end():
    metarunner = _scripted(num_steps=7, improvements=[True] * 3, eval_every_steps=3)
    assert metarunner.run_train_loop() == [3, 6, 7]
    assert metarunner.done
    assert metarunner.stopped_at is None


def test_no_duplicate_final_evaluation():
    metarunner = _scripted(num_steps=6, improvements=[True] * 2, eval_every_steps=3)
    assert metarunner.run_train_loop() == [3, 6]


def test_patience_counts_evaluations():
    metarunner = ScriptedMetarunner(
        num_steps=20, improvements=[True, False, True, False, False], eval_every_steps=2, patience=2
    )
    assert metarunner.run_train_loop() == [2, 4, 6, 8, 10]
    assert metarunner.stopped_at == 10
    assert metarunner.num_evals_since_improvement == 2


def test_never_evaluating_except_at_the_end():
    metarunner = _scripted(num_steps=4, eval_every_steps=0, patience=1)
    assert metarunner.run_train_loop() == [4]


def test_single_use_and_empty_runs():
    metarunner = _scripted(num_steps=2)
    metarunner.run_train_loop()
    with pytest.raises(RuntimeError):
        metarunner.run_train_loop()
    with pytest.raises(RuntimeError):
        _scripted(num_steps=0).run_train_loop()
    with pytest.raises(ValueError):
        _scripted(num_steps=1, eval_every_steps=-1)


def test_min_steps_holds_off_early_stopping():
    metarunner = ScriptedMetarunner(
        num_steps=20, improvements=[True], eval_every_steps=2, patience=1, min_steps=9
    )
    assert metarunner.run_train_loop() == [2, 4, 6, 8, 10]
    assert metarunner.stopped_at == 10
    with pytest.raises(ValueError):
        AbstractMetarunner(eval_every_steps=1, patience=1, min_steps=-1)
