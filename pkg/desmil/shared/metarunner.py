"""Train/evaluate loop shared by the training modes."""
from typing import Iterator, Optional


class AbstractMetarunner:
    """Interleaves training steps with periodic evaluation and patience-based stopping.

    Subclasses yield global step numbers from `yield_train_step` and report from `evaluate`
    whether the model improved. Evaluation runs every `eval_every_steps` steps (never when 0)
    and once more after the last step, unless that step was just evaluated. Training stops
    after `patience` evaluations in a row without improvement (never when 0), but not before
    `min_steps` steps have run.
    """

    def __init__(self, eval_every_steps: int, patience: int, min_steps: int = 0):
        if eval_every_steps < 0:
            raise ValueError(f"eval_every_steps must be >= 0, got {eval_every_steps}")
        if patience < 0:
            raise ValueError(f"patience must be >= 0, got {patience}")
        if min_steps < 0:
            raise ValueError(f"min_steps must be >= 0, got {min_steps}")
        self.eval_every_steps = eval_every_steps
        self.patience = patience
        self.min_steps = min_steps
        self.num_evals_since_improvement = 0
        self.last_eval_step: Optional[int] = None
        self._loop_started = False

    def yield_train_step(self) -> Iterator[int]:
        raise NotImplementedError()

    def evaluate(self, step: int) -> bool:
        raise NotImplementedError()

    def on_early_stop(self, step: int):
        pass

    def done_training(self):
        raise NotImplementedError()

    def returned_result(self):
        raise NotImplementedError()

    def should_evaluate(self, step: int) -> bool:
        return self.eval_every_steps > 0 and step % self.eval_every_steps == 0

    def should_stop(self, step: int) -> bool:
        if self.patience == 0 or step < self.min_steps:
            return False
        return self.num_evals_since_improvement >= self.patience

    def evaluate_at(self, step: int):
        if step == self.last_eval_step:
            return
        self.last_eval_step = step
        if self.evaluate(step):
            self.num_evals_since_improvement = 0
        else:
            self.num_evals_since_improvement += 1

    def run_train_loop(self):
        if self._loop_started:
            raise RuntimeError("run_train_loop can only be called once per metarunner")
        self._loop_started = True

        step = None
        for step in self.yield_train_step():
            if self.should_evaluate(step):
                self.evaluate_at(step)
            if self.should_stop(step):
                self.on_early_stop(step)
                break
        if step is None:
            raise RuntimeError("no training step was run; is the training split empty?")
        self.evaluate_at(step)

        self.done_training()
        return self.returned_result()
