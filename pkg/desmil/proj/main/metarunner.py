import os
from dataclasses import dataclass
from typing import Dict, Optional

import desmil.proj.main.runner as desmil_runner
from desmil.evaluate.core import MetricsReport
from desmil.modeling.checkpoint import save_checkpoint
from desmil.proj.main.components.outputs import TraceWriter
from desmil.shared.constants import EARLY_STOP_METRIC
from desmil.shared.metarunner import AbstractMetarunner
from desmil.utils.python.datastructures import ExtendedDataClassMixin
from desmil.utils.torch_utils import CPU_DEVICE, copy_state_dict
from desmil.utils.zlog import BaseZLogger, PRINT_LOGGER

BEST_CHECKPOINT_NAME = "best"


@dataclass
class ValState(ExtendedDataClassMixin):
    """Validation metrics of the model as it stood after `train_state.global_steps` steps."""

    score: float
    metrics: Dict
    train_state: desmil_runner.TrainState

    @classmethod
    def from_report(cls, report: MetricsReport, train_state: desmil_runner.TrainState):
        return cls(
            score=float(report[EARLY_STOP_METRIC]),
            metrics=report.to_dict(),
            train_state=train_state.new(),
        )

    def improves_on(self, other: Optional["ValState"]) -> bool:
        return other is None or self.score > other.score

    def to_dict(self):
        return {
            "score": self.score,
            "metrics": dict(self.metrics),
            "train_state": self.train_state.to_dict(),
        }


class DesmilMetarunner(AbstractMetarunner):
    """Validation Recall@50 drives early stopping and best-state tracking.

    Every improvement is checkpointed to `<output_dir>/best` (when an output dir is given) and
    the best parameters are loaded back into the model when training ends. The trace row of an
    evaluated step receives that evaluation's Recall@50.
    """

    def __init__(
        self,
        runner: desmil_runner.DesmilRunner,
        eval_every_steps: int,
        no_improvements_for_n_evals: int,
        output_dir: Optional[str],
        trace_writer: TraceWriter,
        verbose: bool = True,
        save_best_model: bool = True,
        load_best_model: bool = True,
        log_writer: BaseZLogger = PRINT_LOGGER,
        min_train_steps: int = 0,
    ):
        super().__init__(
            eval_every_steps=eval_every_steps,
            patience=no_improvements_for_n_evals,
            min_steps=min_train_steps,
        )
        self.runner = runner
        self.model = runner.model
        self.output_dir = output_dir
        self.trace_writer = trace_writer
        self.verbose = verbose
        self.save_best_model = save_best_model and output_dir is not None
        self.load_best_model = load_best_model
        self.log_writer = log_writer

        self.train_state: Optional[desmil_runner.TrainState] = None
        self.best_val_state: Optional[ValState] = None
        self.best_state_dict = None
        self.val_state_history = []

    @property
    def best_checkpoint_prefix(self) -> Optional[str]:
        if self.output_dir is None:
            return None
        return os.path.join(self.output_dir, BEST_CHECKPOINT_NAME)

    def yield_train_step(self):
        for train_state, record in self.runner.run_train_context(verbose=self.verbose):
            self.train_state = train_state
            self.trace_writer.add(record)
            yield train_state.global_steps

    def evaluate(self, step: int) -> bool:
        report = self.runner.run_val()
        self.trace_writer.last().recall50 = report["recall50"]
        val_state = ValState.from_report(report, self.train_state)
        self.val_state_history.append(val_state)
        self.log_writer.write_entry("train_val", val_state.to_dict())

        improved = val_state.improves_on(self.best_val_state)
        if improved:
            self._record_best(val_state)
        self.log_writer.write_entry(
            "early_stopping",
            {
                "num_evals_since_improvement": (
                    0 if improved else self.num_evals_since_improvement + 1
                ),
                "train_state": self.train_state.to_dict(),
            },
        )
        self.log_writer.flush()
        return improved

    def _record_best(self, val_state: ValState):
        self.best_val_state = val_state
        self.log_writer.write_entry("train_val_best", val_state.to_dict())
        if self.save_best_model:
            save_checkpoint(
                self.model.get_params(),
                path_prefix=self.best_checkpoint_prefix,
                metadata={"val_state": val_state.to_dict()},
            )
        self.best_state_dict = copy_state_dict(self.model.state_dict(), target_device=CPU_DEVICE)

    def on_early_stop(self, step: int):
        self.log_writer.write_entry(
            "early_stopping",
            {"message": "early_stopped", "train_state": self.train_state.to_dict()},
        )
        self.log_writer.flush()

    def done_training(self):
        self.trace_writer.flush()
        if self.load_best_model and self.best_state_dict is not None:
            if self.verbose:
                print("Loading Best")
            self.model.load_state_dict(copy_state_dict(self.best_state_dict))

    def returned_result(self):
        return {
            "best_val_state": self.best_val_state,
            "val_state_history": self.val_state_history,
        }
