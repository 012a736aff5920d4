import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import torch

import desmil.evaluate.core as evaluate
import desmil.utils.torch_utils as torch_utils
from desmil.data.batching import Batch, EvalExample, TrainingExample, batch_iter
from desmil.decorrelate.kernels import KernelConfig
from desmil.decorrelate.weights import (
    SampleWeightTable,
    mean_batch_dependence,
    update_sample_weights,
)
from desmil.modeling.model_setup import TrainConfig, adam_step
from desmil.modeling.primary import DesmilModel
from desmil.proj.main.components.outputs import TraceRecord
from desmil.shared.constants import DEFAULT_CUTOFFS
from desmil.shared.initialization import torch_generator
from desmil.utils.display import maybe_tqdm
from desmil.utils.python.datastructures import ExtendedDataClassMixin
from desmil.utils.zlog import BaseZLogger, VOID_LOGGER


class NonFiniteLossError(RuntimeError):
    def __init__(self, epoch: int, batch_index: int, step: int, loss: float):
        self.epoch = epoch
        self.batch_index = batch_index
        self.step = step
        super().__init__(
            f"non-finite loss {loss} at step {step} (epoch {epoch}, batch {batch_index})"
        )


@dataclass
class TrainState(ExtendedDataClassMixin):
    global_steps: int = 0
    epoch: int = 0
    batch_index: int = 0

    def step(self):
        self.global_steps += 1
        self.batch_index += 1

    def next_epoch(self):
        self.epoch += 1
        self.batch_index = 0


class DesmilRunner:
    """Runs the alternating updates of one training batch, and validation.

    Per batch: one Adam step on the model parameters with the sample weights held fixed, then
    one weight step with the model parameters held fixed.
    """

    def __init__(
        self,
        model: DesmilModel,
        optimizer: torch.optim.Optimizer,
        train_examples: List[TrainingExample],
        val_examples: List[EvalExample],
        weight_table: SampleWeightTable,
        train_config: TrainConfig,
        kernel_config: KernelConfig,
        log_writer: BaseZLogger = VOID_LOGGER,
    ):
        self.model = model
        self.optimizer = optimizer
        self.train_examples = train_examples
        self.val_examples = val_examples
        self.weight_table = weight_table
        self.train_config = train_config
        self.kernel_config = kernel_config
        self.log_writer = log_writer
        self.generator = torch_generator(train_config.seed)

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(len(self.train_examples) / self.train_config.batch_size)

    @property
    def total_steps(self) -> int:
        total = self.steps_per_epoch * self.train_config.max_epochs
        if self.train_config.max_steps >= 0:
            total = min(total, self.train_config.max_steps)
        return total

    def run_train(self) -> List[TraceRecord]:
        return [record for _, record in self.run_train_context(verbose=False)]

    def run_train_context(self, verbose=True) -> Iterator[Tuple[TrainState, TraceRecord]]:
        train_state = TrainState()
        cfg = self.train_config
        progress = iter(maybe_tqdm(range(self.total_steps), desc="Training", verbose=verbose))
        for epoch in range(cfg.max_epochs):
            for batch in batch_iter(
                self.train_examples,
                batch_size=cfg.batch_size,
                seed=cfg.seed,
                epoch=epoch,
                max_length=self.model.max_length,
                pad_index=self.model.pad_index,
            ):
                if train_state.global_steps >= self.total_steps:
                    return
                record = self.run_train_step(batch=batch, train_state=train_state)
                next(progress, None)
                yield train_state, record
            train_state.next_epoch()

    def run_train_step(self, batch: Batch, train_state: TrainState) -> TraceRecord:
        cfg = self.train_config
        self.model.train()
        step = train_state.global_steps + 1
        weights = (
            self.weight_table.get(batch.sample_ids.numpy()) if cfg.use_sample_weights else None
        )
        if cfg.debug_checks:
            weights_before = self.weight_table.w.copy()

        # theta step, weights fixed
        model_output = self.model(
            batch=batch,
            generator=self.generator,
            weights=weights,
            num_negatives=cfg.num_negatives,
        )
        loss_val = model_output.loss.item()
        if not math.isfinite(loss_val):
            raise NonFiniteLossError(
                epoch=train_state.epoch,
                batch_index=train_state.batch_index,
                step=step,
                loss=loss_val,
            )
        model_output.loss.backward()
        adam_step(self.model, self.optimizer)
        hsic = mean_batch_dependence(
            model_output.interests, cfg=self.kernel_config, hsic_axis=cfg.hsic_axis
        )
        if cfg.debug_checks:
            if not (self.weight_table.w == weights_before).all():
                raise RuntimeError(f"sample weights changed during the parameter step {step}")
            params_fingerprint = torch_utils.state_dict_fingerprint(self.model.state_dict())

        # weight step, theta fixed
        if cfg.use_sample_weights:
            with torch.no_grad():
                M = self.model.interests(batch.prefixes, batch.valid_lengths)
            update = update_sample_weights(
                sample_ids=batch.sample_ids,
                M=M,
                table=self.weight_table,
                decorrelation_lambda=cfg.decorrelation_lambda,
                cfg=self.kernel_config,
                eta_w=cfg.eta_w,
                step=step,
                hsic_axis=cfg.hsic_axis,
            )
            self.log_writer.write_entry(
                "weight_update",
                {
                    "global_step": step,
                    "mean_weight": float(update.weights_after.mean()),
                    "num_clipped": int(update.clipped.sum()),
                    "descended": update.descended(),
                },
            )
        if cfg.debug_checks:
            if torch_utils.state_dict_fingerprint(self.model.state_dict()) != params_fingerprint:
                raise RuntimeError(f"model parameters changed during the weight step {step}")

        train_state.step()
        per_sample_loss = model_output.per_sample_loss.detach().mean().item()
        self.log_writer.write_entry(
            "loss_train",
            {
                "epoch": train_state.epoch,
                "global_step": train_state.global_steps,
                "loss_val": loss_val,
                "loss_unweighted": per_sample_loss,
                "hsic": hsic,
            },
        )
        return TraceRecord(step=train_state.global_steps, loss=per_sample_loss, hsic=hsic)

    def run_val(
        self, examples: Optional[List[EvalExample]] = None, cutoffs=DEFAULT_CUTOFFS, verbose=False
    ) -> evaluate.MetricsReport:
        return evaluate.evaluate_model(
            model=self.model,
            eval_examples=self.val_examples if examples is None else examples,
            cutoffs=cutoffs,
            batch_size=self.train_config.eval_batch_size,
            verbose=verbose,
        )
