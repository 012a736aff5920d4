"""Command line entry point: `python -m desmil.proj.main.runscript <mode> [flags]`.

Modes: split, synth, train, eval, sweep, dump-weights. Every mode accepts `--config PATH`
(a JSON object of flag defaults); explicit flags override it.
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional

import pandas as pd

import desmil.data.core as data_core
import desmil.data.splits as splits
import desmil.modeling.model_setup as model_setup
import desmil.proj.main.components.container_setup as container_setup
import desmil.proj.main.components.evaluate as desmil_evaluate
import desmil.proj.main.metarunner as desmil_metarunner
import desmil.proj.main.runner as desmil_runner
import desmil.shared.initialization as initialization
import desmil.synth.core as synth
import desmil.utils.python.io as py_io
import desmil.utils.zconf as zconf
from desmil.decorrelate.kernels import KernelConfig
from desmil.decorrelate.weights import SampleWeightTable
from desmil.evaluate.core import MetricsReport, evaluate_model
from desmil.modeling.checkpoint import checkpoint_exists, load_checkpoint
from desmil.modeling.primary import DesmilModel, ModelParams
from desmil.proj.main.components.outputs import TraceRecord, TraceWriter, plateau_mean
from desmil.proj.main.metarunner import BEST_CHECKPOINT_NAME
from desmil.shared.constants import LAMBDA_GRID, NUM_INTERESTS_GRID, PHASE, SPLIT_MODE
from desmil.utils.config_handlers import sweep_configs
from desmil.utils.display import text_histogram
from desmil.utils.python.logic import parse_csv_list
from desmil.utils.zlog import VOID_LOGGER, BaseZLogger

logger = logging.getLogger(__name__)

WEIGHT_COLLAPSE_THRESHOLD = 0.05
WEIGHT_HISTOGRAM_FILE_NAME = "weight_histogram.txt"


def _csv(values) -> str:
    return ",".join(str(v) for v in values)


@zconf.run_config
class SplitConfiguration(zconf.RunConfig):
    # === Required parameters === #
    input_path = zconf.attr(type=str, required=True)
    out = zconf.attr(type=str, required=True)

    # === Split parameters === #
    split_mode = zconf.attr(
        type=str,
        default=SPLIT_MODE.CLASSIC,
        opt_string="--mode",
        choices=[SPLIT_MODE.CLASSIC, SPLIT_MODE.OOD, SPLIT_MODE.SHIFT],
    )
    z = zconf.attr(type=float, default=0.5)
    ratios = zconf.attr(type=str, default=_csv(splits.DEFAULT_CLASSIC_RATIOS))
    holdout_ratio = zconf.attr(type=float, default=splits.DEFAULT_HOLDOUT_RATIO)
    shifted_path = zconf.attr(type=str, default=None)
    vocab_path = zconf.attr(type=str, default=None)
    seed = zconf.attr(type=int, default=0)


@zconf.run_config
class SynthConfiguration(zconf.RunConfig):
    out = zconf.attr(type=str, required=True)
    num_users = zconf.attr(type=int, default=2000)
    num_items = zconf.attr(type=int, default=1000)
    num_clusters = zconf.attr(type=int, default=4)
    min_seq_len = zconf.attr(type=int, default=20)
    max_seq_len = zconf.attr(type=int, default=40)
    rho_train = zconf.attr(type=float, default=0.9)
    rho_test = zconf.attr(type=float, default=0.1)
    primary_prob = zconf.attr(type=float, default=0.5)
    seed = zconf.attr(type=int, default=0)


@zconf.run_config
class TrainConfiguration(zconf.RunConfig):
    # === Required parameters === #
    split_dir = zconf.attr(type=str, required=True)
    out = zconf.attr(type=str, required=True)

    # === Model parameters === #
    embedding_dim = zconf.attr(type=int, default=64)
    num_interests = zconf.attr(type=int, default=4)
    hidden_factor = zconf.attr(type=int, default=4)
    max_length = zconf.attr(type=int, default=20)

    # === Decorrelation parameters === #
    decorrelation_lambda = zconf.attr(type=float, default=1.0, opt_string="--lambda")
    eta_w = zconf.attr(type=float, default=0.01)
    use_sample_weights = zconf.attr(type=bool, default=True)
    hsic_sigma = zconf.attr(type=str, default="median")
    hsic_axis = zconf.attr(type=str, default="embedding", choices=["embedding", "batch"])

    # === Running Setup === #
    batch_size = zconf.attr(type=int, default=128)
    eval_batch_size = zconf.attr(type=int, default=256)
    learning_rate = zconf.attr(type=float, default=1e-3)
    num_negatives = zconf.attr(type=int, default=10)
    patience = zconf.attr(type=int, default=5)
    min_epochs = zconf.attr(type=int, default=0)
    max_epochs = zconf.attr(type=int, default=20)
    max_steps = zconf.attr(type=int, default=-1)
    eval_every = zconf.attr(type=int, default=500)
    expand_targets = zconf.attr(action="store_true")
    seed = zconf.attr(type=int, default=0)
    seeds = zconf.attr(type=int, default=1)
    debug_checks = zconf.attr(action="store_true")
    verbose = zconf.attr(action="store_true")

    def _post_init(self):
        if self.seeds < 1:
            raise ValueError(f"seeds must be >= 1, got {self.seeds}")

    def get_train_config(self, seed: Optional[int] = None) -> model_setup.TrainConfig:
        fields = {k: getattr(self, k) for k in model_setup.TrainConfig.get_fields()}
        train_config = model_setup.TrainConfig.from_dict(fields)
        return train_config if seed is None else train_config.new(seed=seed)

    def get_kernel_config(self) -> KernelConfig:
        return KernelConfig.from_string(self.hsic_sigma)


@zconf.run_config
class SweepConfiguration(TrainConfiguration):
    lambdas = zconf.attr(type=str, default=_csv(LAMBDA_GRID))
    interests = zconf.attr(type=str, default=_csv(NUM_INTERESTS_GRID))


@zconf.run_config
class EvalConfiguration(zconf.RunConfig):
    split_dir = zconf.attr(type=str, required=True)
    run_dir = zconf.attr(type=str, default=None)
    checkpoint_path = zconf.attr(type=str, default=None)
    out = zconf.attr(type=str, default=None)
    phase = zconf.attr(type=str, default=PHASE.TEST, choices=[PHASE.VAL, PHASE.TEST])
    eval_batch_size = zconf.attr(type=int, default=256)
    expand_targets = zconf.attr(action="store_true")
    seed = zconf.attr(type=int, default=0)
    seeds = zconf.attr(type=int, default=1)

    def _post_init(self):
        if (self.run_dir is None) == (self.checkpoint_path is None):
            raise ValueError("exactly one of --run_dir and --checkpoint_path is required")


@zconf.run_config
class DumpWeightsConfiguration(zconf.RunConfig):
    weights_path = zconf.attr(type=str, required=True)
    bins = zconf.attr(type=int, default=20)
    width = zconf.attr(type=int, default=50)
    out = zconf.attr(type=str, default=None)


@dataclass
class TrainResult:
    params: ModelParams
    weight_table: SampleWeightTable
    traces: List[TraceRecord]
    best_val_state: Optional[desmil_metarunner.ValState]
    val_state_history: List[desmil_metarunner.ValState]


def setup_runner(
    container: container_setup.DataContainer,
    train_config: model_setup.TrainConfig,
    kernel_config: KernelConfig,
    log_writer: BaseZLogger = VOID_LOGGER,
) -> desmil_runner.DesmilRunner:
    """Builds the model, optimizer, weight table and runner for one training run."""
    train_config.validate()
    if train_config.num_interests < 2:
        logger.warning(
            "num_interests=%d: interest dependence is identically 0 and the weights never move",
            train_config.num_interests,
        )
    model = model_setup.setup_model(train_config, num_items=container.num_items)
    optimizer = model_setup.create_optimizer(model, learning_rate=train_config.learning_rate)
    return desmil_runner.DesmilRunner(
        model=model,
        optimizer=optimizer,
        train_examples=container.train_examples,
        val_examples=container.val_examples,
        weight_table=SampleWeightTable.create(len(container.train_examples)),
        train_config=train_config,
        kernel_config=kernel_config,
        log_writer=log_writer,
    )


def train(
    datasets: splits.SplitBundle,
    train_config: model_setup.TrainConfig,
    kernel_config: Optional[KernelConfig] = None,
    output_dir: Optional[str] = None,
    log_writer: BaseZLogger = VOID_LOGGER,
    expand_targets: bool = False,
    verbose: bool = False,
) -> TrainResult:
    """Alternating weighted training with early stopping on validation Recall@50.

    With `output_dir`, writes the best checkpoint (`best.*`), `trace.csv`, `weights.tsv` and
    `val_metrics.json` there.

    Returns:
        TrainResult holding the parameters of the best validation step.

    """
    container = container_setup.create_data_container(
        datasets, max_length=train_config.max_length, expand_targets=expand_targets
    )
    return train_container(
        container=container,
        train_config=train_config,
        kernel_config=kernel_config or KernelConfig(),
        output_dir=output_dir,
        log_writer=log_writer,
        verbose=verbose,
    )


def train_container(
    container: container_setup.DataContainer,
    train_config: model_setup.TrainConfig,
    kernel_config: KernelConfig,
    output_dir: Optional[str] = None,
    log_writer: BaseZLogger = VOID_LOGGER,
    verbose: bool = False,
) -> TrainResult:
    runner = setup_runner(
        container=container,
        train_config=train_config,
        kernel_config=kernel_config,
        log_writer=log_writer,
    )
    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)
    trace_writer = TraceWriter(
        path=os.path.join(output_dir, "trace.csv") if output_dir is not None else None
    )
    metarunner = desmil_metarunner.DesmilMetarunner(
        runner=runner,
        eval_every_steps=train_config.eval_every,
        no_improvements_for_n_evals=train_config.patience,
        min_train_steps=train_config.min_epochs * runner.steps_per_epoch,
        output_dir=output_dir,
        trace_writer=trace_writer,
        verbose=verbose,
        log_writer=log_writer,
    )
    result = metarunner.run_train_loop()
    if output_dir is not None:
        desmil_evaluate.write_weight_dump(runner.weight_table, output_dir)
        desmil_evaluate.write_val_results(result["best_val_state"], output_dir, verbose=verbose)
    return TrainResult(
        params=runner.model.get_params(),
        weight_table=runner.weight_table,
        traces=trace_writer.history,
        best_val_state=result["best_val_state"],
        val_state_history=result["val_state_history"],
    )


def seed_dir(run_dir: str, seed: int) -> str:
    return os.path.join(run_dir, f"seed_{seed}")


def mode_manifest_name(mode: str) -> str:
    """Manifest file of a mode that writes next to an existing run instead of into its own."""
    return f"{mode.replace('-', '_')}_{initialization.MANIFEST_FILE_NAME}"


# === Modes === #


def run_split(args: SplitConfiguration) -> str:
    if args.split_mode == SPLIT_MODE.OOD:
        splits.check_z(args.z)
    item_vocab = data_core.read_vocab(args.vocab_path) if args.vocab_path else None
    if args.split_mode == SPLIT_MODE.CLASSIC:
        ds = data_core.ingest(args.input_path, item_vocab=item_vocab)
        bundle = splits.classic_bundle(
            ds,
            ratios=tuple(parse_csv_list(args.ratios, cast=float)),
            seed=args.seed,
            holdout_ratio=args.holdout_ratio,
        )
    elif args.split_mode == SPLIT_MODE.OOD:
        ds = data_core.ingest(args.input_path, item_vocab=item_vocab)
        bundle = splits.ood_bundle(ds, z=args.z)
    elif args.split_mode == SPLIT_MODE.SHIFT:
        if args.shifted_path is None:
            raise ValueError("--mode shift requires --shifted_path")
        train_ds, shifted_ds = data_core.ingest_many(
            [args.input_path, args.shifted_path], item_vocab=item_vocab
        )
        bundle = splits.shift_bundle(train_ds, shifted_ds, holdout_ratio=args.holdout_ratio)
    else:
        raise KeyError(args.split_mode)

    quick_init_out = initialization.quick_init(args=args, mode="split", verbose=False)
    with quick_init_out.log_writer.log_context():
        manifest = initialization.build_manifest(args, mode="split")
        manifest["run_id"] = quick_init_out.run_id
        manifest["split"] = {
            "mode": args.split_mode,
            "z": args.z if args.split_mode == SPLIT_MODE.OOD else None,
            "seed": args.seed,
            "num_items": bundle.num_items,
            "num_users": {name: ds.num_users for name, ds in bundle.as_dict().items()},
            "num_events": {name: ds.num_events for name, ds in bundle.as_dict().items()},
        }
        splits.write_split_dir(bundle, quick_init_out.run_dir, manifest=manifest)
        quick_init_out.log_writer.write_entry("split", manifest["split"])
    print(quick_init_out.run_dir)
    return quick_init_out.run_dir


def run_synth(args: SynthConfiguration) -> str:
    synth_config = synth.SynthConfig(
        **{k: getattr(args, k) for k in synth.SynthConfig.get_fields()}
    )
    synth_config.validate()
    quick_init_out = initialization.quick_init(args=args, mode="synth", verbose=False)
    with quick_init_out.log_writer.log_context():
        result = synth.generate(synth_config)
        manifest = initialization.build_manifest(args, mode="synth")
        manifest["run_id"] = quick_init_out.run_id
        synth.write_synth_outputs(result, quick_init_out.run_dir, manifest=manifest)
    print(quick_init_out.run_dir)
    return quick_init_out.run_dir


def run_train(args: TrainConfiguration) -> str:
    quick_init_out = initialization.quick_init(args=args, mode="train", verbose=args.verbose)
    with quick_init_out.log_writer.log_context():
        container = container_setup.create_data_container_from_dir(
            args.split_dir, max_length=args.max_length, expand_targets=args.expand_targets
        )
        for seed in range(args.seed, args.seed + args.seeds):
            output_dir = seed_dir(quick_init_out.run_dir, seed)
            train_container(
                container=container,
                train_config=args.get_train_config(seed=seed),
                kernel_config=args.get_kernel_config(),
                output_dir=output_dir,
                log_writer=quick_init_out.log_writer,
                verbose=args.verbose,
            )
            best_prefix = os.path.join(output_dir, BEST_CHECKPOINT_NAME)
            if not checkpoint_exists(best_prefix):
                raise RuntimeError(f"no best checkpoint was saved under {output_dir}")
    print(quick_init_out.run_dir)
    return quick_init_out.run_dir


def get_eval_examples(container: container_setup.DataContainer, phase: str):
    if phase == PHASE.VAL:
        return container.val_examples
    elif phase == PHASE.TEST:
        return container.test_examples
    else:
        raise KeyError(phase)


def evaluate_checkpoint(
    checkpoint_prefix: str, split_dir: str, phase=PHASE.TEST, batch_size=256, expand_targets=False
) -> MetricsReport:
    params, _ = load_checkpoint(checkpoint_prefix)
    container = container_setup.create_data_container_from_dir(
        split_dir, max_length=params.max_length, expand_targets=expand_targets
    )
    if params.num_items != container.num_items:
        raise RuntimeError(
            f"checkpoint has {params.num_items} items, split {split_dir} has {container.num_items}"
        )
    return evaluate_model(
        DesmilModel(params), get_eval_examples(container, phase), batch_size=batch_size
    )


def run_eval(args: EvalConfiguration) -> Dict[str, MetricsReport]:
    if args.checkpoint_path is not None:
        labeled_prefixes = [(args.seed, args.checkpoint_path)]
        default_out = os.path.dirname(os.path.abspath(args.checkpoint_path))
    else:
        labeled_prefixes = [
            (seed, os.path.join(seed_dir(args.run_dir, seed), BEST_CHECKPOINT_NAME))
            for seed in range(args.seed, args.seed + args.seeds)
        ]
        default_out = args.run_dir
    labeled_reports = [
        (
            seed,
            evaluate_checkpoint(
                prefix,
                split_dir=args.split_dir,
                phase=args.phase,
                batch_size=args.eval_batch_size,
                expand_targets=args.expand_targets,
            ),
        )
        for seed, prefix in labeled_prefixes
    ]
    if len(labeled_reports) > 1:
        labeled_reports.append(("mean", MetricsReport.mean([r for _, r in labeled_reports])))
    out_dir = args.out if args.out is not None else default_out
    initialization.write_manifest(
        args, mode="eval", output_dir=out_dir, file_name=mode_manifest_name("eval")
    )
    desmil_evaluate.write_metrics(
        labeled_reports, os.path.join(out_dir, desmil_evaluate.METRICS_FILE_NAME)
    )
    return {str(label): report for label, report in labeled_reports}


def run_sweep(args: SweepConfiguration) -> str:
    quick_init_out = initialization.quick_init(args=args, mode="sweep", verbose=args.verbose)
    rows = []
    with quick_init_out.log_writer.log_context():
        container = container_setup.create_data_container_from_dir(
            args.split_dir, max_length=args.max_length, expand_targets=args.expand_targets
        )
        grid = sweep_configs(
            args.get_train_config().to_dict(),
            lambdas=parse_csv_list(args.lambdas, cast=float),
            interests=parse_csv_list(args.interests, cast=int),
        )
        for decorrelation_lambda, num_interests, config_dict in grid:
            train_config = model_setup.TrainConfig.from_dict(config_dict)
            point_dir = os.path.join(
                quick_init_out.run_dir, f"lambda_{decorrelation_lambda}__c_{num_interests}"
            )
            result = train_container(
                container=container,
                train_config=train_config,
                kernel_config=args.get_kernel_config(),
                output_dir=point_dir,
                log_writer=quick_init_out.log_writer,
                verbose=args.verbose,
            )
            report = evaluate_model(
                DesmilModel(result.params),
                container.test_examples,
                batch_size=train_config.eval_batch_size,
            )
            row = {"lambda": decorrelation_lambda, "c": num_interests}
            row.update(report.to_dict())
            row["hsic_plateau"] = plateau_mean(result.traces)
            row["weights_below_0.05"] = result.weight_table.fraction_below(
                WEIGHT_COLLAPSE_THRESHOLD
            )
            quick_init_out.log_writer.write_entry("sweep_point", row)
            rows.append(row)
            pd.DataFrame(rows).to_csv(
                os.path.join(quick_init_out.run_dir, "sweep.csv"), index=False
            )
    print(quick_init_out.run_dir)
    return quick_init_out.run_dir


def run_dump_weights(args: DumpWeightsConfiguration) -> str:
    table = SampleWeightTable.read_tsv(args.weights_path)
    counts, edges = table.histogram(bins=args.bins)
    text = "\n".join(
        [
            text_histogram(counts.tolist(), edges.tolist(), width=args.width),
            f"samples: {len(table)}",
            "below {}: {:.2%}".format(
                WEIGHT_COLLAPSE_THRESHOLD, table.fraction_below(WEIGHT_COLLAPSE_THRESHOLD)
            ),
        ]
    )
    print(text)
    out_dir = args.out
    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(args.weights_path))
    initialization.write_manifest(
        args, mode="dump-weights", output_dir=out_dir, file_name=mode_manifest_name("dump-weights")
    )
    py_io.write_file(text + "\n", os.path.join(out_dir, WEIGHT_HISTOGRAM_FILE_NAME))
    return text


MODES = {
    "split": (SplitConfiguration, run_split),
    "synth": (SynthConfiguration, run_synth),
    "train": (TrainConfiguration, run_train),
    "eval": (EvalConfiguration, run_eval),
    "sweep": (SweepConfiguration, run_sweep),
    "dump-weights": (DumpWeightsConfiguration, run_dump_weights),
}


def main(cl_args=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    mode, cl_args = zconf.get_mode_and_cl_args(cl_args)
    if mode not in MODES:
        raise zconf.ModeLookupError(mode)
    config_class, run_func = MODES[mode]
    return run_func(config_class.default_run_cli(cl_args=cl_args, prog=f"desmil {mode}"))


if __name__ == "__main__":
    main()
