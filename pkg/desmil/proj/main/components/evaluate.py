import json
import os
from typing import Sequence, Tuple, Union

import desmil.utils.python.io as py_io
from desmil.decorrelate.weights import SampleWeightTable
from desmil.evaluate.core import MetricsReport

WEIGHTS_FILE_NAME = "weights.tsv"
METRICS_FILE_NAME = "metrics.jsonl"


def write_val_results(best_val_state, output_dir, verbose=True):
    results = best_val_state.to_dict() if best_val_state is not None else {}
    if verbose:
        print(json.dumps(results, indent=2))
    py_io.write_json(data=results, path=os.path.join(output_dir, "val_metrics.json"))


def write_weight_dump(weight_table: SampleWeightTable, output_dir) -> str:
    path = os.path.join(output_dir, WEIGHTS_FILE_NAME)
    weight_table.dump_tsv(path)
    return path


def metrics_line(report: MetricsReport, seed: Union[int, str]) -> str:
    """Report keys in their fixed order, followed by the seed label."""
    row = report.to_dict()
    row["seed"] = seed
    return json.dumps(row)


def write_metrics(
    labeled_reports: Sequence[Tuple[Union[int, str], MetricsReport]], path, verbose=True
):
    lines = [metrics_line(report, seed) for seed, report in labeled_reports]
    if verbose:
        for line in lines:
            print(line)
    py_io.create_containing_folder(path)
    py_io.write_file("".join(line + "\n" for line in lines), path)
