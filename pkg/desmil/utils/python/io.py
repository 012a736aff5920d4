import csv
import json
import os
from typing import Iterable, List, Sequence

import pandas as pd


def read_file(path, mode="r", **kwargs):
    with open(path, mode=mode, **kwargs) as f:
        return f.read()


def write_file(data, path, mode="w", **kwargs):
    with open(path, mode=mode, **kwargs) as f:
        f.write(data)


def read_json(path):
    return json.loads(read_file(path))


def write_json(data, path):
    return write_file(json.dumps(data, indent=2), path)


def read_jsonl(path):
    # Manually open because .splitlines is different from iterating over lines
    ls = []
    with open(path, "r") as f:
        for line in f:
            ls.append(json.loads(line))
    return ls


def to_jsonl(data):
    return json.dumps(data).replace("\n", "")


def write_tsv_rows(rows: Iterable[Sequence], path, encoding="utf-8"):
    """Writes rows as tab-separated lines, each terminated by a newline (no header).

    Args:
        rows: iterable of row sequences; fields are converted with str().
        path: destination file path.
        encoding: file encoding.

    """
    df = pd.DataFrame([[str(field) for field in row] for row in rows])
    if df.empty:
        write_file("", path, encoding=encoding)
        return
    df.to_csv(
        path,
        sep="\t",
        header=False,
        index=False,
        encoding=encoding,
        lineterminator="\n",
        quoting=csv.QUOTE_NONE,
        escapechar="\\",
    )


def read_tsv_rows(path, encoding="utf-8") -> List[List[str]]:
    """Fields of every nonblank line, as strings."""
    try:
        df = pd.read_csv(
            path,
            sep="\t",
            header=None,
            dtype=str,
            encoding=encoding,
            keep_default_na=False,
            quoting=csv.QUOTE_NONE,
            escapechar="\\",
        )
    except pd.errors.EmptyDataError:
        return []
    return df.values.tolist()


def create_containing_folder(path):
    fol_path = os.path.split(path)[0]
    if fol_path:
        os.makedirs(fol_path, exist_ok=True)


def assert_exists(path):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
