"""attrs-based run configurations whose fields double as command line flags.

A field declared with `zconf.attr(...)` becomes the flag `--<field>` (plus an optional alias
given as `opt_string`). Values resolve as: explicit flag, else the JSON file passed with
`--config`, else the field default. Fields without a default are required unless the config
file provides them.
"""
import argparse
import copy as copylib
import json
import pathlib
import shlex
import sys
from typing import Any, Dict, Optional, Tuple

import attr

from desmil.utils.python.io import read_json

CONFIG_FLAG = "--config"


def _parse_bool(x: str) -> bool:
    if x not in ("True", "False"):
        raise argparse.ArgumentTypeError(f"expected True or False, got {x!r}")
    return x == "True"


def argparse_attr(default=attr.NOTHING, converter=None, opt_string=None, **argparse_kwargs):
    """Declares a config field; `argparse_kwargs` go to `ArgumentParser.add_argument`."""
    if opt_string is None:
        aliases = []
    elif isinstance(opt_string, str):
        aliases = [opt_string]
    else:
        aliases = list(opt_string)

    argparse_kwargs.pop("required", None)
    if argparse_kwargs.get("type") is bool:
        argparse_kwargs["type"] = _parse_bool
    if argparse_kwargs.get("action") == "store_true":
        default = False

    return attr.ib(
        default=default,
        converter=converter,
        metadata={"aliases": aliases, "argparse_kwargs": argparse_kwargs},
        kw_only=True,
    )


def add_config_arguments(parser, config_class, file_defaults: Optional[dict] = None):
    """Registers one flag per field of `config_class` on `parser`."""
    file_defaults = file_defaults or {}
    for field in config_class.__attrs_attrs__:
        if "argparse_kwargs" not in field.metadata:
            continue
        kwargs = dict(field.metadata["argparse_kwargs"])
        if field.name in file_defaults:
            kwargs["default"] = file_defaults[field.name]
        elif field.default is attr.NOTHING:
            kwargs["required"] = True
        else:
            kwargs["default"] = field.default
        flags = [f"--{field.name}"] + field.metadata["aliases"]
        parser.add_argument(*flags, dest=field.name, **kwargs)


def read_config_file(config_class, path: str) -> dict:
    """JSON object of field defaults; unknown keys are an error."""
    file_defaults = read_json(path)
    if not isinstance(file_defaults, dict):
        raise RuntimeError(f"{path} must hold a JSON object")
    unknown = set(file_defaults) - set(config_class.get_attr_dict())
    if unknown:
        raise RuntimeError(f"Unknown keys in {path}: {sorted(unknown)}")
    return file_defaults


class RunConfig:
    @classmethod
    def run_cli(cls, cl_args=None, prog=None, description=None):
        """Builds a config from flags, honoring an optional `--config PATH` JSON file.

        Precedence: explicit flags > config file > attribute defaults.
        """
        pre_parser = argparse.ArgumentParser(add_help=False)
        pre_parser.add_argument(CONFIG_FLAG, type=str, default=None)
        config_path = pre_parser.parse_known_args(cl_args)[0].config
        file_defaults = read_config_file(cls, config_path) if config_path is not None else {}

        parser = argparse.ArgumentParser(prog=prog, description=description)
        parser.add_argument(CONFIG_FLAG, type=str, default=None, help="JSON config file")
        add_config_arguments(parser, cls, file_defaults=file_defaults)
        parsed = vars(parser.parse_args(cl_args))
        parsed.pop("config")
        return cls(**parsed)

    @classmethod
    def run_shlex(cls, string: str):
        return cls.run_cli(cl_args=shlex.split(string.strip()))

    @classmethod
    def default_run_cli(cls, cl_args=None, prog=None, description=None):
        return cls.run_cli(cl_args=cl_args, prog=prog, description=description)

    @classmethod
    def get_attr_dict(cls) -> Dict[str, Any]:
        # noinspection PyUnresolvedReferences
        return {field.name: field for field in cls.__attrs_attrs__}

    @classmethod
    def from_dict(cls, dictionary):
        # noinspection PyArgumentList
        return cls(**dictionary)

    @classmethod
    def from_json(cls, json_string):
        return cls.from_dict(json.loads(json_string))

    @classmethod
    def from_json_path(cls, json_path):
        return cls.from_dict(read_json(json_path))

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.get_attr_dict()}

    def to_json(self):
        serialized_dict = {
            k: str(v) if isinstance(v, pathlib.Path) else v for k, v in self.to_dict().items()
        }
        return json.dumps(serialized_dict, indent=2)

    def copy(self):
        return copylib.deepcopy(self)

    def _post_init(self):
        pass

    def __attrs_post_init__(self):
        self._post_init()


def run_config(cls):
    return attr.s(cls)


def get_mode_and_cl_args(cl_args=None) -> Tuple[str, list]:
    """Splits `<mode> [flags...]`; the mode is the first argument."""
    if cl_args is None:
        cl_args = sys.argv[1:]
    if not cl_args:
        raise ModeLookupError("the first argument must be a mode")
    return cl_args[0], list(cl_args[1:])


class ModeLookupError(KeyError):
    pass
