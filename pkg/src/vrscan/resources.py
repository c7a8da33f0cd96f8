"""Loading of bundled data files (rules, tables, ontology) with path overrides."""
from __future__ import annotations

import json
import os
from importlib import resources

from .errors import ConfigError

CONFIG_DIR_ENV = "VRSCAN_CONFIG_DIR"


def load_json(name, path=None):
    """Load ``path`` if given, else ``$VRSCAN_CONFIG_DIR/name`` if it exists,
    else the copy bundled with the package."""
    if path is None:
        cfg_dir = os.environ.get(CONFIG_DIR_ENV)
        if cfg_dir and os.path.isfile(os.path.join(cfg_dir, name)):
            path = os.path.join(cfg_dir, name)
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        return json.loads(resources.files("vrscan.data").joinpath(name).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load {path or name}: {exc}") from exc


def read_data_text(package, name):
    return resources.files(package).joinpath(name).read_text(encoding="utf-8")
