"""CFG construction and source-to-sink taint propagation."""

from .cfg import Cfg, build_cfg  # noqa: F401
from .config import TaintConfig  # noqa: F401
from .engine import TaintPath, analyze, confirm_reachable, propagate  # noqa: F401
