"""DEX bytecode parsing and queries."""

from .model import DexProgram, MethodSig  # noqa: F401
from .parser import parse_dex  # noqa: F401
