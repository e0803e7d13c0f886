"""Pebble transducer toolkit: execution, transition behaviors, boundedness
and growth-degree decisions, and pebble minimization."""

__version__ = "0.1.0"

from .core import (CallSym, Letter, NestedTransducer, OnePebbleTransducer,
                   parse_word, validate, word)
from .semantics import RunResult, output_length, run1, run_nested

__all__ = [
    "CallSym", "Letter", "NestedTransducer", "OnePebbleTransducer",
    "RunResult", "output_length", "parse_word", "run1", "run_nested",
    "validate", "word", "__version__",
]
