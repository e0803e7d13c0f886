"""Deterministic JSON reports for the command line tools."""

from __future__ import annotations

import json
import time

from . import __version__

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "pebbletx-report",
    "title": "pebbletx command report",
    "type": "object",
    "required": ["command", "inputs", "result", "version", "config"],
    "properties": {
        "command": {"type": "string"},
        "inputs": {"type": "object"},
        "result": {"type": "object"},
        "version": {"type": "string"},
        "config": {"type": "object"},
        "timings": {
            "type": "object",
            "properties": {"seconds": {"type": "number"}},
        },
    },
    "additionalProperties": False,
}


def word_tokens(w):
    """Words serialize as arrays of symbol tokens so multi-character symbols
    survive the round trip."""
    return [l.token() if hasattr(l, "token") else str(l) for l in w]


def report(command, inputs, result, config=None, started=None,
           timings=True) -> dict:
    out = {
        "command": command,
        "inputs": inputs,
        "result": result,
        "version": __version__,
        "config": config or {},
    }
    if timings and started is not None:
        out["timings"] = {"seconds": round(time.perf_counter() - started, 6)}
    return out


def dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2)
