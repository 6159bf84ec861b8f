"""JSON Schemas (draft 2020-12) for every machine-readable output.

``OUTPUT_SCHEMAS`` covers what ``--format json`` prints on stdout, keyed by
subcommand; ``REPORT_SCHEMA`` covers the report files written by the
``experiment`` subcommand.  All documents carry ``schema_version``.
"""

from __future__ import annotations

SCHEMA_VERSION = 1

_DIALECT = "https://json-schema.org/draft/2020-12/schema"

_number = {"type": "number"}
_count = {"type": "integer", "minimum": 0}


def _envelope(command: str, props: dict, required: list[str]) -> dict:
    return {
        "$schema": _DIALECT,
        "type": "object",
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "command": {"const": command},
            **props,
        },
        "required": ["schema_version", "command", *required],
    }


_stats = {
    "type": "object",
    "properties": {
        "n": _count,
        "m": _count,
        "order": _count,
        "mode": {"enum": ["quantized", "exact_table"]},
        "c": _number,
        "eps": _number,
        "entropy": _number,
        "model_self_information": _number,
        "header_bits": _count,
        "model_bits": _count,
        "payload_bits": _count,
        "payload_block_bits": _count,
        "total_bits": _count,
        "budget_bits": _number,
        "budget_met": {"type": "boolean"},
    },
    "required": ["n", "m", "order", "mode", "entropy", "model_bits", "payload_bits",
                 "total_bits", "budget_bits", "budget_met"],
}

OUTPUT_SCHEMAS = {
    "entropy": _envelope(
        "entropy",
        {
            "input_mode": {"enum": ["raw", "text", "seq"]},
            "n": _count,
            "m": _count,
            "distinct": _count,
            "max_order": _count,
            "profile": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {"order": _count, "entropy": _number},
                    "required": ["order", "entropy"],
                },
            },
            "mapping": {"type": ["array", "null"], "items": {"type": "string"}},
        },
        ["input_mode", "n", "m", "distinct", "max_order", "profile", "mapping"],
    ),
    "compress": _envelope(
        "compress",
        {"output": {"type": "string"}, "input_mode": {"enum": ["raw", "seq"]}, "stats": _stats},
        ["output", "input_mode", "stats"],
    ),
    "decompress": _envelope(
        "decompress",
        {
            "output": {"type": "string"},
            "output_mode": {"enum": ["raw", "seq"]},
            "n": _count,
            "m": _count,
            "order": _count,
            "mode": {"enum": ["quantized", "exact_table"]},
        },
        ["output", "output_mode", "n", "m", "order", "mode"],
    ),
    "gen": _envelope(
        "gen",
        {
            "kind": {"enum": ["random", "debruijn", "champernowne", "copeland-erdos"]},
            "n": _count,
            "count": _count,
            "lengths": {"type": "array", "items": _count},
            "output": {"type": ["string", "null"]},
            "sequences": {"type": "array", "items": {"type": "array", "items": _count}},
        },
        ["kind", "n", "count", "lengths", "output"],
    ),
    "experiment": _envelope(
        "experiment",
        {
            "kind": {"enum": ["threshold", "dominance", "birthday", "chernoff", "scaling"]},
            "json_path": {"type": "string"},
            "csv_path": {"type": "string"},
            "points": _count,
        },
        ["kind", "json_path", "csv_path", "points"],
    ),
}

REPORT_SCHEMA = {
    "$schema": _DIALECT,
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": ["threshold", "dominance", "birthday", "chernoff", "scaling"]},
        "config": {"type": "object"},
        "points": {"type": "array", "items": {"type": "object"}},
        "formulas": {"type": "object"},
        "summary": {"type": "object"},
        "package_version": {"type": "string"},
    },
    "required": ["schema_version", "kind", "config", "points", "package_version"],
}
