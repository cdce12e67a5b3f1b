"""Thin JSON and JSON-lines file helpers.

Every writer is deterministic (sorted keys, fixed separators) so files
produced from the same data are byte-identical.
"""
from __future__ import annotations

import json
from pathlib import Path


def write_jsonl(path: "str | Path", rows: "list[dict]") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path: "str | Path") -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: bad JSON line: {e}") from e
    return rows


def write_json(path: "str | Path", obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: "str | Path") -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
