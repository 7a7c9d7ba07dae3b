"""Serialise report models for standard output: JSON or `field,value` CSV."""

import csv
import io
import json
from typing import Any

from pydantic import BaseModel

from qkd_backend.errors import UsageError

FORMATS = ("json", "csv")


def _flatten(prefix: str, value: Any, out: dict[str, Any]) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, out)
    elif isinstance(value, list):
        if all(not isinstance(item, (dict, list)) for item in value):
            out[prefix] = " ".join(_scalar(item) for item in value)
        else:
            for i, item in enumerate(value):
                _flatten(f"{prefix}.{i}", item, out)
    else:
        out[prefix] = _scalar(value)


def _scalar(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def flatten(report: BaseModel) -> dict[str, Any]:
    out: dict[str, Any] = {}
    _flatten("", report.model_dump(mode="json"), out)
    return out


def to_json(report: BaseModel) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2) + "\n"


def to_csv(report: BaseModel) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["field", "value"])
    for key, value in flatten(report).items():
        writer.writerow([key, value])
    return buffer.getvalue()


def render(report: BaseModel, fmt: str = "json") -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    raise UsageError(f"Unknown output format {fmt!r}; expected one of {', '.join(FORMATS)}")
