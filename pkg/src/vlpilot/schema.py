"""Tiny hand-rolled JSON schema walker.

Config files are strict: unknown keys are rejected and every error names the
exact field path, which matters far more for robot configs than schema
expressiveness does.
"""
from __future__ import annotations

from typing import Any

from .errors import SchemaError


def expect_object(value: Any, path: str, required: set[str], optional: set[str] | None = None) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected an object, got {type(value).__name__}")
    allowed = required | (optional or set())
    unknown = set(value) - allowed
    if unknown:
        raise SchemaError(path, f"unknown key(s): {', '.join(sorted(unknown))}")
    missing = required - set(value)
    if missing:
        raise SchemaError(path, f"missing required key(s): {', '.join(sorted(missing))}")
    return value


def expect_str(obj: dict, key: str, path: str, allow_empty: bool = False) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(f"{path}.{key}", f"expected a string, got {type(value).__name__}")
    if not allow_empty and not value.strip():
        raise SchemaError(f"{path}.{key}", "must not be empty")
    return value


def expect_number(obj: dict, key: str, path: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}.{key}", f"expected a number, got {type(value).__name__}")
    return float(value)


def expect_int(obj: dict, key: str, path: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}.{key}", f"expected an integer, got {type(value).__name__}")
    return value


def expect_bool(obj: dict, key: str, path: str) -> bool:
    value = obj[key]
    if not isinstance(value, bool):
        raise SchemaError(f"{path}.{key}", f"expected a boolean, got {type(value).__name__}")
    return value


def expect_list(obj: dict, key: str, path: str) -> list:
    value = obj[key]
    if not isinstance(value, list):
        raise SchemaError(f"{path}.{key}", f"expected an array, got {type(value).__name__}")
    return value


def expect_number_list(obj: dict, key: str, path: str, length: int) -> list[float]:
    value = expect_list(obj, key, path)
    if len(value) != length:
        raise SchemaError(f"{path}.{key}", f"expected {length} numbers, got {len(value)}")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise SchemaError(f"{path}.{key}[{i}]", "expected a number")
        out.append(float(item))
    return out
