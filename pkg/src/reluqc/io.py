"""JSON ingestion for systems, networks and matrices.

Errors name the file and the JSON pointer of the offending field so that a
malformed fixture can be fixed without guesswork.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any


class InputError(ValueError):
    def __init__(self, pointer: str, message: str, path: str | None = None):
        self.pointer = pointer or "/"
        self.message = message
        self.path = path
        super().__init__(self._render())

    def _render(self) -> str:
        loc = f"{self.path}#{self.pointer}" if self.path else self.pointer
        return f"{loc}: {self.message}"

    def with_path(self, path: str) -> "InputError":
        return InputError(self.pointer, self.message, path)


def load_json(path: str | Path) -> Any:
    path = str(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError("/", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", path) from None
    except OSError as exc:
        raise InputError("/", f"cannot read file: {exc.strerror}", path) from None


def require(obj: dict, key: str, where: str = ""):
    if not isinstance(obj, dict):
        raise InputError(where, "expected a JSON object")
    if key not in obj:
        raise InputError(f"{where}/{key}", "required field is missing")
    return obj[key]
