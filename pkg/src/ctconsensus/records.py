"""Self-describing JSON result records.

The canonical bytes of a record omit its wall-time, so two runs with the same
configuration can be compared byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def _default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (frozenset, set)):
        return sorted(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_json"):
        return obj.to_json()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


@dataclass
class ResultRecord:
    command: str
    config: dict
    passed: bool
    result: dict
    wall_time: float | None = None
    error: dict | None = None

    @property
    def config_digest(self) -> str:
        return digest(self.config)

    def body(self) -> dict:
        out = {
            "command": self.command,
            "config": self.config,
            "config_digest": self.config_digest,
            "passed": self.passed,
            "result": self.result,
        }
        if self.error is not None:
            out["error"] = self.error
        return out

    def canonical_bytes(self) -> bytes:
        return canonical_json(self.body()).encode()

    def to_json(self) -> dict:
        out = json.loads(canonical_json(self.body()))
        out["timing"] = {"wall_seconds": self.wall_time}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

