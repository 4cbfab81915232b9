"""Exception types and the JSON-serializable check report shared by all modules."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class LevyKitError(Exception):
    """Base class for every error raised by the toolkit."""


class NonPositiveArgument(LevyKitError, ValueError):
    pass


class OutOfRange(LevyKitError, ValueError):
    pass


class QuadratureFailure(LevyKitError, ArithmeticError):
    pass


class DivergentIntegral(LevyKitError, ArithmeticError):
    pass


class DegenerateTail(LevyKitError, ArithmeticError):
    pass


class StepOverflow(LevyKitError, ArithmeticError):
    pass


class BandOverflow(LevyKitError, ValueError):
    pass


class BumpOverflow(LevyKitError, ValueError):
    pass


class SingularCoefficient(LevyKitError, ArithmeticError):
    pass


class NoConvergence(LevyKitError, ArithmeticError):
    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = list(trace or [])


class StabilityViolation(LevyKitError, ArithmeticError):
    def __init__(self, message: str, dt: float | None = None):
        super().__init__(message)
        self.dt = dt


class ConfigError(LevyKitError, ValueError):
    pass


class AliasingWarning(UserWarning):
    """The grid is too coarse for the symbol to have decayed at the Nyquist shell."""


class TimeQuadratureTruncation(UserWarning):
    pass


class RegularityRangeWarning(UserWarning):
    """beta lies outside the admissible interval (0, 1/alpha)."""


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


@dataclass
class Report:
    """A named pass/fail verdict made of individual line items.

    Each item is a dict with at least ``name`` and ``passed``; any other keys
    carry the numbers behind the verdict.
    """

    name: str
    items: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, name: str, passed: bool, **data: Any) -> dict:
        item = {"name": name, "passed": bool(passed), **data}
        self.items.append(item)
        return item

    @property
    def passed(self) -> bool:
        return all(item["passed"] for item in self.items)

    def item(self, name: str) -> dict:
        for it in self.items:
            if it["name"] == name:
                return it
        raise KeyError(name)

    def failures(self) -> list[dict]:
        return [it for it in self.items if not it["passed"]]

    def to_dict(self) -> dict:
        return _plain({"name": self.name, "passed": self.passed,
                       "items": self.items, "notes": self.notes})

    def to_json(self, **kwargs: Any) -> str:
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)
