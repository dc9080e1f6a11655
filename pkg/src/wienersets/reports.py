"""Report objects with JSON and CSV serialisation."""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

SCHEMA_VERSION = "1.0"


def _clean(x):
    # JSON has no NaN/inf; encode them as strings and decode on load
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return _clean(x.item())
    return x


def _restore(x):
    if x in ("nan", "inf", "-inf"):
        return float(x)
    if isinstance(x, dict):
        return {k: _restore(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_restore(v) for v in x]
    return x


@dataclass
class EstimatorReport:
    estimate: float
    stderr: float
    n: int
    target: float | None = None
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.stderr >= 0:
            if not math.isnan(self.stderr):
                raise ValueError("stderr must be nonnegative")
        if self.n < 0:
            raise ValueError("n must be nonnegative")

    def to_dict(self) -> dict:
        return {"kind": "estimator", "schema_version": SCHEMA_VERSION, **_clean(asdict(self))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EstimatorReport":
        d = _restore(json.loads(text))
        d.pop("kind", None)
        d.pop("schema_version", None)
        return cls(**d)


@dataclass
class TestReport:
    statistic: float
    p_value: float
    n: int
    reject_at: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if not self.reject_at:
            self.reject_at = {str(a): bool(self.p_value < a) for a in (0.01, 0.05)}

    def to_dict(self) -> dict:
        return {"kind": "test", "schema_version": SCHEMA_VERSION, **_clean(asdict(self))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TestReport":
        d = _restore(json.loads(text))
        d.pop("kind", None)
        d.pop("schema_version", None)
        return cls(**d)


def format_csv(header: list, rows: list) -> str:
    """CSV text with a fixed number format (floats: 17 significant digits)."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if f != f:
            return ""
        return f"{f:.17g}"
    return str(v)
