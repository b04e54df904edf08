"""Report containers and JSON helpers used by the verification routines."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "tolist"):
        return jsonable(obj.tolist())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=False) + "\n"


@dataclass
class Report:
    """Outcome of a numerical verification sweep.

    ``passed`` is ``None`` when the check is inconclusive.
    """

    kind: str
    family: str
    alpha: Optional[float]
    N: int
    p: Optional[str]
    passed: Optional[bool]
    worst_witness: Optional[dict] = None
    margin: Optional[float] = None
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.passed)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "family": self.family,
            "alpha": self.alpha,
            "N": self.N,
            "p": self.p,
            "pass": self.passed,
            "worst_witness": self.worst_witness,
            "margin": self.margin,
        }
        out.update(self.details)
        return jsonable(out)


def witness(q, q_hat, value) -> dict:
    return {"q": np.asarray(q, dtype=float).tolist(),
            "q_hat": np.asarray(q_hat, dtype=float).tolist(),
            "value": float(value)}
