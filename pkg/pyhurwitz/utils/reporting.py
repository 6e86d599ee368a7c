import json
import logging
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class Check:
    """One named residual compared against its tolerance."""
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tolerance)

    def to_document(self) -> Dict[str, Any]:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


def jsonable(value: Any) -> Any:
    """Complex numbers become [re, im]; arrays become nested lists; tuple keys are joined with '-'."""
    if isinstance(value, dict):
        return {_key(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, Check):
        return value.to_document()
    if hasattr(value, "to_document"):
        return jsonable(value.to_document())
    if isinstance(value, (complex, np.complexfloating)):
        return [_number(value.real), _number(value.imag)]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _number(value)
    return value


def _number(x) -> Optional[float]:
    x = float(x)
    return x if np.isfinite(x) else None


def _key(key: Any) -> str:
    if isinstance(key, tuple):
        return "-".join(str(k + 1) if isinstance(k, (int, np.integer)) else str(k) for k in key)
    return str(key)


def build_report(command: str, inputs: Dict[str, Any], results: Dict[str, Any], checks: List[Check],
                 timestamp: bool = True, error: Optional[BaseException] = None) -> Dict[str, Any]:
    report = {
        "command": command,
        "inputs": inputs,
        "results": results,
        "checks": [c.to_document() for c in checks],
        "passed": error is None and all(c.passed for c in checks),
    }
    if error is not None:
        report["error"] = {"kind": type(error).__name__, "message": str(error)}
    if timestamp:
        report["timestamp"] = datetime.now(timezone.utc).isoformat()
    return jsonable(report)


def write_atomic(path: str, text: str):
    """Writes text to path through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    handle, temporary = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(handle, "w", encoding="utf-8") as out:
            out.write(text)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise
    logger.info("wrote %s", path)


def write_report(path: Optional[str], report: Dict[str, Any]) -> str:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if path:
        write_atomic(path, text)
    return text
