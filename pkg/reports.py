"""
Report payloads for rpkit runs.

Reports are pydantic models serialised to a single JSON document. Matrices up
to 64x64 are inlined as MatrixFile payloads; larger ones are written next to
the report and referenced by relative path.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from tensorlab import MatrixFile, save_matrix

TOOL_VERSION = "0.1.0"
INLINE_LIMIT = 64


class RunConfig(BaseModel):
    """Echo of everything that determines a run"""

    command: str = Field(..., description="Subcommand that produced the report")
    seed: int = Field(..., description="Root seed; each check derives its own stream")
    tol: float = Field(..., gt=0, description="Verdict tolerance")
    rank_tol: float = Field(..., gt=0, description="Rank threshold relative to λ_max")
    residual_tol: float = Field(..., gt=0, description="Bound for identity residuals")
    cluster_tol: float = Field(..., gt=0, description="Ground cluster width relative to ‖H‖")
    tau_grid: List[float] = Field(default_factory=list, description="τ values for semigroup checks")
    checks: Optional[List[str]] = Field(None, description="Selected check names; None runs all")
    parameters: Dict[str, Any] = Field(default_factory=dict, description="Subcommand arguments")
    geometry: Optional[str] = Field(None, description="Region shape convention for net checks")


class CheckEntry(BaseModel):
    name: str
    passed: bool
    values: Dict[str, Any] = Field(default_factory=dict, description="Numeric evidence for the verdict")
    error: Optional[str] = Field(None, description="Error class and message when the check raised")
    wall_clock: Optional[float] = Field(None, description="Seconds spent in the check; not part of body()")


class Report(BaseModel):
    tool: str = "rpkit"
    version: str = TOOL_VERSION
    config: RunConfig
    checks: List[CheckEntry] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def body(self) -> str:
        """Deterministic part of the report: identical for identical seeds."""
        payload = self.model_dump(mode="json", exclude={"checks": {"__all__": {"wall_clock"}}})
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)

    def document(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True, allow_nan=False)

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.document())
        logger.info(f"Report written to {path}")
        return path

    def summary(self) -> List[str]:
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name}" + (f"  ({c.error})" if c.error else "")
                for c in self.checks]


@dataclass
class CheckResult:
    """What a check hands back to the pipeline before serialisation"""

    passed: bool
    values: Dict[str, Any] = field(default_factory=dict)
    matrices: Dict[str, np.ndarray] = field(default_factory=dict)


def json_safe(value: Any) -> Any:
    """Plain JSON types; non-finite floats become None, complex numbers [re, im]."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [json_safe(float(value.real)), json_safe(float(value.imag))]
    return value


def encode_matrices(check: str, matrices: Dict[str, np.ndarray], side_dir: Optional[Path]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for name, m in sorted(matrices.items()):
        m = np.asarray(m)
        if max(m.shape) <= INLINE_LIMIT or side_dir is None:
            out[name] = MatrixFile.from_matrix(m).model_dump()
            continue
        target = save_matrix(side_dir / f"{check}_{name}.json", m)
        out[f"{name}_file"] = target.name
    return out


def to_entry(name: str, result: CheckResult, side_dir: Optional[Path]) -> CheckEntry:
    values = json_safe(result.values)
    values.update(encode_matrices(name, result.matrices, side_dir))
    return CheckEntry(name=name, passed=bool(result.passed), values=values)


def failed_entry(name: str, error: Exception) -> CheckEntry:
    return CheckEntry(name=name, passed=False, error=f"{type(error).__name__}: {error}")
