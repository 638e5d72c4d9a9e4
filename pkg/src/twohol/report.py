"""Check records and their two output formats.

``records`` is JSON lines: one header object, then one object per check
with the fixed key order name, anchor, residual, tolerance, status,
millis, then one object per pipeline output.  ``plain`` is an aligned
table ending in ``passed X/Y``.
"""
from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

FIELDS = ("name", "anchor", "residual", "tolerance", "status", "millis")


@dataclass
class Check:
    name: str
    anchor: str
    residual: Optional[float]
    tolerance: float
    above: bool = False     # pass when residual > tolerance (separation checks)
    millis: Optional[float] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        r = self.residual
        if r is None or not math.isfinite(r):
            return False
        return r > self.tolerance if self.above else r < self.tolerance

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def record(self, timing: bool = False) -> dict:
        ms = round(self.millis, 1) if (timing and self.millis is not None) else "-"
        res = None if self.residual is None or not math.isfinite(self.residual) else float(self.residual)
        return dict(zip(FIELDS, (self.name, self.anchor, res, float(self.tolerance), self.status, ms)))


@dataclass
class Report:
    header: Dict[str, object]
    checks: List[Check] = field(default_factory=list)
    outputs: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, anchor: str, fn: Callable[[], float], tolerance: float, above: bool = False,
            errors=(Exception,)) -> Check:
        """Run ``fn`` and record its residual.  Listed exceptions become failing records."""
        t = time.perf_counter()
        detail = ""
        try:
            res = float(fn())
        except errors as exc:  # surfaced as a failing record, message on stderr
            res = getattr(exc, "mismatch", None)
            detail = f"{type(exc).__name__}: {exc}"
            print(f"[{name}] {detail}", file=sys.stderr)
        c = Check(name, anchor, res, tolerance, above, 1000 * (time.perf_counter() - t), detail)
        self.checks.append(c)
        return c

    def output(self, name: str, value):
        self.outputs[name] = _jsonable(value)


def _jsonable(v):
    if isinstance(v, np.ndarray) or np.iscomplexobj(v):
        a = np.asarray(v)
        if np.iscomplexobj(a):
            return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}
        return a.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def emit_records(rep: Report, timing: bool = False) -> str:
    lines = [json.dumps({"header": rep.header})]
    lines += [json.dumps(c.record(timing)) for c in rep.checks]
    lines += [json.dumps({"output": k, "value": v}) for k, v in rep.outputs.items()]
    return "\n".join(lines) + "\n"


def _fmt(x):
    return "-" if x is None else f"{x:.3e}"


def emit_plain(rep: Report, timing: bool = False) -> str:
    head = " ".join(f"{k}={v}" for k, v in rep.header.items())
    out = [f"# {head}"]
    width = max([len(c.name) for c in rep.checks] + [4])
    for c in rep.checks:
        rec = c.record(timing)
        op = ">" if c.above else "<"
        ms = "" if rec["millis"] == "-" else f"  {rec['millis']} ms"
        out.append(f"{c.status.upper():4}  {c.name:<{width}}  {_fmt(rec['residual'])} {op} {c.tolerance:.1e}"
                   f"  [{c.anchor}]{ms}")
    for k, v in rep.outputs.items():
        out.append(f"{k} = {json.dumps(v)}")
    n = sum(c.passed for c in rep.checks)
    out.append(f"passed {n}/{len(rep.checks)}")
    return "\n".join(out) + "\n"


def emit_report(rep: Report, fmt: str = "plain", timing: bool = False) -> str:
    if fmt == "records":
        return emit_records(rep, timing)
    if fmt == "plain":
        return emit_plain(rep, timing)
    raise ValueError(f"unknown format {fmt!r}")


def parse_records(text: str):
    """Inverse of ``emit_records``: (header, list of check dicts, outputs)."""
    header, checks, outputs = None, [], {}
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if "header" in obj:
            header = obj["header"]
        elif "output" in obj:
            outputs[obj["output"]] = obj["value"]
        else:
            if tuple(obj) != FIELDS:
                raise ValueError(f"unexpected record keys {tuple(obj)}")
            checks.append(obj)
    if header is None:
        raise ValueError("records stream has no header line")
    return header, checks, outputs
