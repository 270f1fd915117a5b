"""JSON interchange for design files, tomography reports and per-trial CSVs.

Output is deterministic: sorted keys, fixed indentation and no timestamps.
Floats are written with Python's shortest round-trip repr, so parsing a
design file reproduces every matrix entry bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from fractions import Fraction
from typing import Any

import numpy as np

from .design import DesignReport, WeightedBasisFamily, canonicalize_phases
from .exceptions import FormatError

DESIGN_FORMAT = "basisdesigns-design"
FORMAT_VERSION = 1


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _matrix_to_json(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _weight_to_json(w) -> dict:
    exact = isinstance(w, Fraction)
    frac = Fraction(w)
    return {"rational": f"{frac.numerator}/{frac.denominator}", "value": float(w), "exact": exact}


def serialize_design(family: WeightedBasisFamily, report: DesignReport | None = None) -> str:
    """Design file text.  Columns are stored with their leading entry real and positive."""
    bases = []
    for a, (M, w) in enumerate(zip(family.matrices, family.weights)):
        bases.append({
            "index": a,
            "weight": _weight_to_json(w),
            "matrix": _matrix_to_json(canonicalize_phases(M)),
        })
    doc = {
        "format": DESIGN_FORMAT,
        "version": FORMAT_VERSION,
        "dimension": family.dimension,
        "bases": bases,
        "provenance": family.provenance,
        "verification": None if report is None else report.to_dict(),
    }
    return _dump(doc)


def parse_design(text: str) -> tuple[WeightedBasisFamily, dict | None]:
    """Inverse of serialize_design; returns the family and its verification stamp."""
    try:
        doc = json.loads(text)
        if doc.get("format") != DESIGN_FORMAT:
            raise FormatError("not a design file")
        if doc.get("version") != FORMAT_VERSION:
            raise FormatError(f"unsupported design file version {doc.get('version')}")
        d = int(doc["dimension"])
        mats, weights = [], []
        for entry in doc["bases"]:
            arr = np.array(entry["matrix"], dtype=float)
            if arr.shape != (d, d, 2):
                raise FormatError(f"basis {entry.get('index')} has shape {arr.shape}")
            mats.append(arr[..., 0] + 1j * arr[..., 1])
            wt = entry["weight"]
            weights.append(Fraction(wt["rational"]) if wt["exact"] else float(wt["value"]))
        family = WeightedBasisFamily(np.array(mats), tuple(weights), doc.get("provenance") or {})
        return family, doc.get("verification")
    except FormatError:
        raise
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"malformed design file: {exc}") from exc


def write_design(path, family: WeightedBasisFamily, report: DesignReport | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_design(family, report))


def read_design(path) -> tuple[WeightedBasisFamily, dict | None]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(str(exc)) from exc
    return parse_design(text)


def family_hash(family: WeightedBasisFamily) -> str:
    """sha256 of the serialized family without verification stamp."""
    return hashlib.sha256(serialize_design(family).encode()).hexdigest()


def serialize_report(doc: dict) -> str:
    return _dump(doc)


def errors_csv(errors: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "squared_error"])
    for i, e in enumerate(errors):
        writer.writerow([i, repr(float(e))])
    return buf.getvalue()
