"""JSON spec files: schema validation, parsing and exact re-serialization."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Union

import jsonschema
import numpy as np

from .config import AnalysisConfig
from .model import Eigenvalue, Irrational, JordanBlock, SystemSpec
from .sampling import ContinuousBlock, ContinuousSpec
from .spectral import ParallelSpec

SCHEMA_VERSION = "1.0"
AnySpec = Union[SystemSpec, ContinuousSpec, ParallelSpec]


class SpecWarning(UserWarning):
    pass


class SpecError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("erasurekf").joinpath("spec_schema.json").read_text())


@dataclass
class SpecFile:
    kind: str
    spec: AnySpec
    config: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    warnings: list[str] = field(default_factory=list)

    def analysis_config(self) -> AnalysisConfig:
        keys = {"rel_tol", "max_period", "max_den", "phase_tol", "parallel_budget"}
        return AnalysisConfig(**{k: v for k, v in self.config.items() if k in keys})


def _matrix(rows) -> np.ndarray:
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise SpecError("matrix rows have different lengths")
    return np.array([[complex(*e) if isinstance(e, list) else complex(e) for e in r] for r in rows])


def _matrix_json(M) -> list:
    out = []
    for row in np.asarray(M):
        out.append([float(z.real) if z.imag == 0 else [float(z.real), float(z.imag)] for z in row])
    return out


def _phase(num: int, den: int, where: str, notes: list[str]) -> Fraction:
    f = Fraction(num, den) % 1
    if (f.numerator, f.denominator) != (num, den):
        msg = f"{where}: phase {num}/{den} normalized to {f.numerator}/{f.denominator}"
        warnings.warn(msg, SpecWarning, stacklevel=3)
        notes.append(msg)
    return f


def _eigenvalue(d: dict, cfg: AnalysisConfig, where: str, notes: list[str]) -> Eigenvalue:
    if "re" in d:
        return Eigenvalue.from_complex(complex(d["re"], d["im"]), cfg.max_den, cfg.phase_tol)
    if "theta" in d:
        off = _phase(d.get("offset_num", 0), d.get("offset_den", 1), where, notes)
        return Eigenvalue(d["mag"], Irrational(d["theta"], off))
    return Eigenvalue(d["mag"], _phase(d["phase_num"], d["phase_den"], where, notes))


def _eig_json(e: Eigenvalue) -> dict:
    if isinstance(e.phase, Fraction):
        return {"mag": e.magnitude, "phase_num": e.phase.numerator, "phase_den": e.phase.denominator}
    out = {"mag": e.magnitude, "theta": e.phase.theta}
    if e.phase.offset:
        out.update(offset_num=e.phase.offset.numerator, offset_den=e.phase.offset.denominator)
    return out


def _discrete_blocks(items, cfg, notes) -> tuple[JordanBlock, ...]:
    return tuple(JordanBlock(_eigenvalue(b["eig"], cfg, f"blocks[{i}]", notes), b.get("size", 1))
                 for i, b in enumerate(items))


def _validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors[:10]:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}: {e.message}")
        raise SpecError("spec validation failed:\n  " + "\n  ".join(lines))


def parse_spec_dict(doc: dict) -> SpecFile:
    _validate(doc)
    notes: list[str] = []
    config = dict(doc.get("config", {}))
    sf = SpecFile(doc["kind"], None, config, doc["schema_version"], notes)  # type: ignore[arg-type]
    cfg = sf.analysis_config()
    sysd = doc["system"]
    try:
        if doc["kind"] == "discrete":
            blocks = _discrete_blocks(sysd["blocks"], cfg, notes)
            m = sum(b.size for b in blocks)
            B = _matrix(sysd["B"]) if "B" in sysd else np.eye(m)
            sf.spec = SystemSpec(blocks, B, _matrix(sysd["C"]),
                                 sysd.get("sigma", 1.0), sysd.get("sigma_prime", 1.0))
        elif doc["kind"] == "parallel":
            blocks = _discrete_blocks(sysd["blocks"], cfg, notes)
            m = sum(b.size for b in blocks)
            B = _matrix(sysd["B"]) if "B" in sysd else np.eye(m)
            sf.spec = ParallelSpec(blocks, B, tuple(_matrix(c) for c in sysd["channels"]),
                                   tuple(sysd["erasure_probs"]),
                                   sysd.get("sigma", 1.0), sysd.get("sigma_prime", 1.0))
        else:
            blocks = tuple(ContinuousBlock(b["re"], b.get("im", 0.0), b.get("size", 1))
                           for b in sysd["blocks"])
            m = sum(b.size for b in blocks)
            C = _matrix(sysd["C"])
            B = _matrix(sysd["B"]) if "B" in sysd else np.eye(m)
            D = _matrix(sysd["D"]) if "D" in sysd else np.eye(C.shape[0])
            sf.spec = ContinuousSpec(blocks, B, C, D, sysd.get("I", 1.0), sysd.get("T"),
                                     sysd.get("jitter_mode", "none"), sysd.get("jitter_density"))
    except (TypeError, KeyError) as exc:
        raise SpecError(f"malformed system: {exc}") from exc
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    return sf


def parse_spec(path) -> SpecFile:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    return parse_spec_dict(doc)


def spec_to_dict(sf: SpecFile) -> dict:
    s = sf.spec
    if isinstance(s, SystemSpec):
        system = {"blocks": [{"eig": _eig_json(b.eig), "size": b.size} for b in s.blocks],
                  "B": _matrix_json(s.B), "C": _matrix_json(s.C),
                  "sigma": s.sigma, "sigma_prime": s.sigma_prime}
    elif isinstance(s, ParallelSpec):
        system = {"blocks": [{"eig": _eig_json(b.eig), "size": b.size} for b in s.blocks],
                  "B": _matrix_json(s.B), "channels": [_matrix_json(c) for c in s.channels],
                  "erasure_probs": list(s.erasure_probs), "sigma": s.sigma, "sigma_prime": s.sigma_prime}
    else:
        system = {"blocks": [{"re": b.re, "im": b.im, "size": b.size} for b in s.blocks],
                  "B": _matrix_json(s.B), "C": _matrix_json(s.C), "D": _matrix_json(s.D),
                  "I": s.I, "T": s.T, "jitter_mode": s.jitter_mode}
        if s.jitter_density is not None:
            system["jitter_density"] = s.jitter_density
    out = {"schema_version": sf.schema_version, "kind": sf.kind, "system": system}
    if sf.config:
        out["config"] = dict(sf.config)
    return out


def dump_spec(sf: SpecFile, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(sf), indent=2) + "\n")


def finite_json(obj):
    """Replace non-finite floats by strings so reports stay strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: finite_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [finite_json(v) for v in obj]
    return obj
