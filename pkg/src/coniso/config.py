"""JSON run configuration and deterministic file output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

from .cone import AsymptoticConeMetric, Perturbation, RadialProfile
from .errors import ConisoError
from .link import DEFAULT_DEGREE, LinkMetric
from .spectral import SpectralField

__all__ = [
    "ConfigError",
    "RunConfig",
    "DEFAULTS",
    "parse_link",
    "parse_metric",
    "load_config",
    "format_float",
    "write_csv",
    "write_json",
]

DEFAULTS = {
    "degree": DEFAULT_DEGREE,
    "newton_tol": 1e-10,
    "fd_step": 1e-3,
    "eigen_tol": 1e-10,
    "count": 6,
    "r_min": 1.0,
    "r_max": 100.0,
}


class ConfigError(ConisoError):
    """Malformed or inconsistent configuration."""


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing '{key}' in {where}")
    return mapping[key]


def _field_from_spec(triples, degree, where):
    try:
        return SpectralField.from_triples(triples, degree)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad harmonic coefficients in {where}: {exc}") from exc


def parse_link(spec):
    """Link from ``{"kind": "scaled_sphere", ...}`` or ``{"kind": "conformal_s2", ...}``."""
    if not isinstance(spec, dict):
        raise ConfigError("link description must be a JSON object")
    kind = _require(spec, "kind", "link")
    try:
        if kind == "scaled_sphere":
            return LinkMetric.scaled_sphere(int(spec.get("dim", 2)), float(spec.get("radius", 1.0)))
        if kind == "conformal_s2":
            degree = int(spec.get("degree", DEFAULT_DEGREE))
            coeffs = spec.get("coefficients", [])
            return LinkMetric.conformal_s2(_field_from_spec(coeffs, degree, "link"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid link: {exc}") from exc
    raise ConfigError(f"unknown link kind {kind!r}")


def _parse_perturbation(spec, name):
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise ConfigError(f"perturbation '{name}' must be a JSON object")
    try:
        prof = RadialProfile(
            spec.get("profile", "power"),
            float(spec.get("amplitude", 0.0)),
            float(spec.get("tau", 1.0)),
            float(spec.get("center", 0.0)),
            float(spec.get("width", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid perturbation '{name}': {exc}") from exc
    fld = None
    if "field" in spec:
        triples = spec["field"]
        degree = int(spec.get("degree", max([int(t[0]) for t in triples] + [0])))
        fld = _field_from_spec(triples, degree, name)
    return Perturbation(prof, fld)


def parse_metric(spec, link):
    spec = spec or {}
    try:
        return AsymptoticConeMetric(
            link,
            float(spec.get("r_min", DEFAULTS["r_min"])),
            float(spec.get("r_max", DEFAULTS["r_max"])),
            _parse_perturbation(spec.get("alpha"), "alpha"),
            _parse_perturbation(spec.get("beta"), "beta"),
            float(spec.get("decay_rate", 1.0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid metric: {exc}") from exc


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    link: LinkMetric
    metric: AsymptoticConeMetric
    degree: int = DEFAULTS["degree"]
    tol: float = DEFAULTS["newton_tol"]
    fd_step: float = DEFAULTS["fd_step"]
    count: int = DEFAULTS["count"]
    volumes: tuple = ()
    radii: tuple = ()
    betas: tuple = ()
    extra: dict = field(default_factory=dict)

    def settings(self):
        return {
            "degree": self.degree,
            "newton_tol": self.tol,
            "fd_step": self.fd_step,
            "count": self.count,
            "volumes": list(self.volumes),
            "radii": list(self.radii),
            "betas": list(self.betas),
        }


def _float_list(values, name):
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{name}' must be a list of numbers") from exc
    if not all(math.isfinite(v) for v in out):
        raise ConfigError(f"'{name}' must contain finite numbers")
    return out


def config_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    link = parse_link(_require(raw, "link", "configuration"))
    metric = parse_metric(raw.get("metric"), link)
    res = raw.get("resolution", {})
    try:
        return RunConfig(
            raw=raw,
            link=link,
            metric=metric,
            degree=int(res.get("degree", DEFAULTS["degree"])),
            tol=float(raw.get("tol", DEFAULTS["newton_tol"])),
            fd_step=float(res.get("fd_step", DEFAULTS["fd_step"])),
            count=int(raw.get("count", DEFAULTS["count"])),
            volumes=_float_list(raw.get("volumes", ()), "volumes"),
            radii=_float_list(raw.get("radii", ()), "radii"),
            betas=_float_list(raw.get("betas", ()), "betas"),
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


# ----------------------------------------------------------------------
# output


def format_float(x):
    """17 significant digits, stable across runs."""
    return format(float(x), ".17g")


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return str(v)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def write_json(path, obj):
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
