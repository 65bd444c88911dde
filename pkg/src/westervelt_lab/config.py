"""Flat ``key = value`` run configuration with a versioned header line.

The first non-blank line must be ``# westervelt-lab config v1``.  Later lines
starting with ``#`` are comments.  Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import Grid3D, ScalarField3D
from .media import Nonlinearity, SoundSpeed

HEADER = "# westervelt-lab config v1"


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


# key -> (parser, default)
SCHEMA = {
    "study": (str, "beta_sweep"),
    "grid.dx": (float, 0.125),
    "grid.dt": (float, 0.03),
    "grid.T": (float, 3.48),
    "c.kind": (str, "constant"),
    "c.value": (float, 1.0),
    "c.alpha": (float, 1.5),
    "c.path": (str, ""),
    "beta.kind": (str, "constant"),
    "beta.value": (float, 0.5),
    "beta.path": (str, ""),
    "profile.kind": (str, "exp_inv_sq"),
    "profile.C": (float, 0.1),
    "output.dir": (str, "out"),
    "sweep.anchor": (float, 0.1),
    "sweep.delta_min": (float, 1e-3),
    "sweep.delta_max": (float, 1e-1),
    "sweep.count": (int, 8),
    "sweep.alpha": (float, 1.5),
    "sweep.beta": (float, 0.0),
    "sweep.workers": (int, 1),
    "sweep.eps": (_floats, (0.04, 0.02, 0.01, 0.005)),
    "sweep.taus": (_floats, (25.0, 50.0, 100.0, 200.0)),
    "geodesic.entry": (_floats, (-1.0, 0.0, 0.0)),
    "geodesic.dir": (_floats, (1.0, 0.0, 0.0)),
    "geodesic.t_minus": (float, 1.0),
    "geodesic.step": (float, 1e-3),
    "beam.rho": (float, 3.0),
    "beam.T": (float, 4.0),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict
    base: Path

    def __getitem__(self, key):
        return self.values[key]

    def grid(self) -> Grid3D:
        from .errors import GridError

        try:
            return Grid3D.from_dx(self["grid.dx"], self["grid.dt"], self["grid.T"])
        except GridError as exc:
            raise ConfigError(str(exc)) from exc

    def _table(self, key: str) -> ScalarField3D:
        from .io import read_field

        path = self[key]
        if not path:
            raise ConfigError(f"{key} is required for tabulated media")
        p = Path(path) if Path(path).is_absolute() else self.base / path
        try:
            obj = read_field(p)
        except OSError as exc:
            raise ConfigError(f"cannot read {p}: {exc}") from exc
        if not isinstance(obj, ScalarField3D):
            raise ConfigError(f"{p} does not hold a scalar field")
        return obj

    def sound_speed(self) -> SoundSpeed:
        kind = self["c.kind"]
        if kind == "constant":
            return SoundSpeed.constant(self["c.value"])
        if kind == "herglotz":
            return SoundSpeed.herglotz(self["c.alpha"])
        if kind == "tabulated":
            return SoundSpeed.tabulated(self._table("c.path"))
        raise ConfigError(f"unknown c.kind {kind!r}")

    def nonlinearity(self) -> Nonlinearity:
        kind = self["beta.kind"]
        if kind == "constant":
            return Nonlinearity.constant(self["beta.value"])
        if kind == "tabulated":
            return Nonlinearity.tabulated(self._table("beta.path"))
        raise ConfigError(f"unknown beta.kind {kind!r}")

    def profile(self):
        from .solvers import exp_inv_sq_profile

        if self["profile.kind"] != "exp_inv_sq":
            raise ConfigError(f"unknown profile.kind {self['profile.kind']!r}")
        return exp_inv_sq_profile(self["profile.C"])


def parse_config(text: str, base: Path | None = None) -> RunConfig:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != HEADER:
        raise ConfigError(f"first line must be {HEADER!r}")
    values = {k: v[1] for k, v in SCHEMA.items()}
    for no, ln in enumerate(lines[1:], start=2):
        if ln.startswith("#"):
            continue
        if "=" not in ln:
            raise ConfigError(f"line {no}: expected 'key = value'")
        key, raw = (s.strip() for s in ln.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {no}: bad value for {key}: {raw!r}") from exc
    for key in ("grid.dx", "grid.dt", "grid.T"):
        if not values[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if not np.isfinite(values["profile.C"]):
        raise ConfigError("profile.C must be finite")
    return RunConfig(values, base or Path("."))


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, p.parent)


def dump_config(values: dict) -> str:
    out = [HEADER]
    for k in SCHEMA:
        if k in values:
            v = values[k]
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"
