"""Nodal spacing functions h(p)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from . import expr
from ._native import program as _prog

__all__ = [
    "SpacingError",
    "SpacingFn",
    "Constant",
    "Preset",
    "Expr",
    "PRESETS",
    "PRESET_DIMS",
    "PRESET_SOURCES",
    "eval_spacing",
    "parse_spacing_expr",
    "spacing_from_config",
]

VARIABLES = ("x", "y", "z")

PRESETS = tuple(_prog.PRESET_IDS)
PRESET_DIMS = {
    "uniform": None,
    "clover2d": 2,
    "bunny2d": 2,
    "maze2d": 2,
    "clover3d": 3,
    "bunny3d": 3,
    "maze3d": 3,
}
# expression forms of the presets with the length scale factored out
PRESET_SOURCES = {
    "uniform": "1",
    "clover2d": "1 + 4*cos(3*arg(x, y))^2*tanh(sqrt(x^2 + y^2))",
    "bunny2d": "(1 + y/100)^1.5",
    "maze2d": "(1 + y/20)^1.5",
    "clover3d": "0.5 + cos(3*arg(x, y) + pi/3)^2*tanh((2 - z)*sqrt(x^2 + y^2 + z^2))",
    "bunny3d": "1 + 4*(180 - z)/180",
    "maze3d": "4 + sin(x*pi/5)",
}


class SpacingError(ValueError):
    """Spacing evaluated to a non-positive or non-finite value."""

    def __init__(self, value: float, point):
        self.value = value
        self.point = tuple(float(c) for c in np.asarray(point).reshape(-1))
        super().__init__(f"spacing h{self.point} = {value!r} is not positive and finite")


class SpacingFn:
    """Callable on an (n, d) array; ``value`` evaluates a single point."""

    h_s: float
    dim: int | None = None

    def scaled(self, a: float) -> "SpacingFn":
        return replace(self, h_s=self.h_s * a)

    @cached_property
    def packed(self) -> _prog.Packed:
        return self._pack()

    def __call__(self, pts) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
        self.check_dim(pts.shape[1])
        out = np.empty(pts.shape[0])
        if len(pts):
            _prog.spacing_many(self.packed, pts, out)
        return out

    def value(self, p) -> float:
        return float(self(np.asarray(p, dtype=np.float64)[None, :])[0])

    def check_dim(self, d: int) -> None:
        if self.dim is not None and d != self.dim:
            raise ValueError(f"{self.describe()} is defined in {self.dim}-D, points are {d}-D")

    def describe(self) -> str:
        return type(self).__name__

    def to_config(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def _pack(self):  # pragma: no cover - abstract
        raise NotImplementedError


def _check_scale(h_s: float) -> float:
    h_s = float(h_s)
    if not (h_s > 0.0 and math.isfinite(h_s)):
        raise ValueError(f"h_s must be positive and finite, got {h_s!r}")
    return h_s


@dataclass(frozen=True, eq=False)
class Constant(SpacingFn):
    h_s: float

    def __post_init__(self):
        object.__setattr__(self, "h_s", _check_scale(self.h_s))

    def value(self, p) -> float:
        return self.h_s

    def describe(self):
        return f"constant {self.h_s}"

    def to_config(self):
        return {"kind": "constant", "h_s": self.h_s}

    def _pack(self):
        return _prog.pack([_prog.SP_CONSTANT, 0, 0], [self.h_s])


@dataclass(frozen=True, eq=False)
class Preset(SpacingFn):
    name: str
    h_s: float = 1.0

    def __post_init__(self):
        if self.name not in _prog.PRESET_IDS:
            raise ValueError(f"unknown spacing preset {self.name!r}; choose from {', '.join(PRESETS)}")
        object.__setattr__(self, "h_s", _check_scale(self.h_s))
        object.__setattr__(self, "dim", PRESET_DIMS[self.name])

    def describe(self):
        return f"preset {self.name}"

    def to_config(self):
        return {"kind": "preset", "name": self.name, "h_s": self.h_s}

    def _pack(self):
        return _prog.pack([_prog.SP_PRESET, _prog.PRESET_IDS[self.name], self.dim or 0], [self.h_s])


@dataclass(frozen=True, eq=False)
class Expr(SpacingFn):
    """``h_s * f(x, y, z)`` for a parsed expression f."""

    src: str
    h_s: float = 1.0
    ast: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "h_s", _check_scale(self.h_s))
        if self.ast is None:
            object.__setattr__(self, "ast", parse_spacing_expr(self.src))
        used = expr.variables_of(self.ast)
        need = max((VARIABLES.index(v) + 1 for v in used), default=0)
        object.__setattr__(self, "min_dim", need)

    def check_dim(self, d: int) -> None:
        if d < self.min_dim:
            raise ValueError(f"expression {self.src!r} uses {VARIABLES[self.min_dim - 1]!r} but points are {d}-D")

    def value(self, p) -> float:
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        self.check_dim(p.shape[0])
        env = dict(zip(VARIABLES, p))
        try:
            return self.h_s * expr.evaluate(self.ast, env)
        except (ValueError, ZeroDivisionError, OverflowError):
            return math.nan

    def describe(self):
        return f"expression {self.src!r}"

    def to_config(self):
        return {"kind": "expr", "src": self.src, "h_s": self.h_s}

    def _pack(self):
        code, consts = expr.compile_program(self.ast, VARIABLES)
        return _prog.pack([_prog.SP_EXPR, 0, 0], [self.h_s], code, consts)


def parse_spacing_expr(src: str) -> expr.Node:
    return expr.parse(src, VARIABLES)


def eval_spacing(f: SpacingFn, p) -> float:
    """h(p), raising SpacingError unless the value is positive and finite."""
    v = f.value(p)
    if not (v > 0.0 and math.isfinite(v)):
        raise SpacingError(v, p)
    return v


def spacing_from_config(cfg: Mapping[str, Any]) -> SpacingFn:
    kind = cfg.get("kind")
    if kind == "constant":
        return Constant(cfg["h_s"])
    if kind == "preset":
        return Preset(cfg["name"], cfg.get("h_s", 1.0))
    if kind == "expr":
        return Expr(cfg["src"], cfg.get("h_s", 1.0))
    raise ValueError(f"unknown spacing kind {kind!r}")
