from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frontfill import expr
from frontfill.geometry import clover2d, clover3d
from frontfill.spacing import (
    PRESET_DIMS,
    PRESET_SOURCES,
    PRESETS,
    Constant,
    Expr,
    Preset,
    SpacingError,
    eval_spacing,
    parse_spacing_expr,
    spacing_from_config,
)


# Hand-written reference formulas, independent of the expression language.
def _arg(x, y):
    return np.where((x == 0) & (y == 0), 0.0, np.arctan2(y, x))


REFERENCE = {
    "uniform": lambda x, y, z: np.ones_like(x),
    "clover2d": lambda x, y, z: 1 + 4 * np.cos(3 * _arg(x, y)) ** 2 * np.tanh(np.hypot(x, y)),
    "bunny2d": lambda x, y, z: (1 + y / 100) ** 1.5,
    "maze2d": lambda x, y, z: (1 + y / 20) ** 1.5,
    "clover3d": lambda x, y, z: 0.5
    + np.cos(3 * _arg(x, y) + np.pi / 3) ** 2 * np.tanh((2 - z) * np.sqrt(x * x + y * y + z * z)),
    "bunny3d": lambda x, y, z: 1 + 4 * (180 - z) / 180,
    "maze3d": lambda x, y, z: 4 + np.sin(x * np.pi / 5),
}


def _sample(name, n=400, seed=1):
    rng = np.random.default_rng(seed)
    d = PRESET_DIMS[name] or 3
    scale = {"bunny2d": 50, "maze2d": 10, "bunny3d": 150, "maze3d": 10}.get(name, 1.5)
    pts = rng.uniform(-scale, scale, size=(n, d))
    if name == "bunny3d":
        pts[:, 2] = rng.uniform(0, 180, n)
    return pts


@pytest.mark.parametrize("name", PRESETS)
def test_preset_matches_reference(name):
    pts = _sample(name)
    cols = [pts[:, k] if k < pts.shape[1] else np.zeros(len(pts)) for k in range(3)]
    want = REFERENCE[name](*cols)
    got = Preset(name)(pts)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", PRESETS)
def test_preset_string_form_matches_preset(name):
    pts = _sample(name)
    np.testing.assert_allclose(Expr(PRESET_SOURCES[name])(pts), Preset(name)(pts), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", PRESETS)
def test_tree_walk_agrees_with_compiled(name):
    pts = _sample(name, 60)
    f = Expr(PRESET_SOURCES[name], h_s=0.3)
    compiled = f(pts)
    walked = np.array([f.value(p) for p in pts])
    np.testing.assert_allclose(walked, compiled, rtol=1e-12, atol=1e-14)


def test_scaling_is_linear():
    pts = _sample("clover2d")
    np.testing.assert_allclose(Preset("clover2d", 0.01)(pts), 0.01 * Preset("clover2d")(pts), rtol=1e-15)
    assert Preset("clover2d", 2.0).scaled(0.25).h_s == 0.5


def test_constant():
    f = Constant(0.05)
    assert np.all(f(np.zeros((7, 3))) == 0.05)
    assert f.value((1.0, 2.0)) == 0.05


def test_clover_preset_extremes_in_domain():
    # the origin has h = h_s; the lobes approach 1 + 4 tanh(2.5)
    f = Preset("clover2d")
    assert f.value((0.0, 0.0)) == 1.0
    r = 2.5
    assert f.value((r, 0.0)) == pytest.approx(1 + 4 * math.tanh(r), rel=1e-12)


def _clover_ratio(samples=400_000):
    dom = clover2d()
    rng = np.random.default_rng(3)
    pts = rng.uniform(dom.bbox.lo, dom.bbox.hi, size=(samples, 2))
    pts = pts[dom.contains_many(pts)]
    hv = Preset("clover2d")(pts)
    return hv.max() / hv.min()


@pytest.mark.xfail(strict=True, reason="the preset peaks near 4.62 over the clover, not 5; see README")
def test_clover_ratio_is_five():
    assert _clover_ratio() == pytest.approx(5.0, rel=0.01)


def test_clover_ratio_true_value():
    assert _clover_ratio() == pytest.approx(4.62, abs=0.02)


def test_clover3d_preset_positive_in_domain():
    dom = clover3d()
    rng = np.random.default_rng(0)
    pts = rng.uniform(dom.bbox.lo, dom.bbox.hi, size=(50_000, 3))
    pts = pts[dom.contains_many(pts)]
    assert np.all(Preset("clover3d")(pts) > 0)


def test_preset_dimension_checked():
    with pytest.raises(ValueError, match="3-D"):
        Preset("clover3d")(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        Expr("z + 1")(np.zeros((2, 2)))
    assert Expr("x + 1")(np.zeros((2, 1)))[0] == 1.0


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown spacing preset"):
        Preset("teapot")


@pytest.mark.parametrize("h_s", [0.0, -1.0, math.inf, math.nan])
def test_bad_scale(h_s):
    with pytest.raises(ValueError):
        Constant(h_s)


def test_eval_spacing_rejects_nonpositive():
    with pytest.raises(SpacingError) as err:
        eval_spacing(Expr("x"), (-1.0, 0.0))
    assert err.value.point == (-1.0, 0.0)
    with pytest.raises(SpacingError):
        eval_spacing(Expr("1/x"), (0.0, 0.0))
    with pytest.raises(SpacingError):
        eval_spacing(Expr("sqrt(x)"), (-4.0, 0.0))
    assert eval_spacing(Expr("x^2 + 1"), (2.0, 0.0)) == 5.0


def test_compiled_gives_nan_or_inf_for_domain_errors():
    out = Expr("sqrt(x)")(np.array([[-1.0, 0.0]]))
    assert not np.isfinite(out[0]) or out[0] <= 0


def test_spacing_from_config():
    assert isinstance(spacing_from_config({"kind": "constant", "h_s": 0.1}), Constant)
    f = spacing_from_config({"kind": "preset", "name": "maze2d", "h_s": 0.2})
    assert f.h_s == 0.2 and f.dim == 2
    g = spacing_from_config({"kind": "expr", "src": "1 + x^2"})
    assert g.value((2.0, 0.0)) == 5.0
    with pytest.raises(ValueError):
        spacing_from_config({"kind": "spline"})
    for f in (Constant(0.1), Preset("maze3d", 0.5), Expr("x + 2", 0.1)):
        assert spacing_from_config(f.to_config()).to_config() == f.to_config()


# -------------------------------------------------------------- parser


@pytest.mark.parametrize(
    "src, env, want",
    [
        ("1 + 2 * 3", {}, 7.0),
        ("(1 + 2) * 3", {}, 9.0),
        ("2 ^ 3 ^ 2", {}, 512.0),
        ("-2 ^ 2", {}, -4.0),
        ("2 ^ -1", {}, 0.5),
        ("8 / 4 / 2", {}, 1.0),
        ("1 - 2 - 3", {}, -4.0),
        ("min(x, y) + max(x, y)", {"x": 1.0, "y": 5.0}, 6.0),
        ("hypot(3, 4)", {}, 5.0),
        ("arg(0, 0)", {}, 0.0),
        ("atan2(1, 1) * 4", {}, math.pi),
        ("2*pi", {}, 2 * math.pi),
        ("1.5e2 + .5", {}, 150.5),
        ("abs(-x)", {"x": 3.0}, 3.0),
        ("exp(0) + tan(0)", {}, 1.0),
    ],
)
def test_evaluate(src, env, want):
    node = expr.parse(src, None)
    assert expr.evaluate(node, env) == pytest.approx(want, rel=1e-15)


@pytest.mark.parametrize(
    "src, offset",
    [
        ("1 +", 3),
        ("(1 + 2", 6),
        ("1 + * 2", 4),
        ("foo(1)", 0),
        ("sin(1, 2)", 0),
        ("1 $ 2", 2),
        ("w + 1", 0),
        ("", 0),
        ("2 3", 2),
    ],
)
def test_syntax_errors(src, offset):
    with pytest.raises(expr.ExprSyntaxError) as err:
        parse_spacing_expr(src)
    assert err.value.offset == offset


def _trees():
    leaf = st.one_of(
        st.floats(min_value=0.0, max_value=1e6, allow_nan=False).map(expr.Num),
        st.sampled_from(["x", "y", "z"]).map(expr.Var),
    )

    def extend(children):
        return st.one_of(
            children.map(expr.Neg),
            st.builds(expr.BinOp, st.sampled_from(["+", "-", "*", "/", "^"]), children, children),
            st.builds(lambda f, a: expr.Call(f, (a,)), st.sampled_from(["sin", "cos", "tanh", "sqrt", "abs"]), children),
            st.builds(lambda f, a, b: expr.Call(f, (a, b)), st.sampled_from(["min", "max", "arg"]), children, children),
        )

    return st.recursive(leaf, extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(_trees())
def test_print_parse_round_trip(tree):
    src = expr.to_source(tree)
    again = expr.parse(src)
    assert expr.to_source(again) == src
    env = {"x": 0.3, "y": -1.7, "z": 2.2}

    def safe(n):
        try:
            return expr.evaluate(n, env)
        except (ValueError, ZeroDivisionError, OverflowError):
            return "error"

    a, b = safe(tree), safe(again)
    if isinstance(a, float) and isinstance(b, float):
        assert a == b or (math.isnan(a) and math.isnan(b))
    else:
        assert a == b


def test_compile_rejects_deep_stack():
    src = "(x + " * 60 + "1" + ")" * 60
    node = expr.parse(src)
    with pytest.raises(ValueError, match="stack"):
        expr.compile_program(node, ("x", "y", "z"))


def test_variables_of():
    assert expr.variables_of(expr.parse("x + sin(z)")) == {"x", "z"}
