"""Quadrature driver and the assembled tail approximation."""
import math
import warnings

import numpy as np
import pytest

from fieldtail import (
    FamilySpec,
    FieldContext,
    Grid,
    QuadratureError,
    RegionSpec,
    ValidityWarning,
    tail_approx,
    tail_approx_multi,
)
from fieldtail.approximation import (
    _gl_nodes,
    boundary_coefficient,
    boundary_integrand,
    interior_integrand,
    quadrature_1d,
    quadrature_2d,
    tail_prefactor,
)
from fieldtail.numerics import normal_pdf

from conftest import make_signal, naive_local

# frozen by tests/oracles/compute_frozen.py
SIN_SIN_INT = 0.40528473456935109   # int_0^1 int_0^1 sin(pi t1) sin(pi t2) = 4/pi^2
EXP_INT = 1.7182818284590452        # int_0^1 e^t = e - 1
PHI_3 = 0.0044318484119380072


def test_quadrature_2d_constant():
    res = quadrature_2d(lambda ts: np.ones(ts.shape[0]), tol=1e-12, max_refinements=1)
    assert res.value == pytest.approx(1.0, abs=1e-14)


def test_quadrature_2d_product_sine():
    f = lambda ts: np.sin(np.pi * ts[:, 0]) * np.sin(np.pi * ts[:, 1])
    res = quadrature_2d(f, tol=1e-10)
    assert res.value == pytest.approx(SIN_SIN_INT, rel=1e-12)
    assert res.error <= 1e-10 * SIN_SIN_INT


def test_quadrature_1d_exponential():
    res = quadrature_1d(lambda s: np.exp(s), (0.0, 1.0), tol=1e-10)
    assert res.value == pytest.approx(EXP_INT, rel=1e-13)


def test_quadrature_scalar_callable():
    res = quadrature_1d(lambda s: math.exp(s), (0.0, 1.0), tol=1e-10, vectorized=False)
    assert res.value == pytest.approx(EXP_INT, rel=1e-13)


def test_quadrature_vector_components():
    # (N,2) integrand: both columns converge in the same pass
    f = lambda s: np.column_stack([np.exp(s), np.sin(np.pi * s)])
    res = quadrature_1d(f, (0.0, 1.0), tol=1e-10)
    assert res.value[0] == pytest.approx(EXP_INT, rel=1e-12)
    assert res.value[1] == pytest.approx(2.0 / np.pi, rel=1e-12)


def test_quadrature_doubling_invariant():
    # the reported proxy bounds the change from one more refinement
    f = lambda ts: np.exp(-3.0 * ts[:, 0]) * np.cos(4.0 * ts[:, 1])
    res = quadrature_2d(f, tol=1e-6)

    def fixed(panels):
        n1, w1 = _gl_nodes(0.0, 1.0, panels)
        n2, w2 = _gl_nodes(0.0, 1.0, panels)
        g1, g2 = np.meshgrid(n1, n2, indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        return float(np.outer(w1, w2).ravel() @ f(pts))

    next_change = abs(fixed(2 * res.panels) - fixed(res.panels))
    assert next_change <= res.error + 1e-15


def test_quadrature_error_on_rough_integrand():
    # an integrable kink cannot meet a tight tolerance in one doubling
    f = lambda s: np.sqrt(np.abs(s - 1.0 / 3.0))
    with pytest.raises(QuadratureError) as exc:
        quadrature_1d(f, (0.0, 1.0), tol=1e-14, max_refinements=1)
    assert exc.value.panels >= 8


def test_region_spec_edges():
    region = RegionSpec.unit_square()
    assert {e.name for e in region.edges} == {"bottom", "top", "left", "right"}
    for e in region.edges:
        assert math.hypot(*e.gdot) == 1.0
        pts = e.points(np.array([0.0, 0.5, 1.0]))
        # edge points satisfy their own constraint with equality, others inside
        for p in pts:
            vals = RegionSpec.constraints(p)
            assert vals.max() == pytest.approx(0.0, abs=1e-15)
    assert np.all(RegionSpec.constraints((0.4, 0.6)) < 0)


def test_prefactor_values():
    assert tail_prefactor(3.0) == pytest.approx(3.0 / (2.0 * math.pi) * PHI_3, rel=1e-14)
    # same thing written through the two-dimensional normal density
    x = 2.7
    alt = x * normal_pdf(x) / (2.0 * math.pi)
    assert tail_prefactor(x) == pytest.approx(alt, rel=1e-14)
    assert boundary_coefficient(2.0) == pytest.approx(math.sqrt(math.pi / 2.0) / 2.0, rel=1e-15)


def test_interior_integrand_naive_assembly(bern01):
    ctx = FieldContext(Grid(4), bern01, 10.0)
    t = make_signal(0.5, 0.5, 10.0)
    x = 2.5
    ref = naive_local(ctx.grid, bern01, t, x)
    vol = math.sqrt(np.linalg.det(ref["lam"]))
    want_full = math.exp(-ref["delta"]) * vol * (1.0 - ref["r"] ** 2 / (2.0 * ref["sigma2"]))
    assert interior_integrand(ctx, t.t, x) == pytest.approx(want_full, rel=1e-10)
    assert interior_integrand(ctx, t.t, x, mode="gaussian") == pytest.approx(vol, rel=1e-12)
    with pytest.raises(ValueError):
        interior_integrand(ctx, t.t, x, mode="exact")


def test_boundary_integrand_naive_assembly(bern01):
    ctx = FieldContext(Grid(4), bern01, 20.0)
    region = RegionSpec.unit_square()
    bottom = region.edges[0]
    t = np.array([0.35, 0.0])
    x = 2.9
    ref = naive_local(ctx.grid, bern01, make_signal(t[0], t[1], 20.0), x)
    g = bottom.gdot
    quad = float(g @ np.linalg.solve(ref["lam"], g))
    want = math.exp(-ref["delta"]) * math.sqrt(np.linalg.det(ref["lam"]) * quad)
    assert boundary_integrand(ctx, t, bottom, x) == pytest.approx(want, rel=1e-10)
    gauss = boundary_integrand(ctx, t, bottom, x, mode="gaussian")
    assert gauss == pytest.approx(math.sqrt(np.linalg.det(ref["lam"]) * quad), rel=1e-11)


def test_tail_approx_matches_scalar_quadrature(bern01):
    # the vectorized multi-threshold pass must agree with direct quadrature of
    # the pointwise integrands
    ctx = FieldContext(Grid(3), bern01, 10.0)
    region = RegionSpec.unit_square()
    x = 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        res = tail_approx(ctx, region, x, quad_tol=1e-5, start_panels=2)
        inner = quadrature_2d(
            lambda t: interior_integrand(ctx, t, x),
            tol=1e-5, start_panels=2, vectorized=False,
        )
        bnd = sum(
            quadrature_1d(
                lambda s, e=e: boundary_integrand(ctx, e.points(np.array([s]))[0], e, x),
                (0.0, 1.0), tol=1e-5, start_panels=2, vectorized=False,
            ).value
            for e in region.edges
        )
    assert res.interior == pytest.approx(inner.value, rel=1e-10)
    assert res.boundary == pytest.approx(bnd, rel=1e-10)
    want = tail_prefactor(x) * (inner.value + boundary_coefficient(x) * bnd)
    assert res.p_full == pytest.approx(want, rel=1e-10)


def test_tail_approx_monotone_in_threshold(ctx_m5_d10):
    res = tail_approx_multi(ctx_m5_d10, None, [2.5, 2.8, 3.1])
    ps = [r.p_full for r in res]
    gs = [r.p_gauss for r in res]
    assert ps[0] > ps[1] > ps[2] > 0.0
    assert gs[0] > gs[1] > gs[2] > 0.0
    assert all(r.p_full < 1.0 for r in res)


def test_tail_approx_gaussian_family_collapse():
    ctx = FieldContext(Grid(3), FamilySpec.gaussian(), 10.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        res = tail_approx(ctx, None, 2.2)
    assert res.p_full == pytest.approx(res.p_gauss, rel=1e-12)
    assert res.interior == pytest.approx(res.diagnostics["interior_gaussian"], rel=1e-12)


def test_tail_approx_validity_warning():
    # 5x5 grid: x = 3 has x^4 = 81 above the pixel count
    ctx = FieldContext(Grid(2), FamilySpec.bernoulli(0.1), 10.0)
    with pytest.warns(ValidityWarning):
        tail_approx(ctx, None, 3.0)


def test_tail_approx_rejects_bad_input(ctx_m3_d10):
    with pytest.raises(ValueError):
        tail_approx(ctx_m3_d10, None, 2.5, mode="quick")
    with pytest.raises(ValueError):
        tail_approx_multi(ctx_m3_d10, None, [])
    with pytest.raises(ValueError):
        tail_approx_multi(ctx_m3_d10, None, [2.5, -1.0])


def test_tail_approx_multi_matches_single(ctx_m3_d10):
    xs = [1.8, 2.3]
    multi = tail_approx_multi(ctx_m3_d10, None, xs)
    for x, r in zip(xs, multi):
        single = tail_approx(ctx_m3_d10, None, x)
        assert r.p_full == pytest.approx(single.p_full, rel=1e-13)
        assert r.p_gauss == pytest.approx(single.p_gauss, rel=1e-13)


# regression pins: boundary share of the assembled estimate, full mode, first
# run of this implementation (values have no external reference)
BOUNDARY_SHARE_PINS = {
    (5, 10.0, 2.5): 0.711020867259,
    (5, 20.0, 2.8): 0.598870337812,
    (5, 50.0, 3.1): 0.485606206333,
}


def test_boundary_share_pins(table1_approx):
    results, _ = table1_approx
    for (m, D, x), want in BOUNDARY_SHARE_PINS.items():
        res = next(r for r in results[D] if r.x == x)
        share = (
            boundary_coefficient(x) * res.boundary
            / (res.interior + boundary_coefficient(x) * res.boundary)
        )
        assert share == pytest.approx(want, rel=1e-6), (m, D, x)
