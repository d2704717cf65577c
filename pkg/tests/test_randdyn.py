import json
import math

import numpy as np
import pytest

from mfsemigroup.errors import (
    ConfigError,
    DegenerateFit,
    InvalidEscapeRadius,
    NotPolynomial,
    OutOfRange,
)
from mfsemigroup.rational import (
    INF,
    MultiMap,
    Polynomial,
    RationalMap,
    SpherePoint,
)
from mfsemigroup.randdyn import (
    PixelField,
    TrapRegion,
    alpha_minus_bound,
    coliseum_fixed_point,
    coliseum_monte_carlo,
    estimate_escape_radius,
    holder_exponent,
    load_field,
    save_field,
    save_field_png,
    validate_escape_radius,
    write_holder_csv,
    holder_survey,
)

from conftest import GOLDEN_P1, power_map

WINDOW = (-2.0, 2.0, -2.0, 2.0)


def make_field(values, window=(-1.0, 1.0, -1.0, 1.0), **meta):
    base = {"mode": "synthetic", "noise_floor": 0.0}
    base.update(meta)
    return PixelField(window, (values.shape[1], values.shape[0]), values, base)


# ---------------------------------------------------------------------------
# escape radius


def test_escape_radius_validation(power_pair):
    validate_escape_radius(power_pair, 2.0)
    with pytest.raises(InvalidEscapeRadius):
        validate_escape_radius(power_pair, 1.5)  # below the hard floor
    with pytest.raises(InvalidEscapeRadius):
        validate_escape_radius(power_pair, 1.01 * 2.0**0.5)


def rational_pair():
    # (z^2 + 1)/z is degree 2 but not a polynomial
    f = RationalMap(Polynomial([1.0, 0.0, 1.0]), Polynomial([0.0, 1.0]))
    return MultiMap((f, power_map(2)))


def test_escape_radius_rejects_rational():
    with pytest.raises(NotPolynomial):
        estimate_escape_radius(rational_pair())


def test_escape_radius_estimate(power_pair, coliseum_pair):
    r = estimate_escape_radius(power_pair)
    validate_escape_radius(power_pair, r)
    r2 = estimate_escape_radius(coliseum_pair)
    assert r2 > 5.0  # z^4/64 needs |z| >= 128^(1/3) ~ 5.04 to double
    validate_escape_radius(coliseum_pair, r2)


# ---------------------------------------------------------------------------
# Monte Carlo field


def axis_centers(window, resolution):
    x0, x1, y0, y1 = window
    W, H = resolution
    xs = x0 + (np.arange(W) + 0.5) * (x1 - x0) / W
    ys = y0 + (np.arange(H) + 0.5) * (y1 - y0) / H
    return xs, ys


def test_monte_carlo_known_pixels(single_square):
    # z^2 alone: everything outside the unit circle escapes, inside tends to 0
    traps = [TrapRegion(SpherePoint(0j), 0.3)]
    f = coliseum_monte_carlo(
        single_square, [1.0], WINDOW, (32, 32), 200, 2.0, traps, rng_seed=1
    )
    xs, ys = axis_centers(WINDOW, (32, 32))
    vals = f.values
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            r = math.hypot(x, y)
            if r > 1.3:
                assert vals[i, j] == 1.0
            elif r < 0.7:
                assert vals[i, j] == 0.0


def test_monte_carlo_deterministic(coliseum_pair):
    # the composed pair genuinely mixes branches, so the field depends on
    # the sample paths (unlike monomial pairs, which share their basins)
    traps = [TrapRegion(SpherePoint(0j), 0.4)]
    args = (coliseum_pair, [0.5, 0.5], (-4, 4, -4, 4), (24, 24), 100, 5.2, traps)
    a = coliseum_monte_carlo(*args, 7)
    b = coliseum_monte_carlo(*args, 7)
    assert np.array_equal(a.values, b.values)
    c = coliseum_monte_carlo(*args, 8)
    assert not np.array_equal(a.values, c.values)


def test_monte_carlo_rejects_bad_inputs(power_pair):
    traps = [TrapRegion(SpherePoint(0j), 0.3)]
    with pytest.raises(ConfigError):
        coliseum_monte_carlo(power_pair, [0.5, 0.5], WINDOW, (16, 9000), 10, 2.0, traps, 0)
    with pytest.raises(ConfigError):
        coliseum_monte_carlo(power_pair, [0.7, 0.5], WINDOW, (16, 16), 10, 2.0, traps, 0)
    with pytest.raises(InvalidEscapeRadius):
        coliseum_monte_carlo(power_pair, [0.5, 0.5], WINDOW, (16, 16), 10, 1.2, traps, 0)


# ---------------------------------------------------------------------------
# fixed-point field


def test_fixed_point_square_indicator(single_square):
    traps = [TrapRegion(SpherePoint(0j), 0.3)]
    f = coliseum_fixed_point(single_square, [1.0], WINDOW, (64, 64), traps, tol=1e-8)
    assert f.meta["residual"] < 1e-8
    xs, ys = axis_centers(WINDOW, (64, 64))
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            r = math.hypot(x, y)
            if r > 1.3:
                assert f.values[i, j] > 0.999
            elif r < 0.7:
                assert f.values[i, j] < 0.001


def test_fixed_point_values_in_unit_interval(coliseum_pair):
    traps = [
        TrapRegion(SpherePoint(0j), 0.4),
        TrapRegion(SpherePoint(-1 + 0j), 0.15),
    ]
    f = coliseum_fixed_point(
        coliseum_pair, [0.5, 0.5], (-4, 4, -4, 4), (64, 64), traps,
        tol=1e-6, escape_radius=5.2,
    )
    assert float(f.values.min()) >= 0.0
    assert float(f.values.max()) <= 1.0
    assert f.meta["iterations"] > 1


# ---------------------------------------------------------------------------
# field I/O


def test_field_roundtrip(tmp_path, power_pair):
    traps = [TrapRegion(SpherePoint(0j), 0.3)]
    f = coliseum_monte_carlo(power_pair, [0.5, 0.5], WINDOW, (16, 16), 50, 2.0, traps, 3)
    p = tmp_path / "field.grid"
    save_field(f, p)
    g = load_field(p)
    assert np.array_equal(f.values, g.values)
    assert g.window == f.window
    assert g.meta["samples"] == 50
    # header is a single JSON line with sorted keys
    header = p.read_bytes().split(b"\n", 1)[0]
    meta = json.loads(header)
    assert list(meta.keys()) == sorted(meta.keys())


def test_field_png(tmp_path, single_square):
    traps = [TrapRegion(SpherePoint(0j), 0.3)]
    f = coliseum_monte_carlo(single_square, [1.0], WINDOW, (16, 16), 50, 2.0, traps, 3)
    p = tmp_path / "field.png"
    save_field_png(f, p)
    data = p.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"


# ---------------------------------------------------------------------------
# pointwise exponents: planted singularities


def planted_field(exponent: float, size: int = 512):
    """rho(y) = min(1, |y - z0|^h) with z0 at an exact pixel center."""
    xs = np.linspace(-1.0, 1.0, size, endpoint=False) + 1.0 / size
    X, Y = np.meshgrid(xs, xs)
    z0 = complex(xs[size // 2], xs[size // 2])
    R = np.abs((X - z0.real) + 1j * (Y - z0.imag))
    vals = np.minimum(1.0, R**exponent)
    f = make_field(vals.astype(np.float64))
    return f, SpherePoint(z0)


PLANT_RADII = [0.04 * 1.5**k for k in range(7)]


@pytest.mark.parametrize("h", [0.5, 0.7, 0.9])
def test_planted_exponent_recovery(h):
    f, z0 = planted_field(h)
    slope, r2 = holder_exponent(f, z0, PLANT_RADII)
    assert r2 > 0.95
    assert slope == pytest.approx(h, abs=0.05)


def test_holder_needs_five_radii():
    f, z0 = planted_field(0.5, size=64)
    with pytest.raises(ConfigError):
        holder_exponent(f, z0, [0.1, 0.2, 0.3, 0.4])


def test_holder_out_of_window():
    f, _ = planted_field(0.5, size=64)
    with pytest.raises(OutOfRange):
        holder_exponent(f, SpherePoint(5 + 5j), PLANT_RADII)
    with pytest.raises(OutOfRange):
        holder_exponent(f, INF, PLANT_RADII)


def test_holder_flat_field_sentinel():
    vals = np.full((64, 64), 0.25)
    f = make_field(vals)
    slope, r2 = holder_exponent(f, SpherePoint(0.01 + 0.01j), PLANT_RADII)
    assert math.isinf(slope)
    assert r2 == 1.0


def test_holder_survey_smoke(single_square):
    from mfsemigroup.julia import build_julia_cloud, repelling_fixed_point

    traps = [TrapRegion(SpherePoint(0j), 0.3)]
    field = coliseum_fixed_point(single_square, [1.0], WINDOW, (128, 128), traps, tol=1e-7)
    seed = repelling_fixed_point(single_square.maps[0], 0)
    cloud = build_julia_cloud(single_square, seed, 400, rng_seed=2)
    radii = [0.03 * 1.5**k for k in range(6)]
    rep = holder_survey(field, cloud, 50, radii, rng_seed=1)
    assert rep.summary["n_rows"] + rep.skipped == 50
    assert rep.note  # single-map caveat present
    # deterministic resampling
    rep2 = holder_survey(field, cloud, 50, radii, rng_seed=1)
    assert rep.summary == rep2.summary


def test_holder_csv(tmp_path, single_square):
    from mfsemigroup.julia import build_julia_cloud, repelling_fixed_point

    traps = [TrapRegion(SpherePoint(0j), 0.3)]
    field = coliseum_fixed_point(single_square, [1.0], WINDOW, (64, 64), traps, tol=1e-6)
    seed = repelling_fixed_point(single_square.maps[0], 0)
    cloud = build_julia_cloud(single_square, seed, 200, rng_seed=2)
    rep = holder_survey(field, cloud, 20, [0.05 * 1.4**k for k in range(5)], rng_seed=1)
    p = tmp_path / "holder.csv"
    write_holder_csv(rep, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "re,im,exponent,r2,n_radii"


# ---------------------------------------------------------------------------
# alpha_minus bound


def test_bound_golden(golden_pair):
    b = alpha_minus_bound(golden_pair, [GOLDEN_P1, 1.0 - GOLDEN_P1], 200, 60, rng_seed=3)
    # critical value 0 is fixed, so no Green contribution
    expected = -(
        GOLDEN_P1 * math.log(GOLDEN_P1) + (1 - GOLDEN_P1) * math.log(1 - GOLDEN_P1)
    ) / (GOLDEN_P1 * math.log(2.0) + (1 - GOLDEN_P1) * math.log(4.0))
    assert b == pytest.approx(expected, abs=1e-12)
    assert b == pytest.approx(0.6942, abs=1e-3)


def test_bound_single_map(single_square):
    assert alpha_minus_bound(single_square, [1.0], 50, 20, rng_seed=1) == 0.0


def test_bound_coliseum_pair(coliseum_pair):
    b = alpha_minus_bound(coliseum_pair, [0.5, 0.5], 300, 50, rng_seed=1)
    assert 0.0 < b < 1.0


def test_bound_rejects_rational_maps():
    with pytest.raises(NotPolynomial):
        alpha_minus_bound(rational_pair(), [0.5, 0.5], 10, 10, rng_seed=0)
