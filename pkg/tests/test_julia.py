import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfsemigroup.errors import NoRepellingFixedPoint
from mfsemigroup.julia import (
    SphereIndex,
    build_julia_cloud,
    check_expansion,
    check_separation,
    cloud_distance,
    embed,
    embed_one,
    load_cloud,
    repelling_fixed_point,
    save_cloud,
)
from mfsemigroup.rational import (
    INF,
    MultiMap,
    Polynomial,
    RationalMap,
    SpherePoint,
    chordal_distance,
    rmap_eval,
)

from conftest import power_map


# ---------------------------------------------------------------------------
# embedding and the spatial index


def test_embed_matches_chordal():
    pts = np.array([0.3 + 0.4j, 2.0 - 1.0j, 0j])
    at_inf = np.array([False, False, False])
    xyz = embed(pts, at_inf)
    for i in range(3):
        for j in range(3):
            d_euclid = float(np.linalg.norm(xyz[i] - xyz[j]))
            d_chordal = chordal_distance(SpherePoint(pts[i]), SpherePoint(pts[j]))
            assert d_euclid == pytest.approx(d_chordal, abs=1e-12)


def test_embed_infinity_is_north_pole():
    assert np.allclose(embed_one(INF), [0.0, 0.0, 1.0])


@given(
    st.integers(0, 2**32 - 1),
    st.integers(20, 200),
)
@settings(max_examples=15, deadline=None)
def test_sphere_index_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 3))
    z /= np.linalg.norm(z, axis=1)[:, None]
    idx = SphereIndex(z)
    probe = min(7, n)
    for i in range(probe):
        d, j = idx.nearest(z[i], skip=i)
        dists = np.linalg.norm(z - z[i], axis=1)
        dists[i] = np.inf
        assert d == pytest.approx(float(dists.min()), rel=1e-12)
        assert dists[j] == pytest.approx(float(dists.min()), rel=1e-12)


# ---------------------------------------------------------------------------
# repelling fixed points


def test_repelling_fixed_point_square():
    s = repelling_fixed_point(power_map(2), 0)
    assert not s.point.at_infinity
    assert s.point.value == pytest.approx(1.0 + 0j)
    assert "repelling" in s.provenance


def test_repelling_fixed_point_quartic():
    f = RationalMap(Polynomial([0.0, 0.0, -2.0, 0.0, 1.0]), Polynomial([1.0]))
    s = repelling_fixed_point(f)
    z = s.point
    img = rmap_eval(f, z)
    assert chordal_distance(img, z) < 1e-9


def test_no_repelling_fixed_point():
    # z/2 fixes 0 (attracting) and infinity is also non-repelling for this map?
    # infinity: w = 1/z chart gives w -> 2w, derivative 2 -> repelling at infinity.
    # Use z + 1 instead: the only fixed point is infinity with multiplier 1.
    f = RationalMap(Polynomial([1.0, 1.0]), Polynomial([1.0]))
    with pytest.raises(NoRepellingFixedPoint):
        repelling_fixed_point(f)


# ---------------------------------------------------------------------------
# cloud construction


@pytest.fixture(scope="module")
def square_cloud():
    mm = MultiMap((power_map(2),))
    seed = repelling_fixed_point(mm.maps[0], 0)
    return build_julia_cloud(mm, seed, 800, rng_seed=4)


def test_cloud_lies_on_unit_circle(square_cloud):
    # J(z^2) is the unit circle
    radii = [abs(p.value) for p in square_cloud.points if not p.at_infinity]
    assert len(radii) == len(square_cloud.points)
    assert max(abs(r - 1.0) for r in radii) < 1e-9


def test_cloud_epsilon_positive_and_small(square_cloud):
    assert 0.0 < square_cloud.cell_size < 0.2


def test_cloud_deterministic(power_pair):
    seed = repelling_fixed_point(power_pair.maps[0], 0)
    a = build_julia_cloud(power_pair, seed, 300, rng_seed=9)
    b = build_julia_cloud(power_pair, seed, 300, rng_seed=9)
    assert a.points == b.points
    c = build_julia_cloud(power_pair, seed, 300, rng_seed=10)
    assert a.points != c.points


def test_cloud_points_are_backward_images(power_pair):
    # every cloud point maps forward onto the Julia set of the pair;
    # for (z^2, z^3) that set is the unit circle
    seed = repelling_fixed_point(power_pair.maps[0], 0)
    cloud = build_julia_cloud(power_pair, seed, 500, rng_seed=2)
    assert max(abs(abs(p.value) - 1.0) for p in cloud.points) < 1e-9


def test_cloud_distance(square_cloud):
    d0 = cloud_distance(square_cloud, SpherePoint(1 + 0j))
    assert d0 < 0.05
    # chordal distance from z = 3 to the unit circle is about 0.89
    d2 = cloud_distance(square_cloud, SpherePoint(3 + 0j))
    assert 0.5 < d2 < 1.0


def test_cloud_csv_roundtrip(tmp_path, square_cloud):
    path = tmp_path / "cloud.csv"
    save_cloud(square_cloud, path)
    back = load_cloud(path)
    assert back.points == square_cloud.points
    assert back.cell_size == pytest.approx(square_cloud.cell_size, rel=1e-12)


# ---------------------------------------------------------------------------
# separation / expansion checks


def test_separation_vacuous_for_single_map(square_cloud):
    mm = MultiMap((power_map(2),))
    rep = check_separation(mm, square_cloud)
    assert rep.passed
    assert math.isinf(rep.margin)


def test_separation_fails_for_overlapping_powers(power_pair):
    seed = repelling_fixed_point(power_pair.maps[0], 0)
    cloud = build_julia_cloud(power_pair, seed, 1500, rng_seed=11)
    rep = check_separation(power_pair, cloud)
    assert not rep.passed


def test_separation_passes_for_coliseum_pair(coliseum_pair):
    # needs a cloud dense enough that 4*eps drops below the true
    # preimage-set gap (about 0.235 in chordal distance)
    seed = repelling_fixed_point(coliseum_pair.maps[0], 0)
    cloud = build_julia_cloud(coliseum_pair, seed, 10000, rng_seed=11)
    rep = check_separation(coliseum_pair, cloud)
    assert rep.passed
    assert rep.margin == pytest.approx(0.235, abs=0.01)


def test_expansion_passes_for_square(square_cloud):
    mm = MultiMap((power_map(2),))
    rep = check_expansion(mm, square_cloud, depth=5, samples=40, rng_seed=1)
    assert rep.passed
    # derivative of z^2 on the unit circle is exactly 2 -> growth margin 1
    assert rep.margin == pytest.approx(1.0, abs=1e-6)


def test_expansion_reports_details(power_pair):
    seed = repelling_fixed_point(power_pair.maps[0], 0)
    cloud = build_julia_cloud(power_pair, seed, 600, rng_seed=3)
    rep = check_expansion(power_pair, cloud, depth=4, samples=30, rng_seed=1)
    assert rep.passed
    assert "growth" in rep.details
