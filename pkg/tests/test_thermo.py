import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfsemigroup.errors import BracketFailure, ConfigError, NodeBudgetExceeded, NotMonotone
from mfsemigroup.rational import MultiMap, SpherePoint, rmap_eval
from mfsemigroup.thermo import (
    HolderFamily,
    auto_depth,
    build_leaf_tables,
    free_energy,
    free_energy_table,
    gamma_root,
    pressure_estimate,
    write_free_energy_csv,
)

from conftest import power_map

BASE = SpherePoint(1 + 0j)
HALF = HolderFamily.log_prob([0.5, 0.5])


def scalar_power_t(beta: float, degrees=(2, 3), probs=(0.5, 0.5)) -> float:
    """Independent scalar oracle: root of sum p_i^beta d_i^(1-t) = 1."""

    def g(t):
        return sum(p**beta * d ** (1.0 - t) for p, d in zip(probs, degrees)) - 1.0

    lo, hi = -50.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# potential families


def test_log_prob_validation():
    with pytest.raises(ConfigError):
        HolderFamily.log_prob([0.5, 0.6])
    with pytest.raises(ConfigError):
        HolderFamily.log_prob([1.0])
    fam = HolderFamily.log_prob([0.25, 0.75])
    assert fam.kind == "log_prob"


# ---------------------------------------------------------------------------
# leaf tables


def test_leaf_counts(power_pair):
    coarse, fine = build_leaf_tables(power_pair, HALF, BASE, 1)
    assert len(coarse.A) == 5  # 2 + 3 preimages
    assert len(fine.A) == 25
    coarse2, fine2 = build_leaf_tables(power_pair, HALF, BASE, 2)
    assert len(coarse2.A) == 25
    assert len(fine2.A) == 125


def test_leaf_word_decodes_to_forward_orbit(power_pair):
    coarse, fine = build_leaf_tables(power_pair, HALF, BASE, 2)
    for j in (0, 7, 24, 60, 124):
        w = fine.word(j)
        assert len(w) == 3
        z = fine.leaf_point(j)
        for letter in w:
            z = rmap_eval(power_pair.maps[letter], z)
        # forward orbit along the word returns to the base point
        assert abs(z.value - BASE.value) < 1e-6


def test_node_budget(power_pair):
    with pytest.raises(NodeBudgetExceeded):
        build_leaf_tables(power_pair, HALF, BASE, 30)


def test_auto_depth(power_pair, single_square):
    d = auto_depth(power_pair)
    assert d == 9  # 5^10 under 2e7, 5^11 over
    assert auto_depth(single_square) == 23


# ---------------------------------------------------------------------------
# pressure oracles (exact for power maps based at |z| = 1)


@pytest.fixture(scope="module")
def pair_tables(power_pair):
    return build_leaf_tables(power_pair, HALF, BASE, 3)


def test_pressure_at_zero_zero(power_pair, pair_tables):
    # beta = 0, u = 0: counts leaves, P = log 5 per level
    p = pressure_estimate(pair_tables, 0.0, 0.0)
    assert p == pytest.approx(math.log(5.0), abs=1e-12)


def test_pressure_u_one(power_pair, pair_tables):
    # u = 1: sum d_i^(1-1) p_i^beta = 2 * 2^(-beta); P = log 2 - beta log 2 + ...
    p = pressure_estimate(pair_tables, 1.0, 1.0)
    assert p == pytest.approx(math.log(2.0 * 0.5), abs=1e-10)  # = 0


def test_pressure_example_log_five_halves(power_pair, pair_tables):
    # beta = 1, u = 1: sum p_i d_i^0 = 1 -> log 1 = 0; instead check
    # beta = 0, u = 1: sum d_i^0 = 2 -> log 2
    p = pressure_estimate(pair_tables, 0.0, 1.0)
    assert p == pytest.approx(math.log(2.0), abs=1e-10)
    # beta = -1, u = 2: sum p^-1 d^-1 = 1 + 2/3 -> log(5/3)
    p2 = pressure_estimate(pair_tables, -1.0, 2.0)
    assert p2 == pytest.approx(math.log(1.0 + 2.0 / 3.0), abs=1e-10)


# ---------------------------------------------------------------------------
# free energy


def test_free_energy_matches_scalar_oracle(power_pair, pair_tables):
    for beta in (-2.0, -0.5, 0.0, 0.75, 3.0):
        t = free_energy(power_pair, HALF, beta, pair_tables)
        assert t == pytest.approx(scalar_power_t(beta), abs=1e-6)


def test_free_energy_table_grid(power_pair):
    grid = np.linspace(-2.0, 2.0, 9)
    ft = free_energy_table(power_pair, HALF, grid, depth=3)
    assert ft.depth == 3
    for beta, t in zip(ft.betas, ft.t_values):
        assert t == pytest.approx(scalar_power_t(float(beta)), abs=1e-6)
    # critical exponent at beta = 0
    j0 = int(np.argmin(np.abs(ft.betas)))
    assert ft.t_values[j0] == pytest.approx(1.7879, abs=2e-3)


def test_free_energy_table_requires_increasing_grid(power_pair):
    with pytest.raises(ConfigError):
        free_energy_table(power_pair, HALF, np.array([0.0, 0.0, 1.0, 2.0, 3.0]), depth=2)


def test_gamma_root_power_pair(power_pair, pair_tables):
    g = gamma_root(power_pair, HALF, pair_tables)
    assert g == pytest.approx(math.log2(5.0), abs=1e-9)


def test_gamma_root_rejects_mixed_sign(power_pair, pair_tables):
    fam = HolderFamily.constant([1.0, -1.0])
    tables = build_leaf_tables(power_pair, fam, BASE, 3)
    with pytest.raises(NotMonotone):
        gamma_root(power_pair, fam, tables)


def test_bracket_failure_from_unreachable_root(power_pair):
    # a potential so large that the root in u sits far outside the search bound
    fam = HolderFamily.constant([200.0, 200.0])
    tables = build_leaf_tables(power_pair, fam, BASE, 2)
    with pytest.raises(BracketFailure):
        free_energy(power_pair, fam, 1.0, tables)


@given(
    st.floats(0.05, 0.95),
    st.integers(2, 4),
    st.integers(2, 4),
)
@settings(max_examples=20, deadline=None)
def test_free_energy_convex_property(p1, d1, d2):
    """t(beta) is convex for any monomial pair and any branch weights."""
    mm = MultiMap((power_map(d1), power_map(d2)))
    fam = HolderFamily.log_prob([p1, 1.0 - p1])
    grid = np.linspace(-3.0, 3.0, 13)
    ft = free_energy_table(mm, fam, grid, depth=2)
    t = ft.t_values
    second = t[:-2] - 2.0 * t[1:-1] + t[2:]
    assert float(second.min()) >= -1e-4


def test_csv_output(tmp_path, power_pair):
    grid = np.linspace(-1.0, 1.0, 5)
    ft = free_energy_table(power_pair, HALF, grid, depth=2)
    path = tmp_path / "fe.csv"
    write_free_energy_csv(ft, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "beta,t,residual,gap"
    assert len(lines) == 6


def test_warm_start_consistency(power_pair, pair_tables):
    # the same beta solved cold and warm agrees to bisection tolerance
    t_cold = free_energy(power_pair, HALF, 1.5, pair_tables)
    t_warm = free_energy(power_pair, HALF, 1.5, pair_tables, u_init=t_cold + 0.3)
    assert t_warm == pytest.approx(t_cold, abs=1e-7)
