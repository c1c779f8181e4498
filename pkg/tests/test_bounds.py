import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from biasforge import bounds as bd
from biasforge.noise import NoiseParams


def test_all_zero_rates_give_zero():
    b = bd.breakdown(bd.BoundInputs(3, 3, 3, NoiseParams(0.0, 0.0, 0.0)))
    assert b.e_xl == 0.0 and b.e_zl == 0.0
    assert b.eps_x3 == b.eps_x_mz == b.eps_z1 == b.eps_z2 == 0.0


def test_breakdown_example_values():
    b = bd.breakdown(bd.BoundInputs(3, 3, 3, NoiseParams(p_x=1e-6, p_z=1e-3, p_zz=1e-6)))
    assert abs(b.eps_x3 - 9e-6) < 1e-18
    assert abs(b.eps_z2 - (3e-6 + 3 * (6e-3) ** 2)) < 1e-15  # 1.11e-4


def test_e_xl_bound_values():
    # 3.3e-5 + 3*(64+25)*1e-6 = 3.00e-4
    assert abs(bd.e_xl_bound(3, 3, 1e-6, 1e-3) - (3.3e-5 + 2.67e-4)) < 1e-12
    # r=1: 1.5e-5 + 13e-3
    assert abs(bd.e_xl_bound(3, 1, 1e-6, 1e-3) - 1.3015e-2) < 1e-9
    assert bd.e_xl_bound(3, 3, 0.0, 0.0) == 0.0


def test_e_zl_bound_values():
    v = bd.e_zl_bound(3, 3, 1e-6, 1e-3, 1e-6)
    assert abs(v - (1.728e-6 + 3e-6 + 2.7e-5 + 1.08e-4)) < 1e-12
    v1 = bd.e_zl_bound(3, 1, 1e-6, 1e-3, 1e-6)
    assert abs(v1 - (5.12e-7 + 3e-6 + 9e-6 + 4.8e-5)) < 1e-12
    assert bd.e_zl_bound(3, 1, 0.0, 0.0, 0.0) == 0.0


@pytest.mark.parametrize("fn", ["xl", "zl"])
def test_even_r_rejected(fn):
    with pytest.raises(bd.OddParityError):
        if fn == "xl":
            bd.e_xl_bound(3, 2, 1e-6, 1e-3)
        else:
            bd.e_zl_bound(3, 2, 1e-6, 1e-3, 1e-6)


def test_breakdown_recombines_to_combined_bounds():
    for r in (1, 3, 5):
        noise = NoiseParams(p_x=2e-6, p_z=5e-4, p_zz=3e-6)
        b = bd.breakdown(bd.BoundInputs(3, r, r, noise))
        assert math.isclose(b.e_xl, bd.e_xl_bound(3, r, noise.p_x, noise.p_z), rel_tol=1e-12)
        assert math.isclose(
            b.e_zl, bd.e_zl_bound(3, r, noise.p_x, noise.p_z, noise.p_zz), rel_tol=1e-12
        )
    assert b.e_xl == b.eps_x3 + b.eps_x_mzz
    assert b.e_zl == b.eps_z1 + b.eps_z2


def test_distinct_repetition_counts_kept_apart():
    noise = NoiseParams(p_x=1e-6, p_z=1e-3, p_zz=1e-6)
    b = bd.breakdown(bd.BoundInputs(3, 1, 3, noise))
    m_inputs = bd.BoundInputs(3, 1, 3, noise)
    with pytest.raises(ValueError):
        _ = m_inputs.m
    # eps_x_mz uses r_z only, eps_x3 uses r_zz only
    assert b.eps_x3 == 3 * 3 * 1e-6
    assert abs(b.eps_x_mz - (3 * 2 * 1e-6 + 5e-3)) < 1e-12


grid = st.sampled_from([0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.1])


@given(grid, grid, grid, st.sampled_from([1, 3, 5]))
def test_monotone_in_each_rate(p_x, p_z, p_zz, r):
    base_x = bd.e_xl_bound(3, r, min(p_x, p_z), p_z)
    base_z = bd.e_zl_bound(3, r, min(p_x, p_z), p_z, p_zz)
    bump = 1e-3
    assert bd.e_xl_bound(3, r, min(p_x, p_z) + bump, p_z) >= base_x
    assert bd.e_xl_bound(3, r, min(p_x, p_z), p_z + bump) >= base_x
    assert bd.e_zl_bound(3, r, min(p_x, p_z), p_z + bump, p_zz) >= base_z
    assert bd.e_zl_bound(3, r, min(p_x, p_z), p_z, p_zz + bump) >= base_z


def test_r_tradeoff_at_high_bias():
    # more repetitions help X, hurt Z
    p_z, eta = 1e-3, 1000.0
    p_x = p_z / eta
    assert bd.e_xl_bound(3, 3, p_x, p_z) < bd.e_xl_bound(3, 1, p_x, p_z)
    assert bd.e_zl_bound(3, 1, p_x, p_z, p_x) < bd.e_zl_bound(3, 3, p_x, p_z, p_x)


def test_sweep_single_point_matches_direct_calls():
    rows = bd.sweep(3, 3, eta_list=(100.0,), pz_range=(1e-3, 1e-3), points=2)
    for row in rows:
        assert row["e_xl"] == bd.e_xl_bound(3, 3, row["p_z"] / row["eta"], row["p_z"])
        assert row["e_zl"] == bd.e_zl_bound(
            3, 3, row["p_z"] / row["eta"], row["p_z"], row["p_z"] / row["eta"]
        )


def test_sweep_grid_shape_and_rules():
    rows = bd.sweep(3, 1, eta_list=(10.0, 100.0), pz_range=(1e-4, 1e-2), points=7, pzz_rule=5e-6)
    assert len(rows) == 14
    etas = {row["eta"] for row in rows}
    assert etas == {10.0, 100.0}
    with pytest.raises(ValueError):
        bd.sweep(3, 1, pz_range=(1e-2, 1e-4), points=0)


def test_bounds_may_exceed_one_unclamped():
    assert bd.e_zl_bound(3, 3, 0.1, 0.1, 0.1) > 1.0
