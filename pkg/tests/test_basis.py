from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alfdehaze.basis import (
    EPS_AIRLIGHT,
    AirlightField,
    BasisSet,
    build_basis,
    coordinate_grid,
    eval_field,
    legendre_1d,
    normalize_coords,
    read_weights_csv,
    write_weights_csv,
)


def legendre_monomial(k, u):
    """Explicit sum formula for P_k, independent of the three-term recurrence."""
    return sum((-1) ** j * comb(k, j) * comb(2 * k - 2 * j, k) * u ** (k - 2 * j)
               for j in range(k // 2 + 1)) / 2 ** k


def test_legendre_known_values():
    assert legendre_1d(0, 0.37) == 1.0
    assert legendre_1d(1, 0.5) == 0.5
    assert legendre_1d(2, 1.0) == 1.0
    assert legendre_1d(2, 0.0) == -0.5


@given(st.integers(0, 8), st.floats(-1.5, 1.5))
def test_legendre_matches_explicit_formula(k, u):
    assert legendre_1d(k, u) == pytest.approx(legendre_monomial(k, u), abs=1e-12)


@pytest.mark.parametrize("n,cross,m", [(0, False, 1), (0, True, 1), (2, False, 5), (3, True, 10),
                                       (4, True, 15), (2, True, 6), (3, False, 7)])
def test_member_counts(n, cross, m):
    assert len(build_basis(n, cross)) == m


def test_member_order():
    assert build_basis(2).degrees == ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2))
    assert build_basis(2, True).degrees == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    for n in range(5):
        b = build_basis(n, True)
        assert b.degrees[0] == (0, 0)
        assert all(a + c <= n for a, c in b.degrees)


def test_normalize_coords():
    assert normalize_coords(0, 0, 17, 9) == (-1.0, -1.0)
    assert normalize_coords(16, 8, 17, 9) == (1.0, 1.0)
    assert normalize_coords(8, 4, 17, 9) == (0.0, 0.0)
    assert normalize_coords(0, 0, 1, 1) == (0.0, 0.0)


def test_dc_only_field_is_constant():
    b = build_basis(2)
    w = np.zeros((3, 5))
    w[:, 0] = 0.8
    f = AirlightField(w, b, 7, 9)
    assert np.allclose(f.values(), 0.8)
    assert eval_field(f, 3, 2, "g") == pytest.approx(0.8)


def test_linear_u_member():
    b = build_basis(2)
    w = np.zeros((3, 5))
    w[:, 0] = 0.8
    w[:, 1] = 0.1
    f = AirlightField(w, b, 5, 11)
    assert eval_field(f, 10, 2, "r") == pytest.approx(0.9)
    assert eval_field(f, 0, 2, "r") == pytest.approx(0.7)


def test_eval_is_clamped():
    f = AirlightField.constant((-0.5, 0.5, 2.0), 3, 3)
    assert eval_field(f, 0, 0, 0) == EPS_AIRLIGHT
    assert eval_field(f, 0, 0, 2) == 1.0


@pytest.mark.parametrize("order,cross", [(2, False), (3, True), (4, True)])
def test_field_matches_monomial_oracle(rng, order, cross):
    b = build_basis(order, cross)
    h, w = 6, 8
    weights = rng.uniform(-0.05, 0.05, size=(3, len(b)))
    weights[:, 0] = 0.6
    f = AirlightField(weights, b, h, w)
    grid = f.values()
    for y in range(h):
        for x in range(w):
            u = 2 * x / (w - 1) - 1
            v = 2 * y / (h - 1) - 1
            for c in range(3):
                ref = sum(weights[c, i] * legendre_monomial(a, u) * legendre_monomial(bb, v)
                          for i, (a, bb) in enumerate(b.degrees))
                ref = min(max(ref, EPS_AIRLIGHT), 1.0)
                assert abs(grid[y, x, c] - ref) < 1e-12
                assert abs(eval_field(f, x, y, c) - ref) < 1e-12


@pytest.mark.parametrize("order,cross", [(2, False), (3, True), (4, True)])
def test_discrete_orthogonality(order, cross):
    # cell-centred samples; the endpoint-inclusive grid gives exactly 0.0101 for P0*P2
    x = -1 + (2 * np.arange(101) + 1) / 101
    u, v = np.meshgrid(x, x)
    g = build_basis(order, cross).evaluate(u, v)
    m = len(g)
    for i in range(m):
        for j in range(i + 1, m):
            assert abs(np.mean(g[i] * g[j])) < 1e-2


def test_constant_field_equals_dc_only_alf(rng):
    cbr = AirlightField.constant((0.7, 0.8, 0.9), 12, 10)
    w = np.zeros((3, 5))
    w[:, 0] = (0.7, 0.8, 0.9)
    alf = AirlightField(w, build_basis(2), 12, 10)
    assert np.array_equal(cbr.values(), alf.values())


def test_adjacent_pixel_lipschitz_bound(rng):
    b = build_basis(3, True)
    h, w = 40, 50
    weights = rng.normal(scale=0.2, size=(3, len(b)))
    f = AirlightField(weights, b, h, w)
    vals = f.values()
    fine = np.linspace(-1, 1, 401)
    uu, vv = np.meshgrid(fine, fine)
    du, dv = b.evaluate_grad(uu, vv)
    max_du = np.abs(du).max(axis=(1, 2))
    max_dv = np.abs(dv).max(axis=(1, 2))
    for c in range(3):
        bound_x = np.abs(weights[c]) @ max_du * 2 / (w - 1)
        bound_y = np.abs(weights[c]) @ max_dv * 2 / (h - 1)
        assert np.abs(np.diff(vals[..., c], axis=1)).max() <= bound_x + 1e-12
        assert np.abs(np.diff(vals[..., c], axis=0)).max() <= bound_y + 1e-12


def test_coordinate_grid_shape():
    u, v = coordinate_grid(3, 5)
    assert u.shape == v.shape == (3, 5)
    assert u[0, -1] == 1.0 and v[-1, 0] == 1.0


def test_weights_csv_round_trip(tmp_path, rng):
    b = build_basis(3, True)
    f = AirlightField(rng.normal(size=(3, len(b))), b, 4, 6)
    write_weights_csv(f, tmp_path / "w.csv")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "channel,index,degree_u,degree_v,weight"
    assert len(lines) == 1 + 3 * len(b)
    back = read_weights_csv(tmp_path / "w.csv", 4, 6)
    assert back.basis == b
    assert np.array_equal(back.weights, f.weights)


def test_basis_rejects_negative_order():
    with pytest.raises(ValueError):
        BasisSet(-1)


@settings(max_examples=25)
@given(st.integers(1, 30), st.integers(1, 30))
def test_normalized_coords_stay_in_range(w, h):
    u, v = coordinate_grid(h, w)
    assert np.all(np.abs(u) <= 1) and np.all(np.abs(v) <= 1)


def test_endpoint_grid_orthogonality_is_only_approximate():
    # the pixel grid includes both endpoints, so the mean of P2 is 0.01 exactly
    g = build_basis(2).on_grid(101, 101)
    assert np.mean(g[0] * g[3]) == pytest.approx(0.01, abs=1e-12)
