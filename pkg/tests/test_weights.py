import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spgrowth import _accel
from spgrowth import weights as wm
from spgrowth.errors import (
    DimensionError,
    InvalidInputError,
    IsolatedUnitError,
    SingularDistanceError,
)

R = wm.EARTH_RADIUS_KM


def law_of_cosines(lat1, lon1, lat2, lon2, radius=R):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(math.radians(lon1 - lon2))
    return radius * math.acos(max(-1.0, min(1.0, c)))


def test_great_circle_known_values():
    # one degree of longitude on the equator, a quarter meridian, antipodes
    assert wm.great_circle_distance((0, 0), (0, 1)) == pytest.approx(R * math.pi / 180, rel=1e-12)
    assert wm.great_circle_distance((0, 0), (90, 0)) == pytest.approx(R * math.pi / 2, rel=1e-12)
    assert wm.great_circle_distance((0, 0), (0, 180)) == pytest.approx(R * math.pi, rel=1e-12)
    assert wm.great_circle_distance(wm.Coordinates(10, 20), wm.Coordinates(10, 20)) == 0.0


def test_great_circle_matches_law_of_cosines():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a = (rng.uniform(-80, 80), rng.uniform(-180, 180))
        b = (rng.uniform(-80, 80), rng.uniform(-180, 180))
        assert wm.great_circle_distance(a, b) == pytest.approx(law_of_cosines(*a, *b), rel=1e-9, abs=1e-6)


def test_coordinates_validated():
    with pytest.raises(InvalidInputError):
        wm.Coordinates(91.0, 0.0)
    with pytest.raises(InvalidInputError):
        wm.great_circle_distance((0, 0), (0, 181))
    with pytest.raises(InvalidInputError):
        wm.distance_matrix([0, 1], [0, 1], radius=0)


def test_distance_matrix_properties():
    rng = np.random.default_rng(2)
    lat, lon = rng.uniform(-60, 60, 30), rng.uniform(-180, 180, 30)
    D = wm.distance_matrix(lat, lon)
    assert np.allclose(D, D.T)
    assert np.all(np.diag(D) == 0)
    assert D.max() <= math.pi * R + 1e-9
    assert D[3, 7] == pytest.approx(wm.great_circle_distance((lat[3], lon[3]), (lat[7], lon[7])), rel=1e-12)


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_backends_agree(backend):
    rng = np.random.default_rng(3)
    lat, lon = rng.uniform(-60, 60, 40), rng.uniform(-180, 180, 40)
    z = rng.uniform(1, 5, 40)
    D0 = wm.distance_matrix(lat, lon, backend="numpy")
    D1 = wm.distance_matrix(lat, lon, backend=backend)
    assert np.allclose(D0, D1, rtol=1e-13, atol=1e-9)
    for econ in wm.ECONOMIC_KINDS:
        for phys in wm.PHYSICAL_KINDS:
            W0 = wm.build_weights(lat, lon, z, phys, econ, backend="numpy")
            W1 = wm.build_weights(lat, lon, z, phys, econ, backend=backend)
            assert np.allclose(W0.entries, W1.entries, rtol=1e-12, atol=1e-15)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _accel.great_circle_matrix(np.zeros(2), np.zeros(2), 1.0, backend="cuda")


def test_physical_kernels():
    D = np.array([[0.0, 2.0, 4.0], [2.0, 0.0, 1.0], [4.0, 1.0, 0.0]])
    W = wm.physical_kernel(D, "inverse_square")
    assert W.entries[0, 1] == pytest.approx(0.25)
    assert W.entries[1, 2] == pytest.approx(1.0)
    assert W.kernel_tag["physical_scale"] == 1.0
    E = wm.physical_kernel(D, "neg_exponential")
    assert E.entries[0, 2] == pytest.approx(math.exp(-2.0))  # scaled by the largest distance
    assert E.entries[0, 1] == pytest.approx(math.exp(-1.0))
    assert np.all(np.diag(E.entries) == 0)


def test_coincident_units_rejected():
    D = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    with pytest.raises(SingularDistanceError) as err:
        wm.physical_kernel(D, "inverse_square")
    assert err.value.pair == (0, 1)


def test_economic_kernels():
    z = np.array([1.0, 2.0, 4.0])
    W = wm.economic_kernel(z, "power_difference", s_star=1.0)
    assert W.entries[0, 1] == pytest.approx(1.0)
    assert W.entries[0, 2] == pytest.approx(1 / 9)
    R_ = wm.economic_kernel(z, "ratio_proximity")
    assert R_.entries[0, 1] == pytest.approx(4.0)  # (1/2 - 1)^-2
    assert R_.entries[1, 2] == pytest.approx(4.0)
    E = wm.economic_kernel(z, "neg_exponential", standardize=False)
    assert E.entries[0, 2] == pytest.approx(math.exp(-6.0))
    Es = wm.economic_kernel(z, "neg_exponential")
    zs = (z - z.mean()) / z.std()
    assert Es.entries[0, 2] == pytest.approx(math.exp(-2 * abs(zs[0] - zs[2])))


def test_ties_floored_by_epsilon():
    z = np.array([1.0, 1.0, 3.0])
    W = wm.economic_kernel(z, "power_difference", s_star=2.5, epsilon=1e-3)
    assert np.isfinite(W.entries).all()
    assert W.entries[0, 1] == pytest.approx(min(1e-3 ** -5.0, wm.KERNEL_CAP))
    with pytest.raises(InvalidInputError):
        wm.economic_kernel(np.array([1.0, -1.0]), "ratio_proximity")


def test_row_normalize_and_isolated():
    W = wm.row_normalize(np.array([[0.0, 1.0, 3.0], [2.0, 0.0, 2.0], [1.0, 0.0, 0.0]]))
    assert np.allclose(W.entries.sum(axis=1), 1.0)
    assert W.normalized
    with pytest.raises(IsolatedUnitError) as err:
        wm.row_normalize(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 0.0]]))
    assert err.value.row == 1


def test_weights_matrix_invariants():
    with pytest.raises(DimensionError):
        wm.WeightsMatrix(np.zeros((2, 3)))
    with pytest.raises(InvalidInputError):
        wm.WeightsMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(InvalidInputError):
        wm.WeightsMatrix(np.array([[0.0, -1.0], [1.0, 0.0]]))
    W = wm.WeightsMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        W.entries[0, 1] = 5.0


def test_composite_normalized_once():
    rng = np.random.default_rng(4)
    lat, lon, z = rng.uniform(-50, 50, 12), rng.uniform(-170, 170, 12), rng.uniform(1, 9, 12)
    W = wm.build_weights(lat, lon, z, "inverse_square", "ratio_proximity")
    D = wm.distance_matrix(lat, lon)
    raw = wm.physical_kernel(D, "inverse_square").entries * wm.economic_kernel(z, "ratio_proximity").entries
    assert np.allclose(W.entries, raw / raw.sum(axis=1, keepdims=True))
    assert W.kernel_tag["physical"] == "inverse_square"
    assert W.kernel_tag["economic"] == "ratio_proximity"
    assert W.kernel_tag["normalized"] is True


def test_dense_text_round_trip():
    rng = np.random.default_rng(5)
    W = wm.build_weights(rng.uniform(-50, 50, 8), rng.uniform(-170, 170, 8))
    back = wm.from_dense_text(wm.to_dense_text(W))
    assert np.array_equal(back, W.entries)


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 25), st.integers(0, 2 ** 31), st.sampled_from(wm.PHYSICAL_KINDS),
       st.sampled_from(wm.ECONOMIC_KINDS))
def test_permutation_equivariance(n, seed, phys, econ):
    rng = np.random.default_rng(seed)
    lat, lon, z = rng.uniform(-60, 60, n), rng.uniform(-180, 180, n), rng.uniform(1, 10, n)
    perm = rng.permutation(n)
    W = wm.build_weights(lat, lon, z, phys, econ).entries
    Wp = wm.build_weights(lat[perm], lon[perm], z[perm], phys, econ).entries
    assert np.allclose(Wp, W[np.ix_(perm, perm)], rtol=1e-10, atol=1e-14)
    assert np.allclose(W.sum(axis=1), 1.0)
    assert np.all(W >= 0) and np.all(np.diag(W) == 0)


@pytest.mark.parametrize("flag,expected", [("1", "False"), ("0", "True")])
def test_env_flag_selects_backend(flag, expected):
    import os
    import subprocess
    import sys

    env = {**os.environ, "SPGROWTH_DISABLE_NUMBA": flag}
    r = subprocess.run([sys.executable, "-c", "from spgrowth import _accel; print(_accel.USE_NUMBA)"],
                       env=env, capture_output=True, text=True)
    assert r.stdout.strip() == expected
