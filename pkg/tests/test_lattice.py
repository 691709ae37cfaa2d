import numpy as np
import pytest

from frdlat.errors import CubeTooLarge
from frdlat.lattice import (
    Cube,
    FrequencyIndex,
    SiteIndex,
    TorusGeometry,
    centered,
    cube,
    dist_inf,
    dual_frequencies,
    p_flat,
    p_norms,
    rho_inf,
    rho_inf_grid,
)


def test_geometry_basics():
    g = TorusGeometry(d=2, m=1, L=3, N=2)
    assert g.side == 9
    assert g.site_count == 81
    assert g.site_shape == (9, 9)
    assert g.field_shape() == (1, 9, 9)
    assert g.gradient_shape() == (1, 2, 9, 9)
    assert g.kernel_shape() == (1, 1, 9, 9)


def test_geometry_rejects_bad_parameters():
    with pytest.raises(ValueError):
        TorusGeometry(d=1, m=1, L=3, N=1)
    with pytest.raises(ValueError):
        TorusGeometry(d=2, m=0, L=3, N=1)
    with pytest.raises(ValueError):
        TorusGeometry(d=2, m=1, L=4, N=1)
    with pytest.raises(ValueError):
        TorusGeometry(d=2, m=1, L=1, N=1)
    with pytest.raises(ValueError):
        TorusGeometry(d=2, m=1, L=3, N=0)
    with pytest.raises(ValueError):
        TorusGeometry(d=2, m=1, L=3, N=20)


def test_centered_representatives():
    got = centered(np.arange(9), 9)
    assert got.tolist() == [0, 1, 2, 3, 4, -4, -3, -2, -1]
    assert centered(np.array([5, -5]), 3).tolist() == [-1, 1]


def test_site_index_canonicalizes():
    s = SiteIndex((-1, 10), 9)
    assert s.coords == (8, 1)
    assert s.centered == (-1, 1)


def test_frequency_index():
    f = FrequencyIndex((1, 0), 3)
    assert f.p == (2.0 * np.pi / 3.0, 0.0)
    assert not f.is_zero
    assert FrequencyIndex((0, 0), 3).is_zero
    with pytest.raises(ValueError):
        FrequencyIndex((2, 0), 3)


def test_cube_site_sets():
    c = Cube(l=3, d=2)
    assert c.interior_count == 4
    assert c.volume == 9
    assert c.interior.tolist() == [[1, 1], [1, 2], [2, 1], [2, 2]]
    assert c.lower.shape == (9, 2)
    assert c.closure.shape == (16, 2)
    g = TorusGeometry(d=2, m=1, L=3, N=1)
    with pytest.raises(CubeTooLarge):
        cube(4, g)
    assert cube(3, g).l == 3


def test_rho_inf_values():
    g = TorusGeometry(d=2, m=1, L=3, N=2)
    assert rho_inf((0, 0), (5, 5), g) == 4
    assert rho_inf((0, 0), (8, 0), g) == 1
    assert rho_inf(SiteIndex((1, 2), 9), SiteIndex((1, 2), 9), g) == 0
    assert dist_inf([(0, 0), (1, 1)], [(3, 3)], g) == 2


def test_rho_inf_triangle_inequality():
    g = TorusGeometry(d=3, m=1, L=5, N=1)
    rng = np.random.default_rng(3)
    pts = rng.integers(0, 5, size=(1000, 3, 3))
    for x, y, z in pts:
        assert rho_inf(x, z, g) <= rho_inf(x, y, g) + rho_inf(y, z, g)


def test_rho_inf_grid_matches_pointwise():
    g = TorusGeometry(d=2, m=1, L=5, N=1)
    grid = rho_inf_grid(g)
    for x0 in range(5):
        for x1 in range(5):
            assert grid[x0, x1] == rho_inf((x0, x1), (0, 0), g)


def test_dual_frequencies_cover_and_order():
    g = TorusGeometry(d=2, m=1, L=3, N=1)
    freqs = dual_frequencies(g)
    assert len(freqs) == 9
    ns = [f.n for f in freqs]
    assert ns == sorted(ns)
    assert (0, 0) in ns


def test_p_flat_layout():
    g = TorusGeometry(d=2, m=1, L=3, N=1)
    P = p_flat(g)
    assert P.shape == (9, 2)
    assert np.all(P[0] == 0.0)
    norms = p_norms(g)
    assert norms[0] == 0.0
    assert np.all(norms[1:] > 0.0)
    # row order matches the canonical grid ravel
    w = 2.0 * np.pi / 3.0
    assert np.allclose(P[1], [0.0, w])
    assert np.allclose(P[3], [w, 0.0])
