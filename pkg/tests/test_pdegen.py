import numpy as np
import pytest

from pointsym import pdegen
from pointsym.pdegen import (
    GridSpec,
    IntegrationError,
    builtin_pde,
    generate,
    kdv_substeps,
    load_trajectory,
    rk4_integrate,
    sample_fourier_ic,
    save_trajectory,
    spatial_derivs_periodic,
    subsample,
)

G = GridSpec()


def test_fourier_ic_constant_term():
    rng = np.random.default_rng(5)
    a0 = np.random.default_rng(5).standard_normal()
    np.testing.assert_allclose(sample_fourier_ic(G, 1, 0, rng=rng), np.full(100, a0 / 2))
    a0 = np.random.default_rng(6).standard_normal()
    small = GridSpec(N_x=10)
    np.testing.assert_allclose(sample_fourier_ic(small, 2, 0, seed=6), np.full((10, 10), a0 / 4))


def test_fourier_ic_deterministic_and_periodic():
    a = sample_fourier_ic(G, 1, 10, seed=3)
    np.testing.assert_array_equal(a, sample_fourier_ic(G, 1, 10, seed=3))
    # evaluate the same series one period to the right
    x = G.axis() + G.L
    rng = np.random.default_rng(3)
    a0 = rng.standard_normal()
    f = np.full(100, a0 / 2)
    w = 2 * np.pi / G.L
    for n in range(1, 11):
        c, s = rng.standard_normal(2)
        f += c * np.cos(w * n * x) + s * np.sin(w * n * x)
    np.testing.assert_allclose(a, f, atol=1e-10)
    with pytest.raises(ValueError):
        sample_fourier_ic(G, 3, 2, seed=0)


def test_stencils_on_sine():
    x, k = G.axis(), 2 * np.pi / G.L
    f = np.sin(k * x)
    errs = []
    for grid in (G, GridSpec(N_x=200)):
        xx = grid.axis()
        errs.append(np.max(np.abs(spatial_derivs_periodic(np.sin(k * xx), 0, 1, grid.h) - k * np.cos(k * xx))))
    assert errs[0] < 1e-2 and 3.5 < errs[0] / errs[1] < 4.5
    for order in (1, 2, 3):
        np.testing.assert_allclose(spatial_derivs_periodic(np.full(50, 2.5), 0, order, 0.1), 0.0, atol=1e-9)
    with pytest.raises(ValueError):
        spatial_derivs_periodic(f, 0, 4, G.h)


@pytest.mark.parametrize("m", [1, 3, 7])
def test_stencil_fourier_symbols(m):
    h = G.h
    k = 2 * np.pi * m / G.L
    e = np.exp(1j * k * G.axis())
    sym = {
        1: 1j * np.sin(k * h) / h,
        2: -4 * np.sin(k * h / 2) ** 2 / h**2,
        3: -1j * (2 * np.sin(k * h) - np.sin(2 * k * h)) / h**3,
    }
    for order, s in sym.items():
        out = spatial_derivs_periodic(e.real, 0, order, h) + 1j * spatial_derivs_periodic(e.imag, 0, order, h)
        np.testing.assert_allclose(out, s * e, atol=1e-9)


def test_zero_rhs_is_constant():
    spec = pdegen.PdeSpec("zero", 1, ("u",), 1, lambda U, h: np.zeros_like(U), 2, "u_t = 0")
    grid = GridSpec(N_t=20)
    u0 = np.sin(grid.axis())[:, None]
    tr = rk4_integrate(spec, u0, grid)
    np.testing.assert_array_equal(tr.data[0], np.broadcast_to(u0, tr.data[0].shape))


def test_heat_mode_decay():
    k = 2 * np.pi / G.L
    x = G.axis()
    tr = rk4_integrate(builtin_pde("heat"), np.sin(k * x)[:, None], G)
    # the semi-discrete system decays with the stencil symbol; RK4 multiplies by R(z) per step
    lam = -4 * np.sin(k * G.h / 2) ** 2 / G.h**2
    z = lam * G.dt
    R = 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24
    n = G.N_t - 1
    np.testing.assert_allclose(tr.data[0, -1, :, 0], R**n * np.sin(k * x), atol=1e-12)
    cont = np.exp(-k**2 * tr.t[-1]) * np.sin(k * x)
    assert np.max(np.abs(tr.data[0, -1, :, 0] - cont)) / np.max(np.abs(cont)) < 1e-3


def test_burgers_cole_hopf():
    k = 2 * np.pi / G.L
    x = G.axis()
    phi = lambda t: 2 + np.exp(-k**2 * t) * np.cos(k * x)
    tr = rk4_integrate(builtin_pde("burgers"), np.log(phi(0.0))[:, None], G)
    want = np.log(phi(tr.t[-1]))
    assert np.max(np.abs(tr.data[0, -1, :, 0] - want)) < 1e-3


def test_heat_conserves_mass():
    tr = generate("heat", GridSpec(N_t=200), 5, 2, seed=1)
    mass = tr.data[..., 0].sum(axis=2)
    np.testing.assert_allclose(mass, mass[:, :1] * np.ones_like(mass), rtol=1e-10, atol=1e-10)


def test_generate_deterministic():
    g = GridSpec(T=0.1, N_t=50)
    a = generate("burgers", g, 4, 2, seed=9)
    b = generate("burgers", g, 4, 2, seed=9)
    np.testing.assert_array_equal(a.data, b.data)
    assert np.all(np.isfinite(a.data))
    assert not np.array_equal(a.data, generate("burgers", g, 4, 2, seed=10).data)


def test_builtin_specs():
    b = builtin_pde("burgers")
    assert (b.dims, len(b.fields), b.max_spatial_order, b.time_order) == (1, 1, 2, 1)
    w = builtin_pde("wave2d")
    assert w.fields == ("u", "v") and w.dims == 2 and w.discovery_fields == ("u",)
    assert (pdegen.RD_BETA, pdegen.RD_D1, pdegen.RD_D2) == (1.0, 0.1, 0.1)
    with pytest.raises(KeyError, match="valid options"):
        builtin_pde("navier")


def test_wave_first_order_form():
    g = GridSpec(N_x=20, N_t=5)
    U = np.random.default_rng(0).normal(size=(1, 20, 20, 2))
    out = builtin_pde("wave2d").rhs(U, g.h)
    np.testing.assert_array_equal(out[..., 0], U[..., 1])


def test_subsample():
    g = GridSpec(N_x=100, N_t=10)
    tr = generate("heat", g, 3, 1, seed=0)
    assert subsample(tr).data.shape == tr.data.shape
    s = subsample(tr, 10, 2)
    assert s.data.shape == (1, 5, 10, 1)
    assert s.h == [2.0] and np.isclose(s.dt, 2 * tr.dt)
    with pytest.raises(ValueError):
        subsample(tr, 3)
    w = generate("wave2d", GridSpec(N_t=4), 1, 1, seed=0, space_stride=10)
    assert w.data.shape == (1, 4, 10, 10, 2)


def test_kdv_substeps():
    n = kdv_substeps(G)
    assert G.dt_store / n <= 0.2 * G.h**3
    assert G.dt_store / (n - 1) > 0.2 * G.h**3


def test_blowup_raises():
    g = GridSpec(T=1000.0, N_t=100)
    with pytest.raises(IntegrationError, match="step"):
        rk4_integrate(builtin_pde("heat"), np.sin(g.axis() * 30)[:, None], g)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        rk4_integrate(builtin_pde("heat"), np.zeros(7), GridSpec(N_t=3))


def test_trajectory_round_trip(tmp_path):
    g = GridSpec(T=0.01, N_t=6)
    tr = generate("kdv", GridSpec(T=g.T, N_t=6, substeps=kdv_substeps(g)), 2, 2, seed=4, scale=0.5)
    save_trajectory(tr, tmp_path / "traj")
    back = load_trajectory(tmp_path / "traj")
    np.testing.assert_array_equal(back.data, tr.data)
    np.testing.assert_array_equal(back.t, tr.t)
    assert back.meta["pde"] == "kdv" and back.meta["seed"] == 4 and back.dt == tr.dt
