"""Trajectory datasets for a small zoo of evolution equations.

Random Fourier initial conditions on the periodic box [-L/2, L/2)^dims,
method of lines with second-order central differences, classical RK4.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import io

__all__ = [
    "PdeSpec",
    "GridSpec",
    "TrajectoryDataset",
    "IntegrationError",
    "PDE_NAMES",
    "builtin_pde",
    "sample_fourier_ic",
    "spatial_derivs_periodic",
    "rk4_integrate",
    "subsample",
    "generate",
    "iter_trajectories",
    "save_trajectory",
    "load_trajectory",
]


class IntegrationError(FloatingPointError):
    pass


@dataclass(frozen=True)
class GridSpec:
    L: float = 20.0
    N_x: int = 100
    T: float = 2.0
    N_t: int = 1000
    substeps: int = 1

    def __post_init__(self):
        if self.N_x < 8:
            raise ValueError("N_x must be >= 8")
        if self.N_t < 2:
            raise ValueError("N_t must be >= 2")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.L <= 0 or self.T <= 0:
            raise ValueError("L and T must be positive")

    @property
    def h(self) -> float:
        return self.L / self.N_x

    @property
    def dt_store(self) -> float:
        return self.T / self.N_t

    @property
    def dt(self) -> float:
        return self.T / (self.N_t * self.substeps)

    def axis(self) -> np.ndarray:
        return -self.L / 2 + self.h * np.arange(self.N_x)

    def times(self) -> np.ndarray:
        return self.dt_store * np.arange(self.N_t)


def spatial_derivs_periodic(f: np.ndarray, axis: int, order: int, h: float) -> np.ndarray:
    """Second-order central difference of ``order`` 1, 2 or 3 along ``axis``."""
    r = lambda s: np.roll(f, -s, axis=axis)  # r(s)[i] = f[i + s]
    if order == 1:
        return (r(1) - r(-1)) / (2 * h)
    if order == 2:
        return (r(1) - 2 * f + r(-1)) / h**2
    if order == 3:
        return (r(2) - 2 * r(1) + 2 * r(-1) - r(-2)) / (2 * h**3)
    raise ValueError(f"unsupported derivative order {order} (supported: 1, 2, 3)")


# state layout: (n_ics, *space, n_fields); spatial axis a lives at array axis 1 + a


def _d(U, a, k, h):
    return spatial_derivs_periodic(U, 1 + a, k, h)


def _rhs_heat(U, h):
    u = U[..., 0]
    return _d(u, 0, 2, h)[..., None]


def _rhs_burgers(U, h):
    u = U[..., 0]
    return (_d(u, 0, 2, h) + _d(u, 0, 1, h) ** 2)[..., None]


def _rhs_kdv(U, h):
    u = U[..., 0]
    return (-_d(u, 0, 3, h) - u * _d(u, 0, 1, h))[..., None]


def _lap(f, h):
    return _d(f, 0, 2, h) + _d(f, 1, 2, h)


def _rhs_wave(U, h):
    u, v = U[..., 0], U[..., 1]
    return np.stack([v, _lap(u, h)], axis=-1)


def _rhs_schrodinger(U, h):
    u, v = U[..., 0], U[..., 1]
    mod2 = u * u + v * v
    ut = -0.5 * _lap(v, h) + v * mod2
    vt = 0.5 * _lap(u, h) - u * mod2
    return np.stack([ut, vt], axis=-1)


RD_BETA = 1.0
RD_D1 = 0.1
RD_D2 = 0.1


def _rhs_rd(U, h):
    u, v = U[..., 0], U[..., 1]
    a2 = u * u + v * v
    ut = (1 - a2) * u + RD_BETA * a2 * v + RD_D1 * _lap(u, h)
    vt = -RD_BETA * a2 * u + (1 - a2) * v + RD_D2 * _lap(v, h)
    return np.stack([ut, vt], axis=-1)


@dataclass(frozen=True)
class PdeSpec:
    name: str
    dims: int
    fields: tuple[str, ...]          # stored state components
    time_order: int                  # 2: integrated in first-order form (u, v = u_t)
    rhs: Callable[[np.ndarray, float], np.ndarray] = field(repr=False, compare=False)
    max_spatial_order: int
    equation: str

    @property
    def coords(self) -> tuple[str, ...]:
        return ("t", "x") if self.dims == 1 else ("t", "x", "y")

    @property
    def discovery_fields(self) -> tuple[str, ...]:
        """Dependent variables of the symmetry problem (auxiliary u_t dropped)."""
        return self.fields[:1] if self.time_order == 2 else self.fields


_ZOO = {
    "heat": PdeSpec("heat", 1, ("u",), 1, _rhs_heat, 2, "u_t = u_xx"),
    "burgers": PdeSpec("burgers", 1, ("u",), 1, _rhs_burgers, 2, "u_t = u_xx + u_x^2"),
    "kdv": PdeSpec("kdv", 1, ("u",), 1, _rhs_kdv, 3, "u_t = -u_xxx - u*u_x"),
    "wave2d": PdeSpec("wave2d", 2, ("u", "v"), 2, _rhs_wave, 2, "u_t = v, v_t = u_xx + u_yy"),
    "schrodinger2d": PdeSpec(
        "schrodinger2d", 2, ("u", "v"), 1, _rhs_schrodinger, 2,
        "u_t = -0.5*(v_xx + v_yy) + v*u^2 + v^3, v_t = 0.5*(u_xx + u_yy) - u*v^2 - u^3",
    ),
    "rd2d": PdeSpec(
        "rd2d", 2, ("u", "v"), 1, _rhs_rd, 2,
        "u_t = (1 - A)*u + beta*A*v + d1*(u_xx + u_yy), v_t = -beta*A*u + (1 - A)*v + d2*(v_xx + v_yy), A = u^2 + v^2",
    ),
}
PDE_NAMES = tuple(_ZOO)


def builtin_pde(name: str) -> PdeSpec:
    try:
        return _ZOO[name]
    except KeyError:
        raise KeyError(f"unknown pde {name!r}; valid options: {', '.join(PDE_NAMES)}") from None


def kdv_substeps(grid: GridSpec) -> int:
    """Internal steps per stored sample so that dt <= 0.2 h^3."""
    return max(1, math.ceil(grid.dt_store / (0.2 * grid.h**3) - 1e-12))


def sample_fourier_ic(grid: GridSpec, dims: int, N_f: int, seed=None, scale: float = 1.0,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """One random truncated Fourier series evaluated on the periodic grid."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    x = grid.axis()
    w = 2 * np.pi / grid.L
    if dims == 1:
        a0 = scale * rng.standard_normal()
        f = np.full(grid.N_x, a0 / 2)
        for n in range(1, N_f + 1):
            a, b = scale * rng.standard_normal(2)
            f += a * np.cos(w * n * x) + b * np.sin(w * n * x)
        return f
    if dims == 2:
        X, Y = np.meshgrid(x, x, indexing="ij")
        a0 = scale * rng.standard_normal()
        f = np.full((grid.N_x, grid.N_x), a0 / 4)
        for m in range(1, N_f + 1):
            cx, sx = np.cos(w * m * X), np.sin(w * m * X)
            for n in range(1, N_f + 1):
                cy, sy = np.cos(w * n * Y), np.sin(w * n * Y)
                a, b, c, d = scale * rng.standard_normal(4)
                f += a * cx * cy + b * cx * sy + c * sx * cy + d * sx * sy
        return f
    raise ValueError("dims must be 1 or 2")


@dataclass
class TrajectoryDataset:
    t: np.ndarray
    axes: list[np.ndarray]
    data: np.ndarray            # [ic, time, *space, field]
    meta: dict

    def __post_init__(self):
        expected = (self.data.shape[0], len(self.t), *[len(a) for a in self.axes], len(self.meta["fields"]))
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape} inconsistent with axes {expected}")

    @property
    def n_ics(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def dt(self) -> float:
        return float(self.meta["dt"])

    @property
    def h(self) -> list[float]:
        return [float(v) for v in self.meta["h"]]

    @property
    def fields(self) -> list[str]:
        return list(self.meta["fields"])

    @property
    def coords(self) -> list[str]:
        return list(self.meta["coords"])

    def field(self, name: str) -> np.ndarray:
        return self.data[..., self.fields.index(name)]


def rk4_integrate(pde: PdeSpec, u0: np.ndarray, grid: GridSpec, meta: dict | None = None) -> TrajectoryDataset:
    """Classical RK4 on the semi-discrete system, storing every ``substeps``-th state."""
    u0 = np.asarray(u0, dtype=float)
    space_shape = (grid.N_x,) * pde.dims
    single = u0.shape == (*space_shape, len(pde.fields))
    U = u0[None] if single else u0
    if U.shape[1:] != (*space_shape, len(pde.fields)):
        raise ValueError(f"initial state shape {u0.shape} does not match grid {space_shape} x {len(pde.fields)} fields")
    h, dt = grid.h, grid.dt
    out = np.empty((U.shape[0], grid.N_t, *U.shape[1:]))
    out[:, 0] = U
    step = 0
    # blow-up is detected below, so the float warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, grid.N_t):
            for _ in range(grid.substeps):
                k1 = pde.rhs(U, h)
                k2 = pde.rhs(U + 0.5 * dt * k1, h)
                k3 = pde.rhs(U + 0.5 * dt * k2, h)
                k4 = pde.rhs(U + dt * k3, h)
                U = U + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                step += 1
            if not np.all(np.isfinite(U)):
                raise IntegrationError(f"{pde.name}: non-finite state at step {step} (stored sample {k})")
            out[:, k] = U
    info = {
        "pde": pde.name,
        "fields": list(pde.fields),
        "coords": list(pde.coords),
        "dt": grid.dt_store,
        "h": [grid.h] * pde.dims,
        "grid": asdict(grid),
        "space_stride": 1,
        "time_stride": 1,
    }
    info.update(meta or {})
    return TrajectoryDataset(grid.times(), [grid.axis() for _ in range(pde.dims)], out, info)


def subsample(traj: TrajectoryDataset, space_stride: int = 1, time_stride: int = 1) -> TrajectoryDataset:
    if space_stride < 1 or time_stride < 1:
        raise ValueError("strides must be positive")
    if len(traj.t) % time_stride:
        raise ValueError(f"time stride {time_stride} does not divide N_t={len(traj.t)}")
    for a in traj.axes:
        if len(a) % space_stride:
            raise ValueError(f"space stride {space_stride} does not divide axis length {len(a)}")
    sl = (slice(None), slice(None, None, time_stride)) + (slice(None, None, space_stride),) * traj.dims
    meta = dict(traj.meta)
    meta["dt"] = traj.dt * time_stride
    meta["h"] = [hh * space_stride for hh in traj.h]
    meta["space_stride"] = traj.meta.get("space_stride", 1) * space_stride
    meta["time_stride"] = traj.meta.get("time_stride", 1) * time_stride
    return TrajectoryDataset(
        traj.t[::time_stride].copy(),
        [a[::space_stride].copy() for a in traj.axes],
        np.ascontiguousarray(traj.data[sl]),
        meta,
    )


def _ic_rng(seed: int, ic: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(ic)])


def initial_state(pde: PdeSpec, grid: GridSpec, N_f: int, seed: int, ic: int, scale: float = 1.0) -> np.ndarray:
    rng = _ic_rng(seed, ic)
    comps = [sample_fourier_ic(grid, pde.dims, N_f, rng=rng, scale=scale) for _ in pde.fields]
    return np.stack(comps, axis=-1)


def iter_trajectories(pde: PdeSpec | str, grid: GridSpec, N_f: int, N_ics: int, seed: int,
                      scale: float = 1.0) -> Iterator[TrajectoryDataset]:
    """Integrate initial conditions one at a time (bounded memory for 2D grids)."""
    if isinstance(pde, str):
        pde = builtin_pde(pde)
    for ic in range(N_ics):
        u0 = initial_state(pde, grid, N_f, seed, ic, scale)
        meta = {"seed": int(seed), "N_f": int(N_f), "N_ics": 1, "ic_index": ic, "scale": float(scale)}
        yield rk4_integrate(pde, u0, grid, meta)


def generate(pde: PdeSpec | str, grid: GridSpec, N_f: int, N_ics: int, seed: int,
             scale: float = 1.0, space_stride: int = 1, time_stride: int = 1) -> TrajectoryDataset:
    parts = [subsample(tr, space_stride, time_stride) for tr in iter_trajectories(pde, grid, N_f, N_ics, seed, scale)]
    first = parts[0]
    meta = dict(first.meta)
    meta.pop("ic_index", None)
    meta["N_ics"] = int(N_ics)
    data = np.concatenate([p.data for p in parts], axis=0)
    return TrajectoryDataset(first.t, first.axes, data, meta)


def save_trajectory(traj: TrajectoryDataset, path: str | Path) -> None:
    meta = dict(traj.meta)
    meta["kind"] = "trajectory"
    meta["axis_names"] = ["ic", "t", *traj.coords[1:], "field"]
    meta["t"] = traj.t.tolist()
    meta["axes"] = [a.tolist() for a in traj.axes]
    io.save_array(path, traj.data, meta)


def load_trajectory(path: str | Path) -> TrajectoryDataset:
    data, meta = io.load_array(path)
    if meta.get("kind") != "trajectory":
        raise ValueError(f"{path} is not a trajectory dataset")
    t = np.asarray(meta.pop("t"))
    axes = [np.asarray(a) for a in meta.pop("axes")]
    return TrajectoryDataset(t, axes, data, meta)
