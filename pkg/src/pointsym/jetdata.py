"""Prolonged datasets: every jet coordinate up to order n at each grid point.

Derivatives along one axis use the solver's central stencils (orders 1-3);
mixed partials nest them axis by axis, so u_tx = D_t(D_x u). Space wraps
periodically; the first and last n time slices are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import io
from .pdegen import TrajectoryDataset, builtin_pde, spatial_derivs_periodic
from .symexpr import JetSpace, JetVar

__all__ = [
    "ProlongedDataset",
    "default_split",
    "estimate_jet",
    "estimate_jet_stream",
    "sample_points",
    "save_jets",
    "load_jets",
]

_PROV = ("ic", "t_index", "s_index")


@dataclass
class ProlongedDataset:
    space: JetSpace
    order: int
    channels: list[JetVar]
    values: np.ndarray              # (N, len(channels))
    provenance: np.ndarray          # (N, 3) ints: ic, time index, flat space index
    inputs: list[JetVar] = field(default_factory=list)
    outputs: list[JetVar] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.provenance = np.asarray(self.provenance, dtype=np.int64)
        if self.values.shape != (len(self.provenance), len(self.channels)):
            raise ValueError("values/provenance/channels shapes disagree")
        if set(self.inputs) & set(self.outputs):
            raise ValueError("inputs and outputs overlap")
        for v in [*self.inputs, *self.outputs]:
            if v not in self._index:
                raise ValueError(f"{self.space.name(v)} is not a jet channel")

    @property
    def _index(self) -> dict[JetVar, int]:
        return {v: k for k, v in enumerate(self.channels)}

    def __len__(self) -> int:
        return len(self.values)

    def names(self) -> list[str]:
        return [self.space.name(v) for v in self.channels]

    def column(self, v: JetVar | str) -> np.ndarray:
        if isinstance(v, str):
            v = self.space.lookup(v)
        return self.values[:, self._index[v]]

    def matrix(self, vars_: Sequence[JetVar]) -> np.ndarray:
        idx = self._index
        return self.values[:, [idx[v] for v in vars_]]

    def as_mapping(self, rows: np.ndarray | slice | None = None) -> dict[JetVar, np.ndarray]:
        vals = self.values if rows is None else self.values[rows]
        return {v: vals[:, k] for k, v in enumerate(self.channels)}

    def point(self, i: int) -> dict[JetVar, float]:
        return {v: float(self.values[i, k]) for k, v in enumerate(self.channels)}

    def take(self, rows) -> "ProlongedDataset":
        return ProlongedDataset(self.space, self.order, list(self.channels), self.values[rows],
                                self.provenance[rows], list(self.inputs), list(self.outputs), dict(self.meta))


def default_split(pde_name: str, space: JetSpace) -> tuple[list[JetVar], list[JetVar]]:
    """S_in = pure spatial derivatives up to the equation's order, S_out = u_t or u_tt."""
    pde = builtin_pde(pde_name)
    spatial = list(range(1, space.p))
    inputs, outputs = [], []
    for a in range(space.q):
        for k in range(pde.max_spatial_order + 1):
            for J in combinations_with_replacement(spatial, k):
                inputs.append(JetVar.deriv(a, J))
        outputs.append(JetVar.deriv(a, (0,) * pde.time_order))
    return inputs, outputs


# fourth-order central stencils {offset: weight}, scaled by 1 / (denominator h^k)
_T4 = {
    1: ({-2: 1, -1: -8, 1: 8, 2: -1}, 12),
    2: ({-2: -1, -1: 16, 0: -30, 1: 16, 2: -1}, 12),
    3: ({-3: 1, -2: -8, -1: 13, 1: -13, 2: 8, 3: -1}, 8),
}


def time_halfwidth(k: int, accuracy: int) -> int:
    if k == 0:
        return 0
    return {2: 1 if k < 3 else 2, 4: 2 if k < 3 else 3}[accuracy]


def _time_deriv(f: np.ndarray, k: int, dt: float, accuracy: int) -> np.ndarray:
    # np.roll wraps; the wrapped slices are dropped by the caller
    if accuracy == 2:
        return spatial_derivs_periodic(f, 0, k, dt)
    weights, den = _T4[k]
    out = np.zeros_like(f)
    for off, w in weights.items():
        out += w * np.roll(f, -off, axis=0)
    return out / (den * dt**k)


def _jets_one(traj: TrajectoryDataset, ic: int, field_idx: Sequence[int], space: JetSpace, n: int,
              channels: list[JetVar], space_stride: int, time_accuracy: int) -> tuple[np.ndarray, np.ndarray]:
    dims = traj.dims
    steps = [traj.dt, *traj.h]
    nt = len(traj.t)
    keep_t = np.arange(n, nt - n)
    sp_sl = (slice(None, None, space_stride),) * dims
    grid_axes = [traj.axes[a][::space_stride] for a in range(dims)]
    mesh = np.meshgrid(traj.t[keep_t], *grid_axes, indexing="ij")
    cols = []
    for v in channels:
        if v.is_indep:
            cols.append(mesh[v.index].reshape(-1))
            continue
        f = traj.data[ic, ..., field_idx[v.index]]
        counts = [v.J.count(a) for a in range(dims + 1)]
        g = f
        for a in range(dims, 0, -1):
            if counts[a]:
                g = spatial_derivs_periodic(g, a, counts[a], steps[a])
        if counts[0]:
            g = _time_deriv(g, counts[0], steps[0], time_accuracy)
        cols.append(g[(keep_t, *sp_sl)].reshape(-1))
    values = np.stack(cols, axis=1)
    n_sp = int(np.prod([len(a) for a in grid_axes]))
    # flat space index refers to the full-resolution grid
    full_shape = [len(a) for a in traj.axes]
    sub_idx = np.ravel_multi_index(
        np.meshgrid(*[np.arange(0, s, space_stride) for s in full_shape], indexing="ij"), full_shape
    ).reshape(-1)
    prov = np.empty((len(keep_t) * n_sp, 3), dtype=np.int64)
    prov[:, 0] = ic
    prov[:, 1] = np.repeat(keep_t, n_sp)
    prov[:, 2] = np.tile(sub_idx, len(keep_t))
    return values, prov


def _setup(traj: TrajectoryDataset, n: int, fields: Sequence[str] | None, space_stride: int, time_accuracy: int):
    if n < 0:
        raise ValueError("order must be >= 0")
    if time_accuracy not in (2, 4):
        raise ValueError("time_accuracy must be 2 or 4")
    if any(time_halfwidth(k, time_accuracy) > n for k in range(1, n + 1)):
        raise ValueError(f"time stencils of accuracy {time_accuracy} need more than {n} dropped slices")
    if traj.dims == 2 and n > 2:
        raise ValueError(f"order {n} on 2D data is unsupported (max 2)")
    if n > 3:
        raise ValueError(f"order {n} is unsupported (max 3)")
    if len(traj.t) < 2 * n + 1:
        raise ValueError(f"trajectory too short in time: {len(traj.t)} samples for order {n}")
    if space_stride < 1 or any(len(a) % space_stride for a in traj.axes):
        raise ValueError(f"space stride {space_stride} does not divide the grid")
    pde_name = traj.meta.get("pde")
    if fields is None:
        fields = builtin_pde(pde_name).discovery_fields if pde_name else traj.fields
    field_idx = [traj.fields.index(f) for f in fields]
    space = JetSpace(tuple(traj.coords), tuple(fields))
    channels = space.all_vars(n)
    return space, channels, field_idx, pde_name


def estimate_jet_stream(trajs: Iterable[TrajectoryDataset], n: int, fields: Sequence[str] | None = None,
                        space_stride: int = 1, time_accuracy: int = 2) -> ProlongedDataset:
    """Jets for a sequence of trajectory datasets, kept at ``space_stride`` lattice points.

    Derivatives are always taken on the full grid before striding. Time
    derivatives are second-order by default; ``time_accuracy=4`` switches to
    five/seven-point central stencils.
    """
    vals, provs = [], []
    space = channels = pde_name = None
    meta = {}
    for k, tr in enumerate(trajs):
        space, channels, field_idx, pde_name = _setup(tr, n, fields, space_stride, time_accuracy)
        for ic in range(tr.n_ics):
            v, pr = _jets_one(tr, ic, field_idx, space, n, channels, space_stride, time_accuracy)
            pr[:, 0] = tr.meta["ic_index"] if "ic_index" in tr.meta else ic
            vals.append(v)
            provs.append(pr)
        meta = {"source": {k2: tr.meta[k2] for k2 in ("pde", "grid", "seed", "N_f", "scale") if k2 in tr.meta},
                "dt": tr.dt, "h": tr.h, "jet_space_stride": space_stride, "time_accuracy": time_accuracy}
    if space is None:
        raise ValueError("no trajectories given")
    inputs, outputs = default_split(pde_name, space) if pde_name else ([], [])
    return ProlongedDataset(space, n, channels, np.concatenate(vals), np.concatenate(provs),
                            inputs, outputs, meta)


def estimate_jet(traj: TrajectoryDataset, n: int, fields: Sequence[str] | None = None,
                 space_stride: int = 1, time_accuracy: int = 2) -> ProlongedDataset:
    return estimate_jet_stream([traj], n, fields, space_stride, time_accuracy)


def sample_points(ds: ProlongedDataset, M: int, seed: int = 0) -> ProlongedDataset:
    """Uniform sample of ``M`` points without replacement."""
    if M > len(ds):
        raise ValueError(f"cannot sample M={M} points from a dataset of {len(ds)}")
    if M < 0:
        raise ValueError("M must be non-negative")
    rows = np.random.default_rng(seed).choice(len(ds), size=M, replace=False)
    return ds.take(rows)


def save_jets(ds: ProlongedDataset, path: str | Path) -> None:
    arr = np.concatenate([ds.values, ds.provenance.astype(float)], axis=1)
    meta = {
        "kind": "jets",
        "order": ds.order,
        **ds.space.to_dict(),
        "channels": ds.names() + list(_PROV),
        "inputs": [ds.space.name(v) for v in ds.inputs],
        "outputs": [ds.space.name(v) for v in ds.outputs],
        "meta": ds.meta,
    }
    io.save_array(path, arr, meta)


def load_jets(path: str | Path) -> ProlongedDataset:
    arr, meta = io.load_array(path)
    if meta.get("kind") != "jets":
        raise ValueError(f"{path} is not a jet dataset")
    space = JetSpace(tuple(meta["coords"]), tuple(meta["fields"]))
    names = meta["channels"][: -len(_PROV)]
    channels = [space.lookup(c) for c in names]
    return ProlongedDataset(
        space, int(meta["order"]), channels, arr[:, : len(names)], arr[:, len(names):].astype(np.int64),
        [space.lookup(c) for c in meta["inputs"]], [space.lookup(c) for c in meta["outputs"]], meta.get("meta", {}),
    )
