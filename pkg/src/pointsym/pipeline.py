"""End-to-end stages shared by the CLI and the tests."""
from __future__ import annotations

import numpy as np

from . import discover, jetdata, metrics, pdegen, sparsify, surrogate
from .library import FunctionLibrary, build_linear_library, build_poly_library
from .presets import Preset, get_preset
from .symexpr import JetSpace

__all__ = [
    "make_library",
    "preset_trajectories",
    "preset_jets",
    "static_dataset",
    "fit_surrogate",
    "run_discovery",
    "sparsify_basis",
    "evaluate",
]

RESULT_VERSION = 1


def make_library(kind: str, space: JetSpace) -> FunctionLibrary:
    if kind == "poly2":
        return build_poly_library(space.p, space.q, 2, space)
    if kind == "linear":
        return build_linear_library(space.p, space.q, False, space)
    if kind == "affine":
        return build_linear_library(space.p, space.q, True, space)
    raise KeyError(f"unknown library {kind!r}; valid options: poly2, linear, affine")


def preset_trajectories(preset: Preset | str, seed: int = 0):
    """Generator of single-IC trajectories on the full grid."""
    pr = get_preset(preset) if isinstance(preset, str) else preset
    if pr.static:
        raise ValueError(f"{pr.name} is static; there are no trajectories")
    return pdegen.iter_trajectories(pr.name, pr.grid_spec(), pr.N_f, pr.N_ics, seed, pr.scale)


def preset_jets(preset: Preset | str, seed: int = 0) -> jetdata.ProlongedDataset:
    """Jets differentiated on the full grid, kept on the preset's lattice."""
    pr = get_preset(preset) if isinstance(preset, str) else preset
    if pr.static:
        return static_dataset(pr.name, seed=seed)
    return jetdata.estimate_jet_stream(preset_trajectories(pr, seed), pr.order,
                                       space_stride=pr.jet_stride, time_accuracy=pr.time_accuracy)


def static_dataset(name: str, N: int = 10000, seed: int = 0) -> jetdata.ProlongedDataset:
    """Synthetic order-0 data on an algebraic surface.

    circle: points on x^2 + y^2 = 1. lorentz: massless four-momenta
    (p0 = |p|, isotropic directions, log-normal energies), i.e. the light
    cone, which is invariant under the Lorentz group and under scaling.
    """
    rng = np.random.default_rng(seed)
    if name == "circle":
        th = rng.uniform(0, 2 * np.pi, N)
        space = JetSpace((), ("x", "y"))
        vals = np.stack([np.cos(th), np.sin(th)], axis=1)
    elif name == "lorentz":
        d = rng.standard_normal((N, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        E = np.exp(rng.normal(0.0, 0.5, N))
        space = JetSpace((), ("p0", "p1", "p2", "p3"))
        vals = np.concatenate([E[:, None], E[:, None] * d], axis=1)
    else:
        raise KeyError(f"unknown static dataset {name!r}; valid options: circle, lorentz")
    channels = space.all_vars(0)
    prov = np.stack([np.zeros(N, int), np.zeros(N, int), np.arange(N)], axis=1)
    return jetdata.ProlongedDataset(space, 0, channels, vals, prov, list(channels), [],
                                    {"source": {"static": name, "seed": int(seed)}})


def fit_surrogate(ds: jetdata.ProlongedDataset, cfg: surrogate.MlpConfig) -> surrogate.MlpRhs:
    if not ds.inputs or not ds.outputs:
        raise ValueError("jet dataset has no input/output split to train on")
    return surrogate.train_mlp(ds.matrix(ds.inputs), ds.matrix(ds.outputs), cfg,
                               [ds.space.name(v) for v in ds.inputs], [ds.space.name(v) for v in ds.outputs])


def run_discovery(ds: jetdata.ProlongedDataset, model: surrogate.RhsModel, library: str = "poly2",
                  samples: int = 100, threshold: float = 0.5, seed: int = 0, eps1: float = discover.EPS1_DEFAULT,
                  mode: str = "auto") -> tuple[discover.GeneratorBasis, dict]:
    """Sample M points, build C (or C^T C), and extract the null space.

    For a trained network the points come from its training rows.
    """
    spec = surrogate.ResidualSpec(model, ds.space)
    lib = make_library(library, ds.space)
    rows = surrogate.training_rows(model, len(ds))
    pool = ds if rows is None else ds.take(rows)
    sub = jetdata.sample_points(pool, samples, seed)
    system = discover.criterion_system(sub.as_mapping(), spec, lib, eps1=eps1, mode=mode)
    basis = discover.null_space(system, threshold)
    result = discover.basis_to_dict(basis)
    result.update({
        "version": RESULT_VERSION,
        "space": ds.space.to_dict(),
        "config": {"library": library, "samples": samples, "threshold": threshold, "seed": seed,
                   "eps1": eps1, "mode": system.mode, "model": getattr(model, "name", "mlp"),
                   "sampled_from": "all points" if rows is None else "training rows"},
        "dataset": {"fingerprint": discover.fingerprint(ds.values), "n_points": len(ds), **ds.meta},
        "report": discover.spectrum_report(basis),
        "sample_provenance": sub.provenance.tolist(),
    })
    return basis, result


def basis_from_result(result: dict) -> discover.GeneratorBasis:
    from .library import library_from_spec

    lib = library_from_spec(result["library"])
    Q = np.asarray(result["Q"], dtype=float).reshape(lib.n_unknowns, -1)
    return discover.GeneratorBasis(np.asarray(result["spectrum"]), int(result["d"]), Q, lib,
                                   float(result["threshold"]), result["mode"], list(result["expressions"]))


def sparsify_basis(result: dict, params: sparsify.LadmapParams) -> dict:
    basis = basis_from_result(result)
    out = dict(result)
    if basis.d == 0:
        out.update({"Q_sparse": [], "expressions_sparse": [], "ladmap_diagnostics": {"skipped": "d = 0"}})
        return out
    Qs, diag = sparsify.ladmap_sparsify(basis.Q, params)
    Qs = sparsify.canonicalize_basis(Qs)
    sb = discover.GeneratorBasis(basis.spectrum, basis.d, Qs, basis.lib, basis.threshold, basis.mode)
    out.update({
        "Q_sparse": Qs.tolist(),
        # entries below the feasibility tolerance are not resolved by the rotation
        "expressions_sparse": discover.render_generators(sb, rel_tol=params.eps1),
        "ladmap_diagnostics": diag,
    })
    return out


def evaluate(result: dict, truth: str, linear: bool = False) -> dict:
    """Grassmann distance of the discovered subspace to a reference algebra."""
    basis = basis_from_result(result)
    lib = basis.lib
    T = metrics.truth_algebra(truth, lib)
    Q = basis.Q
    if linear:
        T = metrics.linear_part(T, lib)
        Q = metrics.linear_part(Q, lib, rank=T.shape[1]) if Q.shape[1] >= T.shape[1] else Q[:, :0]
    out = {"truth": truth, "linear_part": linear, "d": basis.d, "d_truth": T.shape[1]}
    if Q.shape[1] != T.shape[1]:
        out.update({"grassmann_distance": None,
                    "note": f"dimension mismatch: discovered {Q.shape[1]}, reference {T.shape[1]}"})
        return out
    out["grassmann_distance"] = metrics.grassmann_distance(Q, T)
    return out
