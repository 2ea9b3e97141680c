"""End-to-end acceptance checks, one test per numbered criterion.

Every test records a PASS/FAIL line with the measured numbers; the lines are
printed in the terminal summary (see conftest.py) and by running this file
directly. Tests fail when their criterion is not met.
"""
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from pointsym import discover, jetdata, metrics, pipeline, surrogate
from pointsym.library import build_linear_library, build_poly_library, d_theta, default_space
from pointsym.presets import get_preset
from pointsym.prolong import prolong_vector_field
from pointsym.sparsify import canonicalize_basis, l11, ladmap_sparsify
from pointsym.symexpr import JetSpace, parse_poly

from oracles import characteristic_oracle, planted

RESULTS: dict[int, tuple[bool, str]] = {}

ANALYTIC = ("burgers", "heat", "kdv", "wave2d", "schrodinger2d", "rd2d")
EXPECTED_D = {"burgers": 6, "heat": 8, "kdv": 4, "wave2d": 20, "schrodinger2d": 6, "rd2d": 5}
DG_TOL = {"burgers": 1e-3, "heat": 1e-3, "kdv": 1e-3, "wave2d": 1e-2, "schrodinger2d": 1e-2, "rd2d": 1e-2}
NN_TOL = {"burgers": 5e-2, "heat": 3e-3, "kdv": 2e-2}
NN_SEEDS = (0, 1, 2)
# the published Schrodinger list omits the two Galilean boosts, which are exact symmetries of the PDE
FULL_ALGEBRA = {"schrodinger2d": "schrodinger2d_galilei"}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


def summary_lines() -> list[str]:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


def _analytic_run(name: str) -> dict:
    pr = get_preset(name)
    t0 = time.perf_counter()
    ds = pipeline.preset_jets(pr, seed=0)
    model = surrogate.analytic_rhs(pr.analytic)
    basis, _ = pipeline.run_discovery(ds, model, pr.library, pr.samples, pr.threshold, seed=0)
    s, d = basis.spectrum, basis.d
    T = metrics.truth_matrix(pr.truth, basis.lib)
    # the residual check uses the dense C on the same sample
    sub = jetdata.sample_points(ds, pr.samples, 0)
    C = discover.build_c(sub.as_mapping(), surrogate.ResidualSpec(model, ds.space), basis.lib).matrix
    Tn = T / np.linalg.norm(T, axis=0)
    res = np.linalg.norm(C @ Tn, axis=0) / np.linalg.norm(C)
    Qt = metrics.orthonormalize(T)
    out = {"d": d, "d_truth": T.shape[1], "residual": float(res.max()),
           "gap": float(s[-d - 1] / s[-d]) if 0 < d < len(s) else float("nan"),
           "seconds": time.perf_counter() - t0}
    out["dG"] = metrics.grassmann_distance(basis.Q, Qt) if d == T.shape[1] else None
    full = FULL_ALGEBRA.get(name)
    if full:
        Tf = metrics.truth_algebra(full, basis.lib)
        out["full"] = (full, Tf.shape[1], metrics.grassmann_distance(basis.Q, Tf) if d == Tf.shape[1] else None)
    return out


@pytest.fixture(scope="module")
def analytic_runs():
    return {name: _analytic_run(name) for name in ANALYTIC}


# ------------------------------------------------------------------ 1


def test_criterion_1_closed_forms():
    sp = JetSpace(("t", "x"), ("u",))
    lib = build_poly_library(2, 1, 2, sp)
    t0 = time.perf_counter()
    got = {J: d_theta(lib, J) for J in [(1,), (1, 1), (0,)]}
    gen_sp = default_space(1, 1)
    gen = d_theta(build_poly_library(1, 1, 2, gen_sp), (0,))
    elapsed = time.perf_counter() - t0
    P = lambda s: parse_poly(s, sp)
    want = {
        (1,): ["0", "0", "1", "u_x", "0", "2*x", "2*u*u_x", "t", "t*u_x", "u + x*u_x"],
        (1, 1): ["0", "0", "0", "u_xx", "0", "2", "2*u_x^2 + 2*u*u_xx", "0", "t*u_xx", "2*u_x + x*u_xx"],
        (0,): ["0", "1", "0", "u_t", "2*t", "0", "2*u*u_t", "x", "u + t*u_t", "x*u_t"],
    }
    ok = all(got[J] == [P(s) for s in w] for J, w in want.items())
    ok &= gen == [parse_poly(s, gen_sp) for s in ["0", "1", "u_x", "2*x", "2*u*u_x", "u + x*u_x"]]
    record(1, ok and elapsed < 1.0, f"symbolic match={ok}, {elapsed * 1e3:.1f} ms")


# ------------------------------------------------------------------ 2


def test_criterion_2_oracle_equivalence():
    rng = np.random.default_rng(2024)
    shapes = [(p, q) for p in (1, 2, 3) for q in (1, 2)]
    t0 = time.perf_counter()
    mismatches = checked = 0
    for trial in range(50):
        p, q = shapes[trial % len(shapes)]
        lib = build_poly_library(p, q, 2, default_space(p, q))
        W = (rng.integers(-3, 4, size=(p + q, lib.r)) * (rng.random((p + q, lib.r)) < 0.4)).astype(float)
        got = prolong_vector_field(lib, W, 3)
        for v, poly in characteristic_oracle(lib, W, 3).items():
            mismatches += got[v] != poly
            checked += 1
    elapsed = time.perf_counter() - t0
    record(2, mismatches == 0 and elapsed < 30.0,
           f"{checked} coefficients, {mismatches} mismatches, {elapsed:.1f} s")


# ------------------------------------------------------------------ 3, 4, 6


def test_criterion_3_generator_counts(analytic_runs):
    parts, ok = [], True
    for name in ANALYTIC:
        r = analytic_runs[name]
        good = r["d"] == EXPECTED_D[name] and r["gap"] > 1e2
        ok &= good
        parts.append(f"{name} d={r['d']} (want {EXPECTED_D[name]}) gap={r['gap']:.1e}")
    total = sum(r["seconds"] for r in analytic_runs.values())
    ok &= total <= 300
    record(3, ok, "; ".join(parts) + f"; {total:.0f} s")


def test_criterion_4_subspace_accuracy(analytic_runs):
    parts, ok = [], True
    for name in ANALYTIC:
        r = analytic_runs[name]
        if r["dG"] is None:
            ok = False
            parts.append(f"{name} undefined (d={r['d']} vs reference {r['d_truth']})")
        else:
            ok &= r["dG"] <= DG_TOL[name]
            parts.append(f"{name} d_G={r['dG']:.1e}")
        if "full" in r:
            full, dim, dg = r["full"]
            parts.append(f"[diagnostic: {name} vs {dim}-dim {full} d_G={dg if dg is None else f'{dg:.1e}'}]")
    record(4, ok, "; ".join(parts))


def test_criterion_6_truth_residuals(analytic_runs):
    worst = {name: r["residual"] for name, r in analytic_runs.items()}
    for name in ("circle", "lorentz"):
        pr = get_preset(name)
        ds = pipeline.static_dataset(name)
        lib = build_linear_library(0, ds.space.q, False, ds.space)
        C = discover.build_c(jetdata.sample_points(ds, pr.samples, 0).as_mapping(),
                             surrogate.ResidualSpec(surrogate.analytic_rhs(pr.analytic), ds.space), lib).matrix
        T = metrics.truth_matrix(pr.truth, lib)
        worst[name] = float(np.max(np.linalg.norm(C @ (T / np.linalg.norm(T, axis=0)), axis=0)) / np.linalg.norm(C))
    record(6, all(v < 1e-4 for v in worst.values()), ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# ------------------------------------------------------------------ 5


@lru_cache(maxsize=None)
def _trained(name: str, seed: int):
    ds = pipeline.preset_jets(get_preset(name), seed=0)
    return ds, pipeline.fit_surrogate(ds, surrogate.MlpConfig(seed=seed))


def _nn_distance(name: str, seed: int) -> float:
    pr = get_preset(name)
    ds, model = _trained(name, seed)
    lib = pipeline.make_library(pr.library, ds.space)
    sub = jetdata.sample_points(ds.take(surrogate.training_rows(model, len(ds))), pr.samples, seed)
    C = discover.build_c(sub.as_mapping(), surrogate.ResidualSpec(model, ds.space), lib).matrix
    T = metrics.truth_algebra(pr.truth, lib)
    K, d = lib.n_unknowns, T.shape[1]
    Vt = np.linalg.svd(C, full_matrices=True)[2]
    return metrics.grassmann_distance(Vt[K - d:].T, T)


@pytest.mark.slow
def test_criterion_5_neural_pipeline():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, tol in NN_TOL.items():
        dgs = [_nn_distance(name, s) for s in NN_SEEDS]
        mean = float(np.mean(dgs))
        ok &= mean <= tol
        parts.append(f"{name} mean d_G={mean:.1e} (<= {tol:.0e}; seeds {', '.join(f'{x:.1e}' for x in dgs)})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 1200
    record(5, ok, "; ".join(parts) + f"; {elapsed:.0f} s")


@pytest.mark.slow
def test_burgers_validation_mse():
    # default Burgers dataset, held-out 10%; shares the seed-0 network with criterion 5
    _, model = _trained("burgers", 0)
    assert model.info["val_loss"] < 1e-3, f"val MSE {model.info['val_loss']:.2e}"


# ------------------------------------------------------------------ 7


def test_criterion_7_ladmap():
    Q = 0.5 * np.array([[1, 1], [-1, 1], [1, 1], [1, -1.0]])
    want = np.array([[1, 0], [0, -1], [1, 0], [0, 1]]) / np.sqrt(2)
    err = np.abs(canonicalize_basis(ladmap_sparsify(Q)[0]) - canonicalize_basis(want)).max()
    worst_obj = worst_span = 0.0
    for seed in range(20):
        S, Qp = planted(seed)
        Qs, _ = ladmap_sparsify(Qp)
        worst_obj = max(worst_obj, l11(Qs) - l11(S))
        worst_span = max(worst_span, metrics.grassmann_distance(Qp, Qs))
    ok = err < 1e-6 and worst_obj <= 1e-4 and worst_span < 1e-8
    record(7, ok, f"worked example err {err:.1e}; planted: max objective excess {worst_obj:.1e}, "
                  f"max d_G {worst_span:.1e}")


# ------------------------------------------------------------------ 8


def test_criterion_8_numerical_hygiene(burgers_jets):
    cfg = surrogate.MlpConfig(seed=0)
    m = surrogate.MlpRhs.init(3, 1, cfg, ["u", "u_x", "u_xx"], ["u_t"])
    z = np.random.default_rng(0).normal(size=(50, 3))
    J = m.jacobian(z)
    h = 1e-6
    fd = np.stack([(m.eval(z + h * e) - m.eval(z - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    jac_err = float(np.abs(J - fd).max() / np.abs(fd).max())

    ds = burgers_jets
    lib = build_poly_library(2, 1, 2, ds.space)
    spec = surrogate.ResidualSpec(surrogate.analytic_rhs("burgers"), ds.space)
    pts = jetdata.sample_points(ds, 400, seed=2).as_mapping()
    a = discover.null_space(discover.criterion_system(pts, spec, lib, mode="dense"), 0.5)
    b = discover.null_space(discover.criterion_system(pts, spec, lib, mode="gram"), 0.5)
    path_dg = metrics.grassmann_distance(a.Q, b.Q) if a.d == b.d else float("inf")

    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    diag = np.ones((2, 1)) / np.sqrt(2)
    trivial = max(metrics.grassmann_distance(e1, e1),
                  abs(metrics.grassmann_distance(e1, diag) - np.pi / 4),
                  abs(metrics.grassmann_distance(e1, e2) - np.pi / 2))
    ok = jac_err < 1e-5 and path_dg < 1e-6 and trivial <= 1e-12
    record(8, ok, f"Jacobian rel err {jac_err:.1e}; dense vs Gram d_G {path_dg:.1e}; trivial angles err {trivial:.1e}")


# ------------------------------------------------------------------ 9


def _static(name: str):
    pr = get_preset(name)
    ds = pipeline.static_dataset(name)
    basis, _ = pipeline.run_discovery(ds, surrogate.analytic_rhs(pr.analytic), pr.library, pr.samples, pr.threshold)
    return basis


def test_criterion_9_static_mode():
    circ = _static("circle")
    rot = np.array([0.0, -1.0, 1.0, 0.0]) / np.sqrt(2)
    cos = float(abs(circ.Q[:, 0] @ rot)) if circ.d == 1 else 0.0
    lor = _static("lorentz")
    T = metrics.truth_algebra("topquark", lor.lib)
    dg = metrics.grassmann_distance(lor.Q, T) if lor.d == T.shape[1] else float("inf")
    ok = circ.d == 1 and cos > 1 - 1e-8 and lor.d == 7 and dg < 1e-1
    record(9, ok, f"circle d={circ.d} cos={cos:.12f}; lorentz d={lor.d} d_G={dg:.1e}")


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
