"""Linear system for the symmetry coefficients and its numerical null space.

Each sampled jet point contributes the block ``C_i = J_F(pt) Theta_n(pt)``;
``vec(W)`` in the (approximate) null space of the stacked ``C`` gives
generators ``v = W Theta . grad``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .library import FunctionLibrary
from .prolong import DerivCoordSet, ThetaN, build_theta_n
from .surrogate import ResidualSpec, residual_jacobian
from .symexpr import JetPoly, JetVar

__all__ = [
    "CriterionSystem",
    "GeneratorBasis",
    "build_c",
    "accumulate_gram",
    "criterion_system",
    "null_space",
    "render_generators",
    "render_generator",
    "spectrum_report",
    "basis_to_dict",
]

EPS1_DEFAULT = 4.0


@dataclass
class CriterionSystem:
    mode: str                         # "dense" or "gram"
    matrix: np.ndarray                # C (M*l, K) or G = C^T C (K, K)
    n_rows: int                       # M * l
    rows: DerivCoordSet
    lib: FunctionLibrary
    provenance: np.ndarray | None = None

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[1]

    def gram(self) -> np.ndarray:
        return self.matrix if self.mode == "gram" else self.matrix.T @ self.matrix


def _theta_for(spec: ResidualSpec, lib: FunctionLibrary, rows: DerivCoordSet | None) -> ThetaN:
    rows = rows or DerivCoordSet(tuple(spec.rows))
    if list(rows.labels) != list(spec.rows):
        raise ValueError("row set of Theta_n does not match the residual Jacobian columns")
    if lib.space != spec.space:
        raise ValueError("library and residual live on different jet spaces")
    return build_theta_n(lib, rows)


def _blocks(spec: ResidualSpec, theta: ThetaN, points: Mapping[JetVar, np.ndarray]) -> np.ndarray:
    """(N, l, K) criterion blocks."""
    pts = {v: np.atleast_1d(np.asarray(x, dtype=float)) for v, x in points.items()}
    JF = residual_jacobian(spec, pts)
    if JF.ndim == 2:
        JF = JF[None]
    TH = theta.evaluate(pts)
    if TH.ndim == 2:
        TH = TH[None]
    return JF @ TH


def build_c(points: Mapping[JetVar, np.ndarray], spec: ResidualSpec, lib: FunctionLibrary,
            rows: DerivCoordSet | None = None) -> CriterionSystem:
    theta = _theta_for(spec, lib, rows)
    B = _blocks(spec, theta, points)
    C = B.reshape(-1, B.shape[-1])
    if not np.all(np.isfinite(C)):
        raise FloatingPointError("non-finite entries in C")
    return CriterionSystem("dense", C, C.shape[0], theta.rows, lib)


def accumulate_gram(points: Mapping[JetVar, np.ndarray], spec: ResidualSpec, lib: FunctionLibrary,
                    rows: DerivCoordSet | None = None, chunk: int = 4096) -> CriterionSystem:
    """G = sum_i C_i^T C_i, streamed over chunks of points."""
    theta = _theta_for(spec, lib, rows)
    n = len(np.atleast_1d(next(iter(points.values()))))
    K = lib.n_unknowns
    G = np.zeros((K, K))
    n_rows = 0
    for s in range(0, n, chunk):
        part = {v: np.atleast_1d(x)[s:s + chunk] for v, x in points.items()}
        B = _blocks(spec, theta, part)
        flat = B.reshape(-1, K)
        G += flat.T @ flat
        n_rows += flat.shape[0]
    if not np.all(np.isfinite(G)):
        raise FloatingPointError("non-finite entries in C^T C")
    return CriterionSystem("gram", 0.5 * (G + G.T), n_rows, theta.rows, lib)


def criterion_system(points, spec: ResidualSpec, lib: FunctionLibrary, eps1: float = EPS1_DEFAULT,
                     mode: str = "auto") -> CriterionSystem:
    """Dense C when M*l / ((p+q) r) < eps1, Gram accumulation otherwise."""
    if mode == "auto":
        n = len(np.atleast_1d(next(iter(points.values()))))
        mode = "dense" if n * spec.l / lib.n_unknowns < eps1 else "gram"
    if mode == "dense":
        return build_c(points, spec, lib)
    if mode == "gram":
        return accumulate_gram(points, spec, lib)
    raise ValueError(f"unknown mode {mode!r} (auto, dense, gram)")


@dataclass
class GeneratorBasis:
    spectrum: np.ndarray              # singular values of C, descending, length K
    d: int
    Q: np.ndarray                     # (K, d)
    lib: FunctionLibrary
    threshold: float
    mode: str
    expressions: list[str] = field(default_factory=list)

    @property
    def W(self) -> list[np.ndarray]:
        shape = (self.lib.p + self.lib.q, self.lib.r)
        return [self.Q[:, i].reshape(shape) for i in range(self.d)]

    @property
    def gap_ratio(self) -> float:
        """sigma_{last kept} / sigma_{first null}."""
        K = len(self.spectrum)
        if self.d == 0 or self.d == K:
            return float("nan")
        lo = self.spectrum[K - self.d]
        return float("inf") if lo == 0 else float(self.spectrum[K - self.d - 1] / lo)


def null_space(sys: CriterionSystem, eps2: float) -> GeneratorBasis:
    if eps2 < 0:
        raise ValueError("threshold must be non-negative")
    A = sys.matrix
    if not np.all(np.isfinite(A)):
        raise FloatingPointError("non-finite matrix entries")
    K = sys.n_unknowns
    if sys.mode == "dense":
        _, s, Vt = np.linalg.svd(A, full_matrices=True)
        sigma = np.zeros(K)
        sigma[: len(s)] = s
        V = Vt.T
        d = int(np.sum(sigma < eps2))
    else:
        evals, V = np.linalg.eigh(A)
        evals, V = evals[::-1], V[:, ::-1]
        sigma = np.sqrt(np.clip(evals, 0.0, None))
        d = int(np.sum(evals < eps2**2))
    Q = V[:, K - d:]
    basis = GeneratorBasis(sigma, d, np.ascontiguousarray(Q), sys.lib, float(eps2), sys.mode)
    basis.expressions = render_generators(basis)
    return basis


def _fmt(c: float) -> str:
    r = round(c)
    if abs(c - r) < 1e-9 * max(1.0, abs(c)):
        return str(int(r))
    return f"{c:.4g}"


def render_generator(W: np.ndarray, lib: FunctionLibrary, rel_tol: float = 1e-8) -> str:
    """``sum_k (W_k . Theta) d/d(coord_k)`` with coefficients below ``rel_tol * max|W|`` dropped."""
    W = np.asarray(W, dtype=float)
    scale = np.max(np.abs(W)) if W.size else 0.0
    if scale == 0.0:
        return "0"
    names = list(lib.space.coords) + list(lib.space.fields)
    parts = []
    for k, name in enumerate(names):
        poly = JetPoly.zero()
        for c, e in zip(W[k], lib.entries):
            if abs(c) >= rel_tol * scale:
                poly = poly + e * float(c)
        if poly.is_zero():
            continue
        terms = []
        for key, c in poly.items():
            mono = "*".join(lib.space.name(v) + (f"^{e}" if e > 1 else "") for v, e in key)
            if not mono:
                terms.append(_fmt(c))
            elif _fmt(abs(c)) == "1":
                terms.append(("-" if c < 0 else "") + mono)
            else:
                terms.append(f"{_fmt(c)}*{mono}")
        body = " + ".join(terms).replace("+ -", "- ")
        op = f"∂/∂{name}"
        if len(terms) == 1:
            if body == "1":
                parts.append(op)
            elif body == "-1":
                parts.append("-" + op)
            else:
                parts.append(f"{body} {op}")
        else:
            parts.append(f"({body}) {op}")
    out = " + ".join(parts).replace("+ -", "- ")
    return out or "0"


def render_generators(basis: GeneratorBasis, rel_tol: float = 1e-8) -> list[str]:
    return [render_generator(W, basis.lib, rel_tol) for W in basis.W]


def spectrum_report(basis: GeneratorBasis, tail: int | None = None) -> dict:
    K = len(basis.spectrum)
    tail = min(K, tail if tail is not None else basis.d + 1)
    s = basis.spectrum
    ratios = s[:-1] / np.where(s[1:] > 0, s[1:], np.nan)
    tail_ratios = ratios[K - tail:] if tail > 1 else np.array([])
    best = int(np.nanargmax(tail_ratios)) if tail_ratios.size and np.any(np.isfinite(tail_ratios)) else None
    return {
        "n_unknowns": K,
        "d": basis.d,
        "threshold": basis.threshold,
        "mode": basis.mode,
        "gap_ratio": basis.gap_ratio,
        "largest_tail_ratio": None if best is None else float(tail_ratios[best]),
        "suggested_d": None if best is None else int(tail - 1 - best),
        "trailing": [{"index": int(i), "sigma": float(s[i]), "null": bool(i >= K - basis.d)} for i in range(K - tail, K)],
    }


def format_spectrum(basis: GeneratorBasis, tail: int | None = None) -> str:
    rep = spectrum_report(basis, tail)
    lines = [f"d = {basis.d}  (threshold {basis.threshold:g}, {basis.mode} path, gap ratio {rep['gap_ratio']:.3g})"]
    for row in rep["trailing"]:
        lines.append(f"  sigma[{row['index']:3d}] = {row['sigma']:.6e}{'  *' if row['null'] else ''}")
    if basis.d == 0:
        lines.append("no generators found")
    return "\n".join(lines)


def fingerprint(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()[:16]


def basis_to_dict(basis: GeneratorBasis) -> dict:
    return {
        "spectrum": basis.spectrum.tolist(),
        "d": basis.d,
        "threshold": basis.threshold,
        "mode": basis.mode,
        "gap_ratio": basis.gap_ratio,
        "Q": basis.Q.tolist(),
        "W": [W.tolist() for W in basis.W],
        "expressions": list(basis.expressions),
        "library": basis.lib.to_dict(),
    }
