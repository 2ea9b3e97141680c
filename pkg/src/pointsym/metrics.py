"""Subspace metrics and the reference symmetry algebras used for evaluation."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np

from .library import FunctionLibrary, build_linear_library, build_poly_library
from .symexpr import JetPoly, JetSpace, parse_poly

__all__ = [
    "orthonormalize",
    "grassmann_distance",
    "TRUTH_NAMES",
    "truth_spec",
    "truth_library",
    "encode_generator",
    "truth_matrix",
    "truth_algebra",
    "linear_part",
]


def orthonormalize(B: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column space via reduced QR."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("expected a matrix")
    if B.shape[1] == 0:
        return B.copy()
    Q, R = np.linalg.qr(B)
    diag = np.abs(np.diag(R))
    if diag.min() <= tol * max(diag.max(), np.finfo(float).tiny):
        raise np.linalg.LinAlgError("columns are linearly dependent")
    return Q


def _check_orthonormal(Q: np.ndarray, name: str, tol: float = 1e-6):
    err = np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) if Q.shape[1] else 0.0
    if err > tol:
        raise ValueError(f"{name} does not have orthonormal columns (max deviation {err:.2e})")


def grassmann_distance(Q1: np.ndarray, Q2: np.ndarray) -> float:
    """sqrt(sum theta_i^2) over the principal angles between two column spaces."""
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    if Q1.shape != Q2.shape:
        raise ValueError(f"shape mismatch {Q1.shape} vs {Q2.shape}")
    _check_orthonormal(Q1, "Q1")
    _check_orthonormal(Q2, "Q2")
    if Q1.shape[1] == 0:
        return 0.0
    M = Q1.T @ Q2
    cos = np.clip(np.linalg.svd(M, compute_uv=False), 0.0, 1.0)             # descending
    # arccos loses half the digits near 1, so small angles come from the sines
    sin = np.clip(np.linalg.svd(Q2 - Q1 @ M, compute_uv=False)[::-1], 0.0, 1.0)  # ascending
    theta = np.where(cos * cos < 0.5, np.arccos(cos), np.arcsin(sin))
    return float(np.sqrt(np.sum(theta**2)))


@lru_cache(maxsize=1)
def _fixtures() -> dict:
    text = resources.files("pointsym").joinpath("data/truth_algebras.json").read_text()
    return json.loads(text)


# schrodinger2d lists the published generators; the _galilei variant adds the two boosts
TRUTH_NAMES = ("burgers", "heat", "kdv", "wave2d", "schrodinger2d", "schrodinger2d_galilei", "rd2d", "topquark",
               "circle")


def truth_spec(name: str) -> dict:
    fx = _fixtures()
    if name not in fx:
        raise KeyError(f"no reference algebra for {name!r}; valid options: {', '.join(sorted(fx))}")
    return fx[name]


def truth_library(name: str) -> FunctionLibrary:
    spec = truth_spec(name)
    space = JetSpace(tuple(spec["coords"]), tuple(spec["fields"]))
    if spec["library"] == "poly2":
        return build_poly_library(space.p, space.q, 2, space)
    return build_linear_library(space.p, space.q, False, space)


def _express(poly: JetPoly, lib: FunctionLibrary) -> np.ndarray:
    """Coefficients c with sum c_j Theta_j == poly exactly."""
    keys = sorted({k for e in lib.entries for k in e.terms} | set(poly.terms), key=repr)
    index = {k: i for i, k in enumerate(keys)}
    A = np.zeros((len(keys), lib.r))
    for j, e in enumerate(lib.entries):
        for k, c in e.terms.items():
            A[index[k], j] = c
    b = np.zeros(len(keys))
    for k, c in poly.terms.items():
        b[index[k]] = c
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ coef - b), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(b), initial=0.0)):
        raise ValueError(f"{poly.to_text(lib.space)!r} is not in the span of the library")
    return coef


def encode_generator(gen: dict[str, str], lib: FunctionLibrary) -> np.ndarray:
    """vec(W) for a generator given as {coordinate name: coefficient polynomial}."""
    names = list(lib.space.coords) + list(lib.space.fields)
    W = np.zeros((len(names), lib.r))
    for key, text in gen.items():
        if key not in names:
            raise ValueError(f"unknown coordinate {key!r}")
        W[names.index(key)] = _express(parse_poly(text, lib.space), lib)
    return W.reshape(-1)


def truth_matrix(name: str, lib: FunctionLibrary | None = None) -> np.ndarray:
    """Un-normalized (K, d) matrix whose columns are the published generators."""
    lib = lib or truth_library(name)
    spec = truth_spec(name)
    if (tuple(spec["coords"]), tuple(spec["fields"])) != (lib.space.coords, lib.space.fields):
        raise ValueError(f"library variables {lib.space.to_dict()} do not match the {name} fixture")
    return np.stack([encode_generator(g, lib) for g in spec["generators"]], axis=1)


def truth_algebra(name: str, lib: FunctionLibrary | None = None) -> np.ndarray:
    return orthonormalize(truth_matrix(name, lib))


def linear_part(Q: np.ndarray, lib: FunctionLibrary, rank: int | None = None, tol: float = 1e-6) -> np.ndarray:
    """Orthonormal basis of the columns of Q projected onto degree-1 library entries.

    ``rank`` truncates to the leading singular directions; by default the
    numerical rank (singular values above ``tol`` times the largest).
    """
    mask = np.tile(np.array(lib.linear_mask(), dtype=float), lib.p + lib.q)
    P = np.asarray(Q, dtype=float) * mask[:, None]
    if P.shape[1] == 0:
        return P
    U, s, _ = np.linalg.svd(P, full_matrices=False)
    if rank is None:
        rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return U[:, :rank]
