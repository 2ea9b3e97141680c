"""Sparse orthonormal rotation of a generator basis.

Solves min ||Q R||_{1,1} s.t. R^T R = I with a linearized alternating
direction method with adaptive penalty, splitting Z = Q R.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["LadmapParams", "soft_threshold", "ladmap_sparsify", "canonicalize_basis", "l11"]


@dataclass
class LadmapParams:
    eps1: float = 1e-4
    eps2: float = 1e-4
    beta0: float = 10.0
    beta_max: float = 1e10
    rho0: float = 1.9
    eta_R: float | None = None    # default 1.02 * ||Q||_2^2
    eta_Z: float = 1.02
    max_iter: int = 10000
    restarts: int = 4             # extra runs from seeded random rotations
    seed: int = 0

    def __post_init__(self):
        for name in ("eps1", "eps2", "beta0", "beta_max", "eta_Z"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rho0 < 1:
            raise ValueError("rho0 must be >= 1")
        if self.eta_Z <= 1:
            raise ValueError("eta_Z must exceed 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


def soft_threshold(x, eps: float):
    """sgn(x) * max(|x| - eps, 0)."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - eps, 0.0)
    return float(out) if out.ndim == 0 else out


def l11(A: np.ndarray) -> float:
    return float(np.abs(A).sum())


def _inf_norm(A: np.ndarray) -> float:
    # maximum absolute row sum
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def _random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((d, d))
    Qr, Rr = np.linalg.qr(A)
    return Qr * np.sign(np.diag(Rr))


def ladmap_sparsify(Q: np.ndarray, params: LadmapParams | None = None) -> tuple[np.ndarray, dict]:
    """Best of one run from R0 = I and ``params.restarts`` runs from random rotations.

    R0 = I can be a stationary point of the objective (e.g. a basis whose
    entries all share one magnitude), so the restarts break that symmetry.
    """
    params = params or LadmapParams()
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[1]
    if d == 0:
        return Q.copy(), {"iterations": 0, "converged": True, "objective_in": 0.0, "objective_out": 0.0}
    if np.max(np.abs(Q.T @ Q - np.eye(d))) > 1e-8:
        raise ValueError("Q must have orthonormal columns")
    rng = np.random.default_rng(params.seed)
    starts = [np.eye(d)] + [_random_rotation(d, rng) for _ in range(params.restarts)]
    best = None
    runs = []
    for k, R0 in enumerate(starts):
        Qs, diag = _ladmap_run(Q, R0, params)
        runs.append({"start": k, "objective": diag["objective_out"], "iterations": diag["iterations"],
                     "converged": diag["converged"]})
        # prefer converged runs, then lower objective
        key = (not diag["converged"], round(diag["objective_out"], 10))
        if best is None or key < best[0]:
            best = (key, Qs, diag)
    _, Qs, diag = best
    diag["runs"] = runs
    return Qs, diag


def _ladmap_run(Q: np.ndarray, R0: np.ndarray, params: LadmapParams) -> tuple[np.ndarray, dict]:
    d = Q.shape[1]
    eta_R = params.eta_R if params.eta_R is not None else 1.02 * np.linalg.norm(Q, 2) ** 2
    if eta_R <= np.linalg.norm(Q, 2) ** 2:
        raise ValueError("eta_R must exceed ||Q||_2^2")
    eta_Z = params.eta_Z
    beta = params.beta0
    R = R0.copy()
    Z = Q @ R
    Lam = np.zeros_like(Q)
    converged = False
    k = 0
    for k in range(1, params.max_iter + 1):
        Rt = R - Q.T @ (Lam + beta * (Q @ R - Z)) / (beta * eta_R)
        U, _, Vt = np.linalg.svd(Rt)
        R_new = U @ Vt
        Zt = Z + (Lam + beta * (Q @ R_new - Z)) / (beta * eta_Z)
        Z_new = soft_threshold(Zt, 1.0 / (beta * eta_Z))
        Lam = Lam + beta * (Q @ R_new - Z_new)
        step = beta * max(np.sqrt(eta_R) * _inf_norm(R_new - R), np.sqrt(eta_Z) * _inf_norm(Z_new - Z))
        R, Z = R_new, Z_new
        feas = _inf_norm(Q @ R - Z)
        if feas < params.eps1 and step <= params.eps2:
            converged = True
            break
        rho = params.rho0 if step < params.eps2 else 1.0
        beta = min(params.beta_max, rho * beta)
    Qs = Q @ R
    diag = {
        "iterations": k,
        "converged": converged,
        "feasibility": _inf_norm(Q @ R - Z),
        "objective_in": l11(Q),
        "objective_out": l11(Qs),
        "orthogonality_error": float(np.max(np.abs(R.T @ R - np.eye(d)))),
        "params": {**asdict(params), "eta_R": float(eta_R)},
    }
    return Qs, diag


def canonicalize_basis(Q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Sign-fix each column (largest entry positive) and sort by (nnz, entries)."""
    Q = np.array(Q, dtype=float, copy=True)
    if Q.size == 0:
        return Q
    scale = np.max(np.abs(Q))
    for j in range(Q.shape[1]):
        col = Q[:, j]
        i = int(np.argmax(np.abs(col) - 1e-12 * np.arange(len(col))))  # first of near-ties
        if col[i] < 0:
            Q[:, j] = -col
    nnz = (np.abs(Q) > tol * scale).sum(axis=0)
    rounded = np.round(Q / scale, 9)
    keys = [(int(nnz[j]), tuple(-rounded[:, j])) for j in range(Q.shape[1])]
    order = sorted(range(Q.shape[1]), key=lambda j: keys[j])
    return Q[:, order]
