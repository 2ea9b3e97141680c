"""Prolonged coefficient matrix Theta_n with pr^(n) v = Theta_n vec(W) . grad.

Column layout: block k (k < p for the coordinates, p + alpha for the
fields) holds the r coefficients of ``W_k``; ``vec(W)`` is ``W`` flattened
row-major, so a null vector reshapes to ``(p + q, r)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from .library import FunctionLibrary, d_theta
from .symexpr import JetPoly, JetSpace, JetVar, UnhousedVariableError

__all__ = [
    "DerivCoordSet",
    "ThetaN",
    "sub_multisets",
    "phi_coefficient",
    "build_theta_n",
    "prolong_vector_field",
]


@dataclass(frozen=True)
class DerivCoordSet:
    """Ordered row labels of Theta_n (jet coordinates the residual depends on)."""

    labels: tuple[JetVar, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate row labels")

    @classmethod
    def full(cls, space: JetSpace, n: int) -> "DerivCoordSet":
        return cls(tuple(space.all_vars(n)))

    @property
    def order(self) -> int:
        return max((v.order for v in self.labels if not v.is_indep), default=0)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def index(self, v: JetVar) -> int:
        return self.labels.index(v)

    def names(self, space: JetSpace) -> list[str]:
        return [space.name(v) for v in self.labels]


def sub_multisets(J: Sequence[int]) -> list[tuple[tuple[int, ...], tuple[int, ...], int]]:
    """Proper sub-multisets ``I`` of ``J`` as ``(I, J minus I, multiplicity)``.

    The multiplicity is the multiset binomial ``prod_c C(mult_J(c), mult_I(c))``.
    """
    counts: dict[int, int] = {}
    for j in J:
        counts[j] = counts.get(j, 0) + 1
    keys = sorted(counts)
    out = []
    for choice in product(*(range(counts[k] + 1) for k in keys)):
        if all(c == counts[k] for c, k in zip(choice, keys)):
            continue
        I = tuple(k for c, k in zip(choice, keys) for _ in range(c))
        rest = tuple(k for c, k in zip(choice, keys) for _ in range(counts[k] - c))
        m = 1
        for c, k in zip(choice, keys):
            m *= comb(counts[k], c)
        out.append((I, rest, m))
    return out


class _DThetaCache:
    def __init__(self, lib: FunctionLibrary):
        self.lib = lib
        self._cache: dict[tuple[int, ...], list[JetPoly]] = {(): list(lib.entries)}

    def __call__(self, J: Sequence[int]) -> list[JetPoly]:
        J = tuple(sorted(J))
        if J not in self._cache:
            self._cache[J] = d_theta(self.lib, J)
        return self._cache[J]


def phi_coefficient(lib: FunctionLibrary, alpha: int, J: Sequence[int], _dtheta=None) -> list[list[JetPoly]]:
    """Row blocks of the prolongation coefficient of ``d/du^alpha_J``."""
    J = tuple(sorted(J))
    if not J:
        raise ValueError("phi_coefficient needs a non-empty multi-index")
    p, q, r = lib.p, lib.q, lib.r
    lib.space.check(JetVar.deriv(alpha, J))
    dth = _dtheta or _DThetaCache(lib)
    blocks = [[JetPoly.zero() for _ in range(r)] for _ in range(p + q)]
    for i in range(p):
        acc = [JetPoly.zero() for _ in range(r)]
        for I, rest, m in sub_multisets(J):
            u_Ii = JetPoly.var(JetVar.deriv(alpha, I + (i,)), -float(m))
            for k, d in enumerate(dth(rest)):
                if not d.is_zero():
                    acc[k] = acc[k] + u_Ii * d
        blocks[i] = acc
    blocks[p + alpha] = list(dth(J))
    return blocks


class ThetaN:
    """Symbolic Theta_n plus a vectorised numeric evaluator."""

    def __init__(self, lib: FunctionLibrary, rows: DerivCoordSet, entries: list[list[JetPoly]]):
        self.lib = lib
        self.rows = rows
        self.entries = entries
        self.shape = (len(rows), lib.n_unknowns)
        self._compile()

    def _compile(self):
        monos: dict[tuple, int] = {}
        triplets = []
        for a, row in enumerate(self.entries):
            for b, poly in enumerate(row):
                for key, c in poly.terms.items():
                    k = monos.setdefault(key, len(monos))
                    triplets.append((k, a * self.shape[1] + b, c))
        self._monos = list(monos)
        coef = np.zeros((len(monos), self.shape[0] * self.shape[1]))
        for k, flat, c in triplets:
            coef[k, flat] += c
        self._coef = coef
        self.variables = sorted({v for key in self._monos for v, _ in key})

    def evaluate(self, point: Mapping[JetVar, float | np.ndarray]) -> np.ndarray:
        """Numeric Theta_n; scalar point -> (R, K), arrays of length N -> (N, R, K)."""
        vals = {}
        for v in self.variables:
            try:
                vals[v] = np.asarray(point[v], dtype=float)
            except KeyError:
                raise UnhousedVariableError(v, self.lib.space.name(v)) from None
        sizes = [np.shape(x)[0] for x in point.values() if np.ndim(x)]
        scalar = not sizes
        n = 1 if scalar else sizes[0]
        mono_vals = np.empty((n, len(self._monos)))
        for k, key in enumerate(self._monos):
            col = np.ones(n)
            for v, e in key:
                col = col * (vals[v] if e == 1 else vals[v] ** e)
            mono_vals[:, k] = col
        out = (mono_vals @ self._coef).reshape(n, *self.shape)
        return out[0] if scalar else out

    def contract(self, W: np.ndarray) -> list[JetPoly]:
        """Symbolic ``Theta_n vec(W)``: one polynomial per row."""
        w = np.asarray(W, dtype=float).reshape(-1)
        if w.size != self.shape[1]:
            raise ValueError(f"W has {w.size} entries, expected {self.shape[1]}")
        out = []
        for row in self.entries:
            acc = JetPoly.zero()
            for poly, c in zip(row, w):
                if c != 0.0 and not poly.is_zero():
                    acc = acc + poly * float(c)
            out.append(acc)
        return out

    def text_rows(self) -> list[list[str]]:
        return [[e.to_text(self.lib.space) for e in row] for row in self.entries]


def build_theta_n(lib: FunctionLibrary, rows: DerivCoordSet | Iterable[JetVar], n: int | None = None) -> ThetaN:
    if not isinstance(rows, DerivCoordSet):
        rows = DerivCoordSet(tuple(rows))
    p, q, r = lib.p, lib.q, lib.r
    dth = _DThetaCache(lib)
    entries: list[list[JetPoly]] = []
    zero_block = [JetPoly.zero()] * r
    for v in rows:
        lib.space.check(v)
        if n is not None and not v.is_indep and v.order > n:
            raise ValueError(f"row {lib.space.name(v)} is outside order {n}")
        if v.is_indep:
            blocks = [zero_block] * (p + q)
            blocks = blocks[: v.index] + [list(lib.entries)] + blocks[v.index + 1:]
        elif not v.J:
            blocks = [zero_block] * (p + q)
            k = p + v.index
            blocks = blocks[:k] + [list(lib.entries)] + blocks[k + 1:]
        else:
            blocks = phi_coefficient(lib, v.index, v.J, dth)
        entries.append([e for blk in blocks for e in blk])
    return ThetaN(lib, rows, entries)


def prolong_vector_field(lib: FunctionLibrary, W: np.ndarray, n: int) -> dict[JetVar, JetPoly]:
    """Explicit coefficients of pr^(n) v for ``v = W Theta . grad``."""
    W = np.asarray(W, dtype=float)
    if W.shape != (lib.p + lib.q, lib.r):
        raise ValueError(f"W must have shape {(lib.p + lib.q, lib.r)}, got {W.shape}")
    theta = build_theta_n(lib, DerivCoordSet.full(lib.space, n))
    return dict(zip(theta.rows.labels, theta.contract(W)))
