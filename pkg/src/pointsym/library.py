"""Function libraries Theta(x, u) for the infinitesimal group action."""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Sequence

from .symexpr import JetPoly, JetSpace, JetVar, parse_poly, total_derivative_multi

__all__ = [
    "FunctionLibrary",
    "default_space",
    "build_poly_library",
    "build_linear_library",
    "d_theta",
    "load_library",
    "library_from_spec",
]


def default_space(p: int, q: int) -> JetSpace:
    """Conventional names: x | t,x | t,x,y for coordinates; u | u,v | p0.. for fields."""
    coords = {0: (), 1: ("x",), 2: ("t", "x"), 3: ("t", "x", "y")}.get(p)
    if coords is None:
        coords = tuple(f"x{i}" for i in range(p))
    if q == 1:
        fields = ("u",)
    elif q == 2:
        fields = ("u", "v")
    elif p == 0:
        fields = tuple(f"p{a}" for a in range(q))
    else:
        fields = tuple(f"u{a}" for a in range(q))
    return JetSpace(coords, fields)


@dataclass(frozen=True)
class FunctionLibrary:
    space: JetSpace
    entries: tuple[JetPoly, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("a function library needs at least one entry")
        for e in self.entries:
            for v in e.variables():
                self.space.check(v)
                if not v.is_indep and v.J:
                    raise ValueError(f"library entry {e.to_text(self.space)!r} depends on a derivative")

    @property
    def p(self) -> int:
        return self.space.p

    @property
    def q(self) -> int:
        return self.space.q

    @property
    def r(self) -> int:
        return len(self.entries)

    @property
    def n_unknowns(self) -> int:
        return (self.p + self.q) * self.r

    def texts(self) -> list[str]:
        return [e.to_text(self.space) for e in self.entries]

    def to_dict(self) -> dict:
        return {**self.space.to_dict(), "entries": self.texts()}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def linear_mask(self) -> list[bool]:
        """True for entries that are a single degree-1 monomial."""
        out = []
        for e in self.entries:
            items = e.items()
            out.append(len(items) == 1 and sum(x for _, x in items[0][0]) == 1)
        return out


def _monomial_order(n_vars: int, degree: int) -> list[tuple[int, ...]]:
    monos: list[tuple[int, ...]] = []
    for d in range(degree + 1):
        block = list(combinations_with_replacement(range(n_vars), d))
        # pure powers first, then mixed products, each lexicographic
        block.sort(key=lambda m: (len(set(m)), m))
        monos.extend(block)
    return monos


def build_poly_library(p: int, q: int, degree: int = 2, space: JetSpace | None = None) -> FunctionLibrary:
    """All monomials of total degree <= ``degree`` in the order-0 variables."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    space = space or default_space(p, q)
    if (space.p, space.q) != (p, q):
        raise ValueError("space does not match (p, q)")
    variables = space.order0_vars()
    entries = []
    for mono in _monomial_order(len(variables), degree):
        exps: dict[JetVar, int] = {}
        for k in mono:
            exps[variables[k]] = exps.get(variables[k], 0) + 1
        entries.append(JetPoly.monomial(1.0, exps))
    return FunctionLibrary(space, tuple(entries))


def build_linear_library(p: int, q: int, include_constant: bool = False, space: JetSpace | None = None) -> FunctionLibrary:
    space = space or default_space(p, q)
    entries = [JetPoly.const(1.0)] if include_constant else []
    entries += [JetPoly.var(v) for v in space.order0_vars()]
    return FunctionLibrary(space, tuple(entries))


def d_theta(lib: FunctionLibrary, J: Sequence[int]) -> list[JetPoly]:
    """Componentwise total derivative ``D_J Theta``."""
    J = tuple(sorted(J))
    return [total_derivative_multi(e, J, lib.space) for e in lib.entries]


def library_from_spec(spec: dict) -> FunctionLibrary:
    space = JetSpace(tuple(spec.get("coords", ())), tuple(spec["fields"]))
    entries = tuple(parse_poly(t, space) for t in spec["entries"])
    return FunctionLibrary(space, entries)


def load_library(path: str | Path) -> FunctionLibrary:
    return library_from_spec(json.loads(Path(path).read_text()))
