"""Polynomials over jet coordinates and total derivatives.

A jet coordinate is either an independent variable ``x^i`` or a
dependent-variable derivative ``u^alpha_J`` where ``J`` is a multiset of
coordinate indices (``J == ()`` is ``u^alpha`` itself).  Indices are
0-based throughout the package.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "JetVar",
    "JetSpace",
    "JetPoly",
    "UnhousedVariableError",
    "total_derivative",
    "total_derivative_multi",
    "parse_poly",
]


class UnhousedVariableError(KeyError):
    """A polynomial was evaluated at a point that has no value for one of its variables."""

    def __init__(self, var: "JetVar", name: str | None = None):
        self.var = var
        label = name if name is not None else repr(var)
        super().__init__(f"unhoused variable {label}")

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class JetVar:
    kind: int  # 0: independent coordinate, 1: dependent variable / derivative
    index: int
    J: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in (0, 1):
            raise ValueError(f"bad JetVar kind {self.kind}")
        if self.index < 0 or any(j < 0 for j in self.J):
            raise ValueError("jet indices must be non-negative")
        if self.kind == 0 and self.J:
            raise ValueError("independent coordinates carry no multi-index")
        if tuple(sorted(self.J)) != self.J:
            object.__setattr__(self, "J", tuple(sorted(self.J)))

    @classmethod
    def indep(cls, i: int) -> "JetVar":
        return cls(0, i)

    @classmethod
    def deriv(cls, alpha: int, J: Iterable[int] = ()) -> "JetVar":
        return cls(1, alpha, tuple(sorted(J)))

    @property
    def is_indep(self) -> bool:
        return self.kind == 0

    @property
    def order(self) -> int:
        return len(self.J)

    def extend(self, i: int) -> "JetVar":
        """``u^alpha_J -> u^alpha_{J+i}``."""
        if self.kind == 0:
            raise ValueError("cannot extend an independent coordinate")
        return JetVar(1, self.index, tuple(sorted(self.J + (i,))))

    def sort_key(self) -> tuple:
        return (self.kind, self.index, len(self.J), self.J)

    def __lt__(self, other: "JetVar") -> bool:
        return self.sort_key() < other.sort_key()


_Key = tuple  # tuple[tuple[JetVar, int], ...], sorted by variable


def _mono_sort_key(key: _Key) -> tuple:
    degree = sum(e for _, e in key)
    return (degree, tuple((v.sort_key(), -e) for v, e in key))


def _mul_keys(a: _Key, b: _Key) -> _Key:
    if not a:
        return b
    if not b:
        return a
    exps: dict[JetVar, int] = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items(), key=lambda item: item[0].sort_key()))


class JetPoly:
    """Polynomial with float coefficients over :class:`JetVar` symbols.

    Immutable; the term map is kept canonical (no zero coefficients, no
    zero exponents) so equality is structural.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[_Key, float] | None = None):
        clean: dict[_Key, float] = {}
        if terms:
            for key, c in terms.items():
                c = float(c)
                if c != 0.0:
                    clean[key] = c
        self._terms = clean
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, c: float) -> "JetPoly":
        return cls({(): c})

    @classmethod
    def var(cls, v: JetVar, coef: float = 1.0) -> "JetPoly":
        return cls({((v, 1),): coef})

    @classmethod
    def zero(cls) -> "JetPoly":
        return cls()

    @classmethod
    def monomial(cls, coef: float, exps: Mapping[JetVar, int]) -> "JetPoly":
        key = tuple(sorted(((v, int(e)) for v, e in exps.items() if e), key=lambda it: it[0].sort_key()))
        if any(e < 0 for _, e in key):
            raise ValueError("negative exponent")
        return cls({key: coef})

    # inspection -------------------------------------------------------
    @property
    def terms(self) -> dict[_Key, float]:
        return dict(self._terms)

    def items(self) -> list[tuple[_Key, float]]:
        """Terms in canonical (graded) order."""
        return sorted(self._terms.items(), key=lambda kv: _mono_sort_key(kv[0]))

    def is_zero(self) -> bool:
        return not self._terms

    def variables(self) -> set[JetVar]:
        return {v for key in self._terms for v, _ in key}

    def degree(self) -> int:
        return max((sum(e for _, e in key) for key in self._terms), default=0)

    def jet_order(self) -> int:
        return max((v.order for v in self.variables() if not v.is_indep), default=0)

    def constant_value(self) -> float | None:
        if not self._terms:
            return 0.0
        if list(self._terms) == [()]:
            return self._terms[()]
        return None

    # arithmetic -------------------------------------------------------
    @staticmethod
    def _coerce(other) -> "JetPoly":
        if isinstance(other, JetPoly):
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return JetPoly.const(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0.0) + c
        return JetPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return JetPoly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return JetPoly({k: c * float(other) for k, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[_Key, float] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                k = _mul_keys(ka, kb)
                out[k] = out.get(k, 0.0) + ca * cb
        return JetPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = JetPoly.const(1.0)
        for _ in range(int(n)):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"JetPoly({self.to_text()!r})"

    # calculus ---------------------------------------------------------
    def partial(self, v: JetVar) -> "JetPoly":
        out: dict[_Key, float] = {}
        for key, c in self._terms.items():
            for pos, (w, e) in enumerate(key):
                if w == v:
                    if e == 1:
                        nk = key[:pos] + key[pos + 1:]
                    else:
                        nk = key[:pos] + ((w, e - 1),) + key[pos + 1:]
                    out[nk] = out.get(nk, 0.0) + c * e
                    break
        return JetPoly(out)

    def total_derivative(self, i: int) -> "JetPoly":
        """``D_i P = dP/dx^i + sum u_{J,i} dP/du_J`` (no range check on ``i``)."""
        result = self.partial(JetVar.indep(i))
        for v in sorted(self.variables()):
            if not v.is_indep:
                result = result + JetPoly.var(v.extend(i)) * self.partial(v)
        return result

    def substitute(self, values: Mapping[JetVar, "JetPoly"]) -> "JetPoly":
        result = JetPoly.zero()
        for key, c in self._terms.items():
            term = JetPoly.const(c)
            for v, e in key:
                base = values.get(v)
                term = term * ((base if base is not None else JetPoly.var(v)) ** e)
            result = result + term
        return result

    # numerics ---------------------------------------------------------
    def evaluate(self, point: Mapping[JetVar, float | np.ndarray], space: "JetSpace | None" = None):
        """Evaluate at a point (scalars) or at many points at once (arrays)."""
        total = 0.0
        for key, c in self._terms.items():
            term = c
            for v, e in key:
                try:
                    val = point[v]
                except KeyError:
                    raise UnhousedVariableError(v, space.name(v) if space else None) from None
                term = term * (val if e == 1 else val ** e)
            total = total + term
        return total

    # text -------------------------------------------------------------
    def to_text(self, space: "JetSpace | None" = None) -> str:
        space = space or _default_space(self)
        if not self._terms:
            return "0"
        pieces: list[str] = []
        for key, c in self.items():
            factors = []
            for v, e in key:
                name = space.name(v)
                factors.append(name if e == 1 else f"{name}^{e}")
            mag = abs(c)
            if factors:
                body = "*".join(factors)
                text = body if mag == 1.0 else f"{_fmt_coef(mag)}*{body}"
            else:
                text = _fmt_coef(mag)
            if not pieces:
                pieces.append(text if c > 0 else f"-{text}")
            else:
                pieces.append(f" + {text}" if c > 0 else f" - {text}")
        return "".join(pieces)

    def __str__(self) -> str:
        return self.to_text()


def _fmt_coef(c: float) -> str:
    if c.is_integer() and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JetSpace:
    """Names for the independent coordinates and the dependent fields."""

    coords: tuple[str, ...]
    fields: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "fields", tuple(self.fields))
        names = self.coords + self.fields
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        for n in names:
            if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", n):
                raise ValueError(f"invalid coordinate name {n!r}")

    @property
    def p(self) -> int:
        return len(self.coords)

    @property
    def q(self) -> int:
        return len(self.fields)

    def check(self, v: JetVar) -> JetVar:
        if v.is_indep:
            if v.index >= self.p:
                raise ValueError(f"coordinate index {v.index} out of range (p={self.p})")
        else:
            if v.index >= self.q:
                raise ValueError(f"field index {v.index} out of range (q={self.q})")
            if any(j >= self.p for j in v.J):
                raise ValueError(f"multi-index {v.J} out of range (p={self.p})")
        return v

    def name(self, v: JetVar) -> str:
        self.check(v)
        if v.is_indep:
            return self.coords[v.index]
        base = self.fields[v.index]
        if not v.J:
            return base
        return base + "_" + "".join(self.coords[j] for j in v.J)

    def indep(self, name_or_index) -> JetVar:
        i = self.coords.index(name_or_index) if isinstance(name_or_index, str) else int(name_or_index)
        return self.check(JetVar.indep(i))

    def deriv(self, field, J: Iterable = ()) -> JetVar:
        a = self.fields.index(field) if isinstance(field, str) else int(field)
        idx = [self.coords.index(j) if isinstance(j, str) else int(j) for j in J]
        return self.check(JetVar.deriv(a, idx))

    def lookup(self, name: str) -> JetVar:
        """Inverse of :meth:`name`."""
        if name in self.coords:
            return JetVar.indep(self.coords.index(name))
        if name in self.fields:
            return JetVar.deriv(self.fields.index(name))
        base, sep, tail = name.rpartition("_")
        if sep and base in self.fields and tail:
            J = self._split_multi_index(tail)
            if J is not None:
                return self.check(JetVar.deriv(self.fields.index(base), J))
        raise KeyError(f"unknown jet coordinate {name!r}")

    def _split_multi_index(self, tail: str) -> list[int] | None:
        # greedy longest-match over coordinate names
        out: list[int] = []
        pos = 0
        names = sorted(self.coords, key=len, reverse=True)
        while pos < len(tail):
            for n in names:
                if tail.startswith(n, pos):
                    out.append(self.coords.index(n))
                    pos += len(n)
                    break
            else:
                return None
        return out

    def order0_vars(self) -> list[JetVar]:
        return [JetVar.indep(i) for i in range(self.p)] + [JetVar.deriv(a) for a in range(self.q)]

    def all_vars(self, n: int) -> list[JetVar]:
        """Every jet coordinate up to order ``n``, graded order."""
        from itertools import combinations_with_replacement

        out = [JetVar.indep(i) for i in range(self.p)]
        for a in range(self.q):
            for k in range(n + 1):
                for J in combinations_with_replacement(range(self.p), k):
                    out.append(JetVar.deriv(a, J))
        return out

    def to_dict(self) -> dict:
        return {"coords": list(self.coords), "fields": list(self.fields)}


def _default_space(poly: JetPoly) -> JetSpace:
    vs = poly.variables()
    p = max([v.index + 1 for v in vs if v.is_indep] + [j + 1 for v in vs for j in v.J] + [0])
    q = max([v.index + 1 for v in vs if not v.is_indep] + [0])
    coords = ("t", "x", "y", "z")[:p] if p <= 4 else tuple(f"x{i}" for i in range(p))
    fields = ("u", "v", "w")[:q] if q <= 3 else tuple(f"u{a}" for a in range(q))
    return JetSpace(coords, fields)


def total_derivative(poly: JetPoly, i: int, space: JetSpace | None = None) -> JetPoly:
    if i < 0 or (space is not None and i >= space.p):
        raise ValueError(f"coordinate index {i} out of range")
    return poly.total_derivative(i)


def total_derivative_multi(poly: JetPoly, J: Sequence[int], space: JetSpace | None = None) -> JetPoly:
    for i in J:
        poly = total_derivative(poly, i, space)
    return poly


# ---------------------------------------------------------------------------
# parser: inverse of JetPoly.to_text, also accepts ``**`` and parentheses

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\d*\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z][A-Za-z0-9_]*)|(\*\*|[-+*^()/]))")


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse polynomial near {text[pos:]!r}")
        num, ident, op = m.groups()
        if num is not None:
            tokens.append(("num", num))
        elif ident is not None:
            tokens.append(("id", ident))
        else:
            tokens.append(("op", "^" if op == "**" else op))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens, space: JetSpace):
        self.toks = tokens
        self.pos = 0
        self.space = space

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expr(self) -> JetPoly:
        sign = 1.0
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1.0 if val == "-" else 1.0
        result = self.term() * sign
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                result = result + t if val == "+" else result - t
            else:
                return result

    def term(self) -> JetPoly:
        result = self.power()
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.take()
                result = result * self.power()
            elif kind == "op" and val == "/":
                self.take()
                denom = self.power().constant_value()
                if denom is None or denom == 0:
                    raise ValueError("division only by non-zero constants")
                result = result * (1.0 / denom)
            else:
                return result

    def power(self) -> JetPoly:
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            k, v = self.take()
            if k != "num" or not float(v).is_integer():
                raise ValueError("exponent must be a non-negative integer")
            return base ** int(float(v))
        return base

    def atom(self) -> JetPoly:
        kind, val = self.take()
        if kind == "num":
            return JetPoly.const(float(val))
        if kind == "id":
            return JetPoly.var(self.space.lookup(val))
        if kind == "op" and val == "(":
            inner = self.expr()
            k, v = self.take()
            if (k, v) != ("op", ")"):
                raise ValueError("unbalanced parentheses")
            return inner
        if kind == "op" and val == "-":
            return -self.atom()
        raise ValueError(f"unexpected token {val!r}")


def parse_poly(text: str, space: JetSpace) -> JetPoly:
    """Parse text produced by :meth:`JetPoly.to_text` (or hand-written)."""
    parser = _Parser(_tokenize(text), space)
    if not parser.toks:
        raise ValueError("empty polynomial")
    result = parser.expr()
    if parser.pos != len(parser.toks):
        raise ValueError(f"trailing input in {text!r}")
    if any(not math.isfinite(c) for c in result.terms.values()):
        raise ValueError("non-finite coefficient")
    return result
