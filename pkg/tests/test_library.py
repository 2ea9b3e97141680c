import json
import time

import numpy as np
import pytest

from pointsym.library import (
    build_linear_library,
    build_poly_library,
    d_theta,
    default_space,
    library_from_spec,
    load_library,
)
from pointsym.symexpr import JetSpace, JetVar, parse_poly

BURGERS = JetSpace(("t", "x"), ("u",))


def texts(polys, space):
    return [p.to_text(space) for p in polys]


def test_poly_library_orders():
    lib = build_poly_library(1, 1, 2)
    assert lib.texts() == ["1", "x", "u", "x^2", "u^2", "x*u"]
    lib = build_poly_library(2, 1, 2, BURGERS)
    assert lib.texts() == ["1", "t", "x", "u", "t^2", "x^2", "u^2", "t*x", "t*u", "x*u"]
    lib = build_poly_library(3, 2, 2)
    assert lib.r == 21
    assert lib.texts()[:6] == ["1", "t", "x", "y", "u", "v"]


def test_poly_library_count_formula():
    from math import comb

    for p, q, deg in [(1, 1, 3), (2, 2, 2), (0, 3, 2), (3, 1, 1)]:
        assert build_poly_library(p, q, deg).r == comb(p + q + deg, deg)


def test_poly_library_rejects_degree_zero():
    with pytest.raises(ValueError):
        build_poly_library(1, 1, 0)


def test_linear_library():
    lib = build_linear_library(0, 4)
    assert lib.texts() == ["p0", "p1", "p2", "p3"]
    assert build_linear_library(1, 1, True).texts() == ["1", "x", "u"]
    assert build_linear_library(1, 1, False).texts() == ["x", "u"]


def test_library_rejects_derivative_entries():
    sp = default_space(1, 1)
    with pytest.raises(ValueError):
        library_from_spec({"coords": ["x"], "fields": ["u"], "entries": ["u_x"]})
    assert sp.fields == ("u",)


def test_d_theta_burgers_first_and_second():
    lib = build_poly_library(2, 1, 2, BURGERS)
    t0 = time.perf_counter()
    dx = texts(d_theta(lib, (1,)), BURGERS)
    dxx = texts(d_theta(lib, (1, 1)), BURGERS)
    dt = texts(d_theta(lib, (0,)), BURGERS)
    assert time.perf_counter() - t0 < 1.0
    P = lambda s: parse_poly(s, BURGERS).to_text(BURGERS)
    assert dx == [P(s) for s in ["0", "0", "1", "u_x", "0", "2*x", "2*u*u_x", "t", "t*u_x", "u + x*u_x"]]
    assert dxx == [P(s) for s in ["0", "0", "0", "u_xx", "0", "2", "2*u_x^2 + 2*u*u_xx", "0", "t*u_xx", "2*u_x + x*u_xx"]]
    assert dt == [P(s) for s in ["0", "1", "0", "u_t", "2*t", "0", "2*u*u_t", "x", "u + t*u_t", "x*u_t"]]


def test_d_theta_general_p1q1():
    sp = default_space(1, 1)
    lib = build_poly_library(1, 1, 2, sp)
    P = lambda s: parse_poly(s, sp)
    assert d_theta(lib, (0,)) == [P(s) for s in ["0", "1", "u_x", "2*x", "2*u*u_x", "u + x*u_x"]]


def test_d_theta_empty_and_permutation_invariant():
    lib = build_poly_library(3, 1, 2)
    assert d_theta(lib, ()) == list(lib.entries)
    assert d_theta(lib, (2, 0, 1)) == d_theta(lib, (0, 1, 2))


def test_d_theta_matches_chain_rule_numerically():
    # Theta(x, f(x)) differentiated twice by finite differences
    sp = default_space(1, 1)
    lib = build_poly_library(1, 1, 2, sp)
    f = [lambda x: np.exp(0.3 * x), lambda x: 0.3 * np.exp(0.3 * x), lambda x: 0.09 * np.exp(0.3 * x)]
    x0, h = 0.7, 1e-3

    def theta(x):
        return np.array([e.evaluate({JetVar.indep(0): x, JetVar.deriv(0): f[0](x)}) for e in lib.entries])

    fd = (theta(x0 + h) - 2 * theta(x0) + theta(x0 - h)) / h**2
    pt = {JetVar.indep(0): x0, **{JetVar.deriv(0, (0,) * k): f[k](x0) for k in range(3)}}
    exact = np.array([e.evaluate(pt) for e in d_theta(lib, (0, 0))])
    np.testing.assert_allclose(fd, exact, atol=1e-5)


def test_library_file_round_trip(tmp_path):
    lib = build_poly_library(2, 1, 2, BURGERS)
    lib.save(tmp_path / "lib.json")
    spec = json.loads((tmp_path / "lib.json").read_text())
    assert spec["entries"][-1] == "x*u"
    assert load_library(tmp_path / "lib.json").entries == lib.entries


def test_linear_mask():
    lib = build_poly_library(2, 1, 2, BURGERS)
    assert lib.linear_mask() == [False, True, True, True, False, False, False, False, False, False]
