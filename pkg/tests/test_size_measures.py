import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from parkblock.size_measures import (
    Dirac,
    Exponential,
    FiniteDiscrete,
    Gamma,
    MeasureError,
    Truncated,
    parse_measure,
)

VARIANTS = [
    Dirac(1.0),
    Dirac(2.5),
    Exponential(1.0),
    Exponential(3.0),
    Gamma(2.0, 0.5),
    Gamma(0.7, 1.3),
    FiniteDiscrete((1.0, 3.0), (0.5, 0.5)),
    FiniteDiscrete((0.2, 1.0, 4.0), (2.0, 1.0, 0.1)),
]


def test_mean_examples():
    assert Dirac(1).mean() == 1
    assert Exponential(1).mean() == 1
    assert FiniteDiscrete.from_pairs([(1, 0.5), (3, 0.5)]).mean() == 2


def test_tail_examples():
    assert Dirac(1).tail(0.5) == 1
    assert Dirac(1).tail(1.0) == 0
    assert Exponential(1).tail(math.log(2)) == pytest.approx(0.5, abs=1e-15)


def test_second_moment_examples():
    assert Dirac(1).second_moment() == 1
    assert Exponential(1).second_moment() == 2
    assert FiniteDiscrete.from_pairs([(1, 0.5), (3, 0.5)]).second_moment() == 5


def test_sample_examples():
    rng = np.random.default_rng(0)
    assert np.all(Dirac(1).sample(rng, 100) == 1)
    assert Dirac(1).sample(rng) == 1
    assert np.all(FiniteDiscrete.from_pairs([(2, 1.0)]).sample(rng, 100) == 2)
    x = Exponential(1).sample(rng, 100_000)
    assert abs(x.mean() - 1) < 0.02


@pytest.mark.parametrize("nu", VARIANTS, ids=lambda v: v.to_text())
def test_tail_monotone_and_bounded(nu):
    grid = np.linspace(0, 10, 2001)
    tail = nu.tail(grid)
    assert np.all(np.diff(tail) <= 0)
    assert np.all(tail <= nu.total_mass())
    assert nu.tail(1e6) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("nu", VARIANTS, ids=lambda v: v.to_text())
def test_mean_is_integral_of_tail(nu):
    # split at atoms so quad sees a smooth integrand on each piece
    pts = sorted({0.0, *getattr(nu, "_s", ()), *([nu.a] if isinstance(nu, Dirac) else [])})
    total = sum(integrate.quad(lambda x: float(nu.tail(x)), a, b, epsabs=0, epsrel=1e-10)[0] for a, b in zip(pts, pts[1:]))
    total += integrate.quad(lambda x: float(nu.tail(x)), pts[-1], np.inf, epsabs=0, epsrel=1e-10, limit=200)[0]
    assert total == pytest.approx(nu.mean(), rel=1e-6)


@pytest.mark.parametrize("nu", [v for v in VARIANTS if isinstance(v, (Exponential, Gamma))], ids=lambda v: v.to_text())
def test_sampling_matches_tail_ks(nu):
    rng = np.random.default_rng(7)
    x = nu.sample(rng, 10_000)
    res = stats.kstest(x, lambda u: 1 - nu.tail(u) / nu.total_mass())
    assert res.pvalue > 0.01


@pytest.mark.parametrize("nu", [v for v in VARIANTS if isinstance(v, FiniteDiscrete)], ids=lambda v: v.to_text())
def test_sampling_matches_weights(nu):
    rng = np.random.default_rng(3)
    x = nu.sample(rng, 10_000)
    s, w = nu._s, nu._w / nu._w.sum()
    counts = np.array([(x == si).sum() for si in s])
    assert counts.sum() == x.size
    assert stats.chisquare(counts, w * x.size).pvalue > 0.01


def test_laplace_mass_matches_quadrature():
    for nu in VARIANTS:
        for rho in (0.1, 1.0, 5.0):
            # int (1 - e^{-rho l}) nu(dl) = int rho e^{-rho x} nu_bar(x) dx
            pts = [0.0, 1.0, 3.0, 4.0, np.inf]
            ref = sum(
                integrate.quad(lambda x: rho * math.exp(-rho * x) * float(nu.tail(x)), a, b, epsrel=1e-11)[0]
                for a, b in zip(pts, pts[1:])
            )
            assert nu.laplace_mass(rho) == pytest.approx(ref, rel=1e-7)
            h = 1e-6
            num = (nu.laplace_mass(rho + h) - nu.laplace_mass(rho - h)) / (2 * h)
            assert nu.laplace_mass_deriv(rho) == pytest.approx(num, rel=1e-6, abs=1e-9)


def test_parse_measure_grammar():
    assert parse_measure("dirac:1") == Dirac(1.0)
    assert parse_measure("exp:2") == Exponential(2.0)
    assert parse_measure("gamma:2,0.5") == Gamma(2.0, 0.5)
    d = parse_measure("discrete:1=0.5,3=0.5")
    assert d.mean() == 2
    for nu in VARIANTS:
        assert parse_measure(nu.to_text()).mean() == pytest.approx(nu.mean(), rel=1e-5)
    for bad in ("dirac:-1", "exp:0", "pareto:1", "discrete:1", "gamma:1"):
        with pytest.raises(MeasureError):
            parse_measure(bad)


def test_invalid_measures_rejected():
    with pytest.raises(MeasureError):
        Dirac(0)
    with pytest.raises(MeasureError):
        FiniteDiscrete((1.0, -2.0), (1.0, 1.0))
    with pytest.raises(MeasureError):
        FiniteDiscrete((1.0,), (0.0,))
    with pytest.raises(MeasureError):
        Exponential(float("inf"))


def test_discrete_weights_are_a_measure():
    nu = FiniteDiscrete((1.0, 2.0), (2.0, 2.0))
    assert nu.total_mass() == 4
    assert nu.mean() == 6
    assert nu.tail(1.0) == 2
    assert nu.tail(0.999) == 4


def test_truncation():
    nu = Truncated(Exponential(1.0), 0.5)
    assert nu.total_mass() == pytest.approx(math.exp(-0.5))
    assert nu.mean() == pytest.approx(1.5 * math.exp(-0.5), rel=1e-9)
    assert nu.second_moment() == pytest.approx((0.25 + 1 + 2) * math.exp(-0.5), rel=1e-9)
    x = nu.sample(np.random.default_rng(0), 5000)
    assert x.min() > 0.5
    assert nu.laplace_mass(1.0) == pytest.approx(math.exp(-0.5) - 0.5 * math.exp(-1.0), rel=1e-8)
    with pytest.raises(MeasureError):
        Dirac(1.0).truncated(2.0)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.01, 10), st.floats(0.01, 5)), min_size=1, max_size=6),
    st.floats(0, 12),
)
def test_discrete_tail_properties(pairs, x):
    nu = FiniteDiscrete.from_pairs(pairs)
    s = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])
    assert nu.tail(x) == pytest.approx(w[s > x].sum(), abs=1e-12)
    assert nu.mean() == pytest.approx(float(s @ w), rel=1e-12)
    assert nu.tail(x) <= nu.total_mass() + 1e-12
