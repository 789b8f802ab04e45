"""Closed forms and numerical evaluations for the block covering the origin.

Everything here is a pure function of its arguments. Notation: ``t`` is
time, ``m`` the mean of the size measure, ``phi(rho) = int (1 - e^{-rho l})
nu(dl)``. The spatial process ``Y`` has Laplace exponent
``psi(rho) = -rho + t phi(rho)``; ``kappa`` inverts ``-psi`` and is the
Laplace exponent of the free-space subordinators on either side of the block.

The explicit laws (Borel lengths, ballot-type first passages, the density of
the left jumps) are for a point mass size measure. ``Dirac(a)`` reduces to
unit sizes by rescaling space by ``a``, which turns ``t`` into ``t a``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from .size_measures import Dirac, InfiniteMoment, SizeMeasure

SERIES_RTOL = 1e-15
SERIES_CAP = 100_000


class NoConvergence(RuntimeError):
    pass


class QuadratureFailure(RuntimeError):
    pass


class UnsupportedMeasure(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    nu: SizeMeasure
    t: float

    def __post_init__(self):
        if not (0 <= self.t < 1.0 / self.m):
            raise ValueError(f"need 0 <= t < 1/m = {1.0 / self.m}, got t={self.t}")

    @property
    def m(self) -> float:
        return float(self.nu.mean())

    @property
    def load(self) -> float:
        return self.m * self.t


def _dirac_scale(nu: SizeMeasure) -> float:
    if not isinstance(nu, Dirac):
        raise UnsupportedMeasure(f"closed form needs a point mass size measure, got {nu.to_text()}")
    return float(nu.a)


# ---------------------------------------------------------------------------
# Laplace exponents


def psi(params: ModelParams, rho):
    """``-rho + t int (1 - e^{-rho x}) nu(dx)``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be >= 0")
    return (-rho + params.t * params.nu.laplace_mass(rho))[()]


def _kappa_scalar(params: ModelParams, rho: float) -> float:
    if rho == 0.0:
        return 0.0
    t, nu = params.t, params.nu
    if t == 0.0:
        return rho
    f = lambda s: s - t * float(nu.laplace_mass(s)) - rho
    hi = rho / (1.0 - params.load)
    lo = rho
    if f(hi) < 0:  # rounding at the upper end
        hi *= 1.0 + 1e-12
    try:
        s, r = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, full_output=True)
    except (ValueError, RuntimeError) as exc:
        raise NoConvergence(f"kappa({rho}) failed: {exc}") from exc
    if not r.converged:
        raise NoConvergence(f"kappa({rho}) did not converge")
    # Newton polish; f' = 1 - t phi' >= 1 - mt > 0
    for _ in range(2):
        step = f(s) / (1.0 - t * float(nu.laplace_mass_deriv(s)))
        s -= step
    if abs(f(s)) > 1e-12 * max(1.0, rho):
        raise NoConvergence(f"kappa({rho}): residual {f(s)}")
    return s


def kappa(params: ModelParams, rho):
    """Inverse of ``-psi``: the ``s >= 0`` with ``s - t phi(s) = rho``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be >= 0")
    out = np.vectorize(lambda r: _kappa_scalar(params, float(r)), otypes=[float])(rho)
    return out[()]


def kappa_prime_zero(params: ModelParams, h: float = 1e-6) -> float:
    """One-sided difference at 0 with one Richardson step."""
    d1 = _kappa_scalar(params, h) / h
    d2 = _kappa_scalar(params, h / 2) / (h / 2)
    return 2.0 * d2 - d1


# ---------------------------------------------------------------------------
# unit-size closed forms


def _log_pois(n, lam):
    """log of ``e^{-lam} lam^n / n!`` with ``0^0 = 1``."""
    n = np.asarray(n, dtype=float)
    return special.xlogy(n, lam) - lam - special.gammaln(n + 1.0)


def borel_size_biased_pmf(t: float, n):
    """``(1 - t) (t n)^n e^{-t n} / n!``: law of ``l(t)`` for unit sizes."""
    n = np.asarray(n)
    if not 0 <= t < 1:
        raise ValueError("need 0 <= t < 1")
    out = (1.0 - t) * np.exp(_log_pois(n, t * n))
    return np.where(n >= 0, out, 0.0)[()]


def pi_dirac_mass(t: float, n):
    """Atom of the Levy measure of ``kappa`` at ``n`` (unit sizes)."""
    n = np.asarray(n, dtype=float)
    if not 0 <= t < 1:
        raise ValueError("need 0 <= t < 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(_log_pois(n, t * n)) / n
    return np.where(n >= 1, out, 0.0)[()]


def pi_atoms(params: ModelParams, tol: float = SERIES_RTOL, cap: int = SERIES_CAP):
    """Atoms ``(sizes, masses)`` of the Levy measure of ``kappa`` for ``Dirac(a)``.

    Truncated once a term drops below ``tol`` times the partial sum of
    ``x Pi(dx)`` (or at ``cap`` atoms).
    """
    a = _dirac_scale(params.nu)
    ts = params.t * a
    if ts == 0:
        return np.zeros(0), np.zeros(0)
    # n Pi(n) = e^{-tn}(tn)^n/n! decreases in n (ratio < t e^{1-t} < 1)
    n, chunk = 0, 256
    sizes, masses = [], []
    total = 0.0
    while n < cap:
        k = np.arange(n + 1, min(n + chunk, cap) + 1)
        w = pi_dirac_mass(ts, k) / a
        terms = a * k * w
        csum = total + np.cumsum(terms)
        stop = np.flatnonzero(terms < tol * csum)
        cut = stop[0] + 1 if stop.size else k.size
        sizes.append(a * k[:cut])
        masses.append(w[:cut])
        if stop.size:
            break
        total = csum[-1]
        n = k[-1]
    return np.concatenate(sizes), np.concatenate(masses)


def tau_dirac_pmf(t: float, x, n):
    """``P(tau_x = x + n) = x/(x+n) e^{-t(x+n)} (t(x+n))^n / n!`` (unit sizes)."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    if not 0 <= t < 1:
        raise ValueError("need 0 <= t < 1")
    out = x / (x + n) * np.exp(_log_pois(n, t * (x + n)))
    return np.where(n >= 0, out, 0.0)[()]


def tau_mixture_pmf(t: float, n, nodes: int = 64):
    """``int_0^1 P(tau_z = z + n) dz``: law of ``floor(D_i)`` for unit sizes,
    where ``D_i`` is the first passage of a uniform remaining quantity."""
    z, w = np.polynomial.legendre.leggauss(nodes)
    z, w = 0.5 * (z + 1.0), 0.5 * w
    n = np.asarray(n, dtype=float)
    vals = tau_dirac_pmf(t, z[None, :], np.atleast_1d(n)[:, None]) @ w
    return vals.reshape(n.shape)[()]


def poisson_y_pmf(t: float, x: float, n):
    """``P(Y_x + x = n)`` for unit sizes: Poisson with mean ``t x``."""
    return np.exp(_log_pois(n, t * x))[()]


def measure_identity_residual_dirac(t: float, l: int, n: int) -> float:
    """``x P(tau_l = x) - l P(-Y_x = l)`` at ``x = l + n`` (unit sizes)."""
    x = l + n
    lhs = x * tau_dirac_pmf(t, l, n)
    rhs = l * poisson_y_pmf(t, x, n)
    return float(lhs - rhs)


# ---------------------------------------------------------------------------
# moment relations


@dataclass(frozen=True)
class RelationsReport:
    pi_total_mass: float
    pi_total_mass_target: float
    pi_mean: float
    pi_mean_target: float
    kappa_prime: float
    kappa_prime_target: float
    truncation_terms: int

    @property
    def residuals(self) -> tuple[float, float, float]:
        return (
            abs(self.pi_total_mass - self.pi_total_mass_target),
            abs(self.pi_mean - self.pi_mean_target),
            abs(self.kappa_prime - self.kappa_prime_target),
        )


def relations_check(params: ModelParams) -> RelationsReport:
    """Total mass and mean of ``Pi``, and ``kappa'(0)``, against their closed forms.

    For point masses ``Pi`` is summed atom by atom. Otherwise ``Pi`` is only
    known through ``kappa``: its mass is ``lim (kappa(r) - r)`` and its mean
    ``kappa'(0) - 1``.
    """
    t, m = params.t, params.m
    mass_target = t * float(params.nu.total_mass())
    mean_target = m * t / (1.0 - m * t)
    kp = kappa_prime_zero(params) if t > 0 else 1.0
    if isinstance(params.nu, Dirac):
        sizes, masses = pi_atoms(params)
        mass = float(masses.sum())
        mean = float(sizes @ masses)
        terms = sizes.size
    else:
        r = 1e8
        mass = float(_kappa_scalar(params, r) - r) if t > 0 else 0.0
        mean = kp - 1.0
        terms = 0
    return RelationsReport(mass, mass_target, mean, mean_target, kp, 1.0 / (1.0 - m * t), terms)


# ---------------------------------------------------------------------------
# jump times


def remaining_density(nu: SizeMeasure, z):
    """Density ``nu_bar(z) / m`` of the data pushed past the left end of the block."""
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, nu.tail(np.maximum(z, 0.0)) / nu.mean(), 0.0)[()]


def jump_time_intensity(params: ModelParams) -> float:
    """Rate ``m / (1 - m t)`` of the jump times."""
    return params.m / (1.0 - params.load)


def expected_jump_count(params: ModelParams) -> float:
    """Expected number of jumps in ``[0, t]``: ``-log(1 - m t)``."""
    return float(-math.log1p(-params.load))


def stick_breaking_transform(jump_times, m: float, horizon: float | None = None) -> np.ndarray:
    """``U_i = (T_i - T_{i-1}) / (h - T_{i-1})`` with ``T_0 = 0``.

    With ``h = 1/m`` (the default) the ``U_i`` are iid uniform. Jump times
    only seen up to a horizon ``h < 1/m`` are uniform after normalising by
    ``h`` instead: given ``T_{i-1}`` and ``T_i <= h``, ``T_i`` is uniform on
    ``[T_{i-1}, h]``.
    """
    T = np.asarray(jump_times, dtype=float)
    h = 1.0 / m if horizon is None else float(horizon)
    if T.size and (np.any(np.diff(T) <= 0) or T[0] < 0 or T[-1] >= h):
        raise ValueError("jump times must be strictly increasing in [0, h)")
    prev = np.concatenate([[0.0], T[:-1]])
    return (T - prev) / (h - prev)


# ---------------------------------------------------------------------------
# left jumps


def _second_moment(nu: SizeMeasure) -> float:
    m2 = float(nu.second_moment())
    if not math.isfinite(m2):
        raise InfiniteMoment("second moment of the size measure is infinite")
    return m2


def mean_G_given_T(params: ModelParams) -> float:
    """Stated closed form ``(1/(1-mt)^2 + m/(2(1-mt))) int l^2 nu(dl)``.

    See :func:`mean_G_given_T_exact`: the stated form does not agree with
    the mean of the conditional density it is meant to summarise.
    """
    m2 = _second_moment(params.nu)
    q = 1.0 - params.load
    return (1.0 / q**2 + params.m / (2.0 * q)) * m2


def mean_G_given_T_exact(params: ModelParams) -> float:
    """``E(G_i | T_i = t) = (t/(1-mt)^2 + 1/(2m(1-mt))) int l^2 nu(dl)``.

    From the conditional density ``(1-mt)/m int P(Y_x in -dl) nu_bar(l)``:
    the measure identity turns ``int x P(-Y_x in dl) dx`` into
    ``E(tau_l^2)/l dl = (l kappa'(0)^2 - kappa''(0)) dl``, with
    ``kappa'(0) = 1/(1-mt)`` and ``kappa''(0) = -t m_2/(1-mt)^3``.
    """
    m2 = _second_moment(params.nu)
    q = 1.0 - params.load
    return (params.t / q**2 + 1.0 / (2.0 * params.m * q)) * m2


def g_left_jump_density_dirac(t: float, x):
    """Density ``(1-t) e^{-tx} (tx)^[x] / [x]!`` of ``G_i`` given ``T_i = t`` (unit sizes)."""
    x = np.asarray(x, dtype=float)
    if not 0 <= t < 1:
        raise ValueError("need 0 <= t < 1")
    k = np.floor(np.maximum(x, 0.0))
    out = (1.0 - t) * np.exp(_log_pois(k, t * np.maximum(x, 0.0)))
    return np.where(x >= 0, out, 0.0)[()]


def g_left_jump_cdf_dirac(t: float, x):
    """CDF of :func:`g_left_jump_density_dirac`, integrated cell by cell.

    On ``[k, k+1)`` the density is ``(1-t) t^k x^k e^{-tx}/k!``, whose
    integral is a difference of regularised incomplete gammas.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t == 0:
        return np.clip(x, 0.0, 1.0)[()] if x.size > 1 else float(np.clip(x[0], 0, 1))
    out = np.empty_like(x)
    kmax = int(np.floor(np.max(np.maximum(x, 0.0)))) + 1
    k = np.arange(kmax + 1, dtype=float)
    # full cell masses: (1-t)/t * [P(k+1, t(k+1)) - P(k+1, tk)]
    cell = (1.0 - t) / t * (special.gammainc(k + 1, t * (k + 1)) - special.gammainc(k + 1, t * k))
    before = np.concatenate([[0.0], np.cumsum(cell)])
    for i, xi in enumerate(x):
        if xi <= 0:
            out[i] = 0.0
            continue
        j = int(np.floor(xi))
        part = (1.0 - t) / t * (special.gammainc(j + 1, t * xi) - special.gammainc(j + 1, t * j))
        out[i] = before[j] + part
    return out[()] if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# law of g(t)


def prob_y_positive_dirac(t: float, x, a: float = 1.0):
    """``P(Y_x > 0)`` for ``Dirac(a)``: ``P(Poisson(t x) > x / a)``."""
    x = np.asarray(x, dtype=float)
    k = np.floor(x / a)
    return special.gammainc(k + 1.0, t * x)[()]


def prob_y_positive_mc(params: ModelParams, x, n: int = 200_000, seed: int = 12345, chunk: int = 2000):
    """Monte Carlo ``P(Y_x > 0)`` on a grid of ``x`` for a generic size measure.

    Each sample is one path of ``Y`` on ``[0, max x]``, so every grid point
    shares the same ``n`` paths.
    """
    rng = np.random.default_rng(seed)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(x)
    xs = x[order]
    lam = params.t * float(params.nu.total_mass())
    hits = np.zeros(xs.size)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        counts = rng.poisson(lam * xs[-1], k)
        total = int(counts.sum())
        pos = rng.uniform(0.0, xs[-1], total)
        sizes = np.asarray(params.nu.sample(rng, total), dtype=float).reshape(-1)
        owner = np.repeat(np.arange(k), counts)
        # a jump at pos counts for every grid point x >= pos
        col = np.searchsorted(xs, pos, side="left")
        S = np.zeros((k, xs.size + 1))
        np.add.at(S, (owner, col), sizes)
        S = np.cumsum(S[:, :-1], axis=1)
        hits += np.sum(S > xs, axis=0)
        done += k
    out = np.empty_like(hits)
    out[order] = hits / n
    return out


def g_laplace(params: ModelParams, lam, x_max: float | None = None, grid: int = 400):
    """``E exp(lam g(t)) = exp(int (e^{-lam x} - 1) x^{-1} P(Y_x > 0) dx)``.

    Point masses use the Poisson form of ``P(Y_x > 0)`` integrated one cell
    ``[k a, (k+1) a)`` at a time (the integrand jumps at the cell ends).
    Other measures use a Monte Carlo estimate of ``P(Y_x > 0)`` on a grid.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam_arr < 0):
        raise ValueError("lambda must be >= 0")
    t = params.t
    q = 1.0 - params.load
    if x_max is None:
        # P(Y_x > 0) decays like exp(-c x); c >= (1-mt)^2/(2 m2 t) near criticality
        m2 = float(params.nu.second_moment()) if t > 0 else 1.0
        x_max = max(50.0, 60.0 * m2 * max(t, 1e-3) / q**2 + 60.0 * params.m)
    out = np.empty_like(lam_arr)
    if t == 0:
        return np.ones_like(lam_arr)[()] if lam_arr.size > 1 else 1.0
    if isinstance(params.nu, Dirac):
        a = float(params.nu.a)
        for i, lm in enumerate(lam_arr):
            f = lambda x: -np.expm1(-lm * x) / x * prob_y_positive_dirac(t, x, a) if x > 0 else lm * 0.0
            total, cells = 0.0, int(math.ceil(x_max / a))
            for k in range(cells):
                with warnings.catch_warnings():
                    warnings.simplefilter("error", integrate.IntegrationWarning)
                    try:
                        val, err = integrate.quad(f, k * a, (k + 1) * a, epsabs=1e-14, epsrel=1e-12)
                    except integrate.IntegrationWarning as exc:
                        raise QuadratureFailure(str(exc)) from exc
                total += val
            out[i] = math.exp(-total)
    else:
        # fine near 0 where P(Y_x > 0) rises from 0, coarser in the tail
        xs = np.unique(np.concatenate([np.geomspace(1e-4, 2.0, grid // 4), np.linspace(2.0, x_max, grid)]))
        p = prob_y_positive_mc(params, xs)
        xs = np.concatenate([[0.0], xs])
        p = np.concatenate([[0.0], p])
        for i, lm in enumerate(lam_arr):
            with np.errstate(invalid="ignore", divide="ignore"):
                f = np.where(xs > 0, -np.expm1(-lm * xs) / xs, lm) * p
            out[i] = math.exp(-integrate.trapezoid(f, xs))
    return out[()] if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# lengths


def length_given_right_extremity(params: ModelParams, d: float):
    """Law of ``l(t)`` given ``d(t) = d``: ``Pi`` restricted to ``[d, inf)``, normalised.

    Returns ``(sizes, probabilities)`` over the atoms ``>= d``.
    """
    if not d > 0:
        raise ValueError("d must be > 0")
    sizes, masses = pi_atoms(params)
    keep = sizes >= d
    if not np.any(keep):
        raise ValueError("no mass at or above d")
    w = masses[keep]
    return sizes[keep], w / w.sum()


def length_jump_rate_dirac(t: float, l: float, n):
    """Rate of length jumps of size ``n`` at length ``l`` (unit sizes):
    ``(n + l)/n e^{-tn} (tn)^{n-1}/(n-1)!``."""
    n = np.asarray(n, dtype=float)
    base = np.exp(_log_pois(n - 1.0, t * n))
    return np.where(n >= 1, (n + l) / n * base, 0.0)[()]


def length_jump_total_rate_dirac(t: float, l: float) -> float:
    """Total length jump rate ``1/(1-t) + l`` (unit sizes): left-spill jumps
    at rate ``m/(1-mt)`` and files landing on the block at rate ``l``."""
    return 1.0 / (1.0 - t) + l


# ---------------------------------------------------------------------------
# identities


def first_passage_identity_check(t: float, x: float) -> tuple[float, float, float]:
    """Both sides of ``P(S_t > x) = int_0^t ds int_[0,x] P(S_s in db) nu_bar(x-b)``
    for ``S`` a Poisson process with unit jumps.

    Returns ``(left, right, residual)``; the right side is computed by
    quadrature in ``s``.
    """
    if t < 0 or x < 0:
        raise ValueError("t, x must be >= 0")
    k = int(math.floor(x))
    left = float(stats.poisson.sf(k, t)) if t > 0 else 0.0

    def inner(s):
        # atoms b in [0, x] with nu_bar(x - b) = 1{x - b < 1}: only b = floor(x)
        return float(np.exp(_log_pois(k, s))) if s > 0 else float(k == 0)

    right = integrate.quad(inner, 0.0, t, epsabs=1e-14, epsrel=1e-12)[0] if t > 0 else 0.0
    return left, right, abs(left - right)


@dataclass(frozen=True)
class RhoMassReport:
    t: float
    total_via_G: float
    total_via_R: float
    target: float
    grid: np.ndarray
    grid_residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        r = [abs(self.total_via_G - self.target), abs(self.total_via_R - self.target)]
        if self.grid_residuals.size:
            r.append(float(np.max(np.abs(self.grid_residuals))))
        return max(r)


def rho_marginal_consistency_dirac(t: float, grid=None) -> RhoMassReport:
    """Marginals of the jump intensity ``rho`` for unit sizes.

    The ``G`` marginal, as the conditional density times the jump rate, is
    compared on ``grid`` with ``int P(Y_x in -dl) nu_bar(l) = P(Poisson(tx) = [x])``,
    and both marginals are integrated to the total mass ``1/(1-t)``.
    """
    if not 0 <= t < 1:
        raise ValueError("need 0 <= t < 1")
    rate = 1.0 / (1.0 - t)
    via_G = rate * _g_total_mass(t)
    via_R = rate * integrate.quad(lambda z: float(remaining_density(Dirac(1.0), z)), 0.0, 1.0)[0]
    if grid is None:
        grid = np.linspace(0.05, 20.0, 400)
    grid = np.asarray(grid, dtype=float)
    lhs = rate * g_left_jump_density_dirac(t, grid)
    rhs = poisson_y_pmf(t, grid, np.floor(grid))
    return RhoMassReport(t, via_G, via_R, rate, grid, np.asarray(lhs - rhs))


def _g_total_mass(t: float) -> float:
    """``int_0^inf`` of the conditional ``G`` density, cell by cell."""
    total = 0.0
    k = 0
    while True:
        c = integrate.quad(lambda x: float(g_left_jump_density_dirac(t, x)), k, k + 1, epsabs=1e-15, epsrel=1e-13)[0]
        total += c
        k += 1
        if c < 1e-17 * total or k > 100_000:
            return total


# ---------------------------------------------------------------------------
# uniform split


@dataclass(frozen=True)
class SplitSample:
    u: np.ndarray
    l: np.ndarray


def uniform_split_samples(g, d, l) -> SplitSample:
    """``U = -g/l`` over blocks with ``l > 0``."""
    g, d, l = (np.asarray(v, dtype=float) for v in (g, d, l))
    keep = l > 0
    return SplitSample(-g[keep] / l[keep], l[keep])


def uniform_split_law_check(g, d, l, significance: float = 0.01):
    """KS of ``-g/l`` against ``U(0, 1)`` and rank correlation with ``l``."""
    from .stats import ks_test, rank_correlation

    s = uniform_split_samples(g, d, l)
    rep = ks_test(s.u, lambda u: np.clip(u, 0.0, 1.0), significance=significance, name="uniform-split")
    return rep, rank_correlation(s.u, s.l)
