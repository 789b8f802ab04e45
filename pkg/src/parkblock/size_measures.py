"""File-size measures.

A size measure ``nu`` on ``(0, inf)`` drives both the arrival intensity
(``dt dx nu(dl)``) and the closed-form theory. It is a measure, not a
probability: only ``sample`` normalises by the total mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special


class InfiniteMoment(ValueError):
    pass


class MeasureError(ValueError):
    pass


class SizeMeasure:
    """Base class. Subclasses are frozen dataclasses."""

    def total_mass(self) -> float:
        return self.tail(0.0)

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def tail(self, x):
        """``nu(]x, inf])``; vectorised over ``x``."""
        raise NotImplementedError

    def laplace_mass(self, rho):
        """``int (1 - exp(-rho l)) nu(dl)`` (the Laplace exponent of a
        driftless subordinator with Levy measure ``nu``)."""
        raise NotImplementedError

    def laplace_mass_deriv(self, rho):
        """Derivative of :meth:`laplace_mass`, ``int l exp(-rho l) nu(dl)``."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def truncated(self, eps: float) -> "SizeMeasure":
        """Restriction of the measure to sizes ``> eps``.

        Dropping small files removes ``int_0^eps l nu(dl)`` of mean arriving
        mass per unit area, so ``m`` and the saturation time ``1/m`` shift.
        All measures here already have finite mass; this exists for user
        supplied measures approximated by cutting their small-size part.
        """
        return Truncated(self, eps)


@dataclass(frozen=True)
class Dirac(SizeMeasure):
    a: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise MeasureError(f"Dirac size must be positive and finite, got {self.a}")

    def mean(self):
        return float(self.a)

    def second_moment(self):
        return float(self.a) ** 2

    def tail(self, x):
        return np.where(np.asarray(x) < self.a, 1.0, 0.0)[()]

    def laplace_mass(self, rho):
        return -np.expm1(-np.asarray(rho, dtype=float) * self.a)[()]

    def laplace_mass_deriv(self, rho):
        return (self.a * np.exp(-np.asarray(rho, dtype=float) * self.a))[()]

    def sample(self, rng, size=None):
        if size is None:
            return float(self.a)
        return np.full(size, float(self.a))

    def to_text(self):
        return f"dirac:{self.a:g}"


@dataclass(frozen=True)
class Exponential(SizeMeasure):
    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise MeasureError(f"rate must be positive and finite, got {self.rate}")

    def mean(self):
        return 1.0 / self.rate

    def second_moment(self):
        return 2.0 / self.rate**2

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.rate * np.maximum(x, 0.0))[()]

    def laplace_mass(self, rho):
        rho = np.asarray(rho, dtype=float)
        return (rho / (self.rate + rho))[()]

    def laplace_mass_deriv(self, rho):
        rho = np.asarray(rho, dtype=float)
        return (self.rate / (self.rate + rho) ** 2)[()]

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def to_text(self):
        return f"exp:{self.rate:g}"


@dataclass(frozen=True)
class Gamma(SizeMeasure):
    shape: float
    scale: float

    def __post_init__(self):
        for name in ("shape", "scale"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise MeasureError(f"{name} must be positive and finite, got {v}")

    def mean(self):
        return self.shape * self.scale

    def second_moment(self):
        return self.shape * (self.shape + 1.0) * self.scale**2

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammaincc(self.shape, np.maximum(x, 0.0) / self.scale)[()]

    def laplace_mass(self, rho):
        rho = np.asarray(rho, dtype=float)
        return -np.expm1(-self.shape * np.log1p(rho * self.scale))[()]

    def laplace_mass_deriv(self, rho):
        rho = np.asarray(rho, dtype=float)
        return (self.shape * self.scale * (1.0 + rho * self.scale) ** (-self.shape - 1.0))[()]

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)

    def to_text(self):
        return f"gamma:{self.shape:g},{self.scale:g}"


@dataclass(frozen=True)
class FiniteDiscrete(SizeMeasure):
    """Atoms ``sizes[k]`` with weights ``weights[k]`` (weights need not sum to 1)."""

    sizes: tuple
    weights: tuple
    _s: np.ndarray = field(init=False, repr=False, compare=False)
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.sizes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.ndim != 1 or s.shape != w.shape or s.size == 0:
            raise MeasureError("sizes and weights must be non-empty 1-d sequences of equal length")
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise MeasureError("atom sizes must be positive and finite")
        if np.any(~np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
            raise MeasureError("weights must be non-negative, finite and not all zero")
        order = np.argsort(s, kind="stable")
        object.__setattr__(self, "_s", s[order])
        object.__setattr__(self, "_w", w[order])

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "FiniteDiscrete":
        sizes, weights = zip(*pairs)
        return cls(tuple(float(s) for s in sizes), tuple(float(w) for w in weights))

    def mean(self):
        return float(np.dot(self._s, self._w))

    def second_moment(self):
        return float(np.dot(self._s**2, self._w))

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        # mass strictly above x
        cum_above = np.concatenate([np.cumsum(self._w[::-1])[::-1], [0.0]])
        idx = np.searchsorted(self._s, x, side="right")
        return cum_above[idx][()]

    def laplace_mass(self, rho):
        rho = np.asarray(rho, dtype=float)
        return (-np.expm1(-np.multiply.outer(rho, self._s)) @ self._w)[()]

    def laplace_mass_deriv(self, rho):
        rho = np.asarray(rho, dtype=float)
        return ((self._s * np.exp(-np.multiply.outer(rho, self._s))) @ self._w)[()]

    def sample(self, rng, size=None):
        p = self._w / self._w.sum()
        out = rng.choice(self._s, size=size, p=p)
        return float(out) if size is None else out

    def to_text(self):
        return "discrete:" + ",".join(f"{s:g}={w:g}" for s, w in zip(self._s, self._w))


@dataclass(frozen=True)
class Truncated(SizeMeasure):
    """``base`` restricted to ``]eps, inf[``."""

    base: SizeMeasure
    eps: float

    def __post_init__(self):
        if not self.eps >= 0:
            raise MeasureError("eps must be >= 0")
        if not self.base.tail(self.eps) > 0:
            raise MeasureError("truncation removes all mass")

    def tail(self, x):
        return self.base.tail(np.maximum(np.asarray(x, dtype=float), self.eps))

    def _moment(self, k):
        # int_{]eps,inf[} l^k nu(dl) = eps^k nubar(eps) + int_eps^inf k l^{k-1} nubar(l) dl
        f = lambda l: k * l ** (k - 1) * self.base.tail(l)
        val, _ = integrate.quad(f, self.eps, np.inf, limit=200)
        return self.eps**k * float(self.base.tail(self.eps)) + val

    def mean(self):
        return self._moment(1)

    def second_moment(self):
        return self._moment(2)

    def laplace_mass(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.empty_like(rho)
        for i, r in enumerate(rho):
            # integration by parts against the tail
            f = lambda l: r * math.exp(-r * l) * float(self.base.tail(l))
            val, _ = integrate.quad(f, self.eps, np.inf, limit=200)
            out[i] = -math.expm1(-r * self.eps) * float(self.base.tail(self.eps)) + val
        return out[()] if out.size > 1 else float(out[0])

    def laplace_mass_deriv(self, rho, h=1e-6):
        rho = np.asarray(rho, dtype=float)
        return (self.laplace_mass(rho + h) - self.laplace_mass(np.maximum(rho - h, 0.0))) / (
            rho + h - np.maximum(rho - h, 0.0)
        )

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        out = np.empty(0)
        while out.size < n:
            draw = np.atleast_1d(self.base.sample(rng, max(2 * n, 16)))
            out = np.concatenate([out, draw[draw > self.eps]])
        out = out[:n]
        return float(out[0]) if size is None else out.reshape(size)

    def to_text(self):
        return f"{self.base.to_text()}|trunc={self.eps:g}"


def parse_measure(text: str) -> SizeMeasure:
    """Parse ``dirac:a``, ``exp:rate``, ``gamma:shape,scale`` or
    ``discrete:s1=w1,s2=w2,...``."""
    try:
        kind, _, args = text.strip().partition(":")
        kind = kind.strip().lower()
        if kind == "dirac":
            return Dirac(float(args))
        if kind in ("exp", "exponential"):
            return Exponential(float(args))
        if kind == "gamma":
            k, theta = (float(v) for v in args.split(","))
            return Gamma(k, theta)
        if kind == "discrete":
            pairs = []
            for item in args.split(","):
                s, w = item.split("=")
                pairs.append((float(s), float(w)))
            return FiniteDiscrete.from_pairs(pairs)
    except (ValueError, TypeError) as exc:
        raise MeasureError(f"cannot parse size measure {text!r}: {exc}") from exc
    raise MeasureError(f"unknown size measure kind in {text!r}")
