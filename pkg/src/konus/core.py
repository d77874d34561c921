"""Utility functions, price functionals and utility-scale reparameterizations.

A utility function assigns a positive number to every basket in the open
positive orthant.  Two utilities with the same indifference sets differ by an
increasing relabelling ``G`` of the utility scale; :class:`GaugeMap` represents
such relabellings and :func:`apply_gauge` / :func:`reparameterize_section`
act with them on utilities and cross-sections.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.optimize.elementwise import find_root

from .errors import (
    BasketError,
    GaugeDomainError,
    LevelSetError,
    NonMonotone,
    NotSameFoliation,
)

DEFAULT_TOL = 1e-8


def as_basket(q, n: Optional[int] = None) -> np.ndarray:
    """Return ``q`` as a float vector after checking it lies in the positive orthant."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise BasketError(f"basket must be a non-empty vector, got shape {q.shape}")
    if n is not None and q.size != n:
        raise BasketError(f"basket has {q.size} goods, expected {n}")
    if not np.all(np.isfinite(q)) or np.any(q <= 0):
        raise BasketError(f"basket coordinates must be finite and strictly positive: {q}")
    return q


class UtilityFunction:
    """Common interface of cardinal utilities on the positive orthant.

    Subclasses provide ``value``, ``gradient`` and optionally ``hessian``
    for a single basket.
    """

    n: int
    label: Optional[str] = None

    def value(self, q: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, q: np.ndarray) -> Optional[np.ndarray]:
        return None

    @property
    def has_hessian(self) -> bool:
        return False

    def __call__(self, q) -> float:
        return eval_utility(self, q)


@dataclass(frozen=True, eq=False)
class CobbDouglas(UtilityFunction):
    """``C(q) = prod(q_i ** a_i)`` with strictly positive exponents."""

    exponents: tuple
    label: Optional[str] = None

    def __post_init__(self):
        a = tuple(float(x) for x in np.atleast_1d(np.asarray(self.exponents, dtype=float)))
        if not a:
            raise ValueError("Cobb-Douglas needs at least one exponent")
        if not all(np.isfinite(x) and x > 0 for x in a):
            raise ValueError(f"Cobb-Douglas exponents must be strictly positive, got {a}")
        object.__setattr__(self, "exponents", a)

    @property
    def n(self) -> int:
        return len(self.exponents)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.exponents)

    def value(self, q):
        return float(np.exp(np.dot(self.a, np.log(q))))

    def gradient(self, q):
        return self.a * self.value(q) / q

    def hessian(self, q):
        a = self.a
        c = self.value(q)
        return c * (np.outer(a, a) - np.diag(a)) / np.outer(q, q)

    @property
    def has_hessian(self) -> bool:
        return True

    def __eq__(self, other):
        return isinstance(other, CobbDouglas) and self.exponents == other.exponents

    def __hash__(self):
        return hash(self.exponents)


@dataclass(frozen=True, eq=False)
class BlackBox(UtilityFunction):
    """A utility given by callables.

    ``func`` and ``grad`` take a single basket (1-D array).  The gradient is
    mandatory; the Hessian is optional and only speeds up the numeric
    minimal-basket solver.
    """

    func: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    n: int
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.grad is None:
            raise ValueError("black-box utilities must supply a gradient evaluator")
        if int(self.n) < 1:
            raise ValueError("black-box utility needs n >= 1")

    def value(self, q):
        return float(self.func(q))

    def gradient(self, q):
        return np.asarray(self.grad(q), dtype=float)

    def hessian(self, q):
        if self.hess is None:
            return None
        return np.asarray(self.hess(q), dtype=float)

    @property
    def has_hessian(self) -> bool:
        return self.hess is not None


def eval_utility(C: UtilityFunction, q) -> float:
    """Evaluate ``C`` at basket ``q``; the result must be finite and positive."""
    q = as_basket(q, C.n)
    value = C.value(q)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"utility {C.label or C!r} returned non-positive value {value} at {q}")
    return value


@dataclass(frozen=True, eq=False)
class PriceFunctional:
    """Linear positive price functional ``q -> sum(p_i q_i)``."""

    prices: tuple

    def __post_init__(self):
        p = tuple(float(x) for x in np.atleast_1d(np.asarray(self.prices, dtype=float)))
        if not p:
            raise ValueError("price vector is empty")
        if not all(np.isfinite(x) and x > 0 for x in p):
            raise ValueError(f"prices must be strictly positive, got {p}")
        object.__setattr__(self, "prices", p)

    @property
    def n(self) -> int:
        return len(self.prices)

    @property
    def p(self) -> np.ndarray:
        return np.array(self.prices)

    def __call__(self, q) -> float:
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != self.n:
            raise BasketError(f"basket has {q.shape[-1]} goods, expected {self.n}")
        return float(np.dot(self.p, q)) if q.ndim == 1 else q @ self.p

    def __eq__(self, other):
        return isinstance(other, PriceFunctional) and self.prices == other.prices

    def __hash__(self):
        return hash(self.prices)


class GaugeMap:
    """Increasing relabelling of the utility scale.

    Two representations exist: a pure scaling ``u -> s*u`` and a tabulated
    map through strictly increasing knots joined by shape-preserving
    (PCHIP) cubics.  The tabulated inverse is the exact inverse of the
    interpolant, found by bracketed root finding inside each knot interval.
    """

    def __init__(self, kind: str, scale: float = 1.0, knots=None, values=None):
        if kind == "affine":
            if not (np.isfinite(scale) and scale > 0):
                raise ValueError(f"affine gauge needs a positive scale, got {scale}")
            self.scale = float(scale)
        elif kind == "tabulated":
            knots = np.asarray(knots, dtype=float)
            values = np.asarray(values, dtype=float)
            if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
                raise ValueError("tabulated gauge needs matching 1-D knot and value arrays (>= 2 knots)")
            if np.any(knots <= 0) or np.any(values <= 0):
                raise ValueError("gauge knots and values must lie in the positive half-line")
            if np.any(np.diff(knots) <= 0):
                raise ValueError("gauge knots must be strictly increasing")
            if np.any(np.diff(values) <= 0):
                raise NonMonotone("gauge values must be strictly increasing")
            self.knots = knots
            self.values = values
            self._spline = PchipInterpolator(knots, values, extrapolate=False)
            self._d1 = self._spline.derivative(1)
            self._d2 = self._spline.derivative(2)
        else:
            raise ValueError(f"unknown gauge representation {kind!r}")
        self.kind = kind

    @classmethod
    def affine(cls, scale: float) -> "GaugeMap":
        return cls("affine", scale=scale)

    @classmethod
    def identity(cls) -> "GaugeMap":
        return cls("affine", scale=1.0)

    @classmethod
    def tabulated(cls, knots, values) -> "GaugeMap":
        return cls("tabulated", knots=knots, values=values)

    @classmethod
    def from_function(cls, f: Callable, u_min: float, u_max: float, num: int = 256) -> "GaugeMap":
        """Tabulate an increasing function on ``num`` log-spaced knots over ``[u_min, u_max]``."""
        knots = np.geomspace(u_min, u_max, num)
        return cls.tabulated(knots, np.asarray(f(knots), dtype=float))

    @property
    def domain(self):
        if self.kind == "affine":
            return (0.0, np.inf)
        return (float(self.knots[0]), float(self.knots[-1]))

    @property
    def range(self):
        if self.kind == "affine":
            return (0.0, np.inf)
        return (float(self.values[0]), float(self.values[-1]))

    @staticmethod
    def _clip(x, lo, hi, what):
        x = np.asarray(x, dtype=float)
        slack = 1e-12 * max(abs(lo), abs(hi))
        if np.any(x < lo - slack) or np.any(x > hi + slack) or np.any(~np.isfinite(x)):
            raise GaugeDomainError(f"{what} outside tabulated range [{lo}, {hi}]")
        return np.clip(x, lo, hi)

    def __call__(self, u):
        if self.kind == "affine":
            return self.scale * np.asarray(u, dtype=float) if np.ndim(u) else self.scale * float(u)
        x = self._clip(u, *self.domain, "gauge argument")
        out = self._spline(x)
        return out if np.ndim(u) else float(out)

    def derivative(self, u):
        if self.kind == "affine":
            return np.full(np.shape(u), self.scale) if np.ndim(u) else self.scale
        out = self._d1(self._clip(u, *self.domain, "gauge argument"))
        return out if np.ndim(u) else float(out)

    def second_derivative(self, u):
        if self.kind == "affine":
            return np.zeros(np.shape(u)) if np.ndim(u) else 0.0
        out = self._d2(self._clip(u, *self.domain, "gauge argument"))
        return out if np.ndim(u) else float(out)

    def inverse(self, v):
        if self.kind == "affine":
            return np.asarray(v, dtype=float) / self.scale if np.ndim(v) else float(v) / self.scale
        y = np.atleast_1d(self._clip(v, *self.range, "gauge inverse argument"))
        i = np.clip(np.searchsorted(self.values, y, side="right") - 1, 0, self.knots.size - 2)
        lo, hi = self.knots[i], self.knots[i + 1]
        res = find_root(lambda x, target: self._spline(x) - target, (lo, hi), args=(y,),
                        tolerances=dict(xrtol=4 * np.finfo(float).eps, xatol=0.0, fatol=0.0))
        x = np.where(y == self.values[i], lo, res.x)
        x = np.where(y == self.values[i + 1], hi, x)
        return x.reshape(np.shape(v)) if np.ndim(v) else float(x[0])

    def __repr__(self):
        if self.kind == "affine":
            return f"GaugeMap.affine({self.scale!r})"
        return f"GaugeMap.tabulated(<{self.knots.size} knots on [{self.knots[0]:g}, {self.knots[-1]:g}]>)"


def apply_gauge(G: GaugeMap, C: UtilityFunction) -> BlackBox:
    """Relabel utilities: ``q -> G(C(q))``.  Indifference sets are unchanged."""

    def func(q):
        return G(C.value(q))

    def grad(q):
        return G.derivative(C.value(q)) * C.gradient(q)

    def hess(q):
        u = C.value(q)
        g = C.gradient(q)
        return G.second_derivative(u) * np.outer(g, g) + G.derivative(u) * C.hessian(q)

    label = f"{G!r} o {C.label or type(C).__name__}"
    return BlackBox(func, grad, C.n, hess=hess if C.has_hessian else None, label=label)


@dataclass(frozen=True, eq=False)
class CrossSection:
    """A map ``u -> basket`` picking one basket on each level set of ``utility``."""

    utility: UtilityFunction
    map: Callable[[float], np.ndarray]

    def __call__(self, u: float) -> np.ndarray:
        return np.asarray(self.map(u), dtype=float)


def reparameterize_section(X: CrossSection, G: GaugeMap) -> CrossSection:
    """Section of ``G o C`` with the same image as ``X``: ``u -> X(G^-1(u))``."""
    return CrossSection(apply_gauge(G, X.utility), lambda u: X.map(G.inverse(u)))


def infer_gauge(C1: UtilityFunction, C2: UtilityFunction, samples: Sequence, tol: float = DEFAULT_TOL) -> GaugeMap:
    """Recover the increasing ``G`` with ``C2 = G o C1`` from sampled baskets.

    Tolerances are relative to ``max(1, |value|)``.  A pure scaling is
    returned when it fits every sample; otherwise the sorted level pairs are
    tabulated.
    """
    x = np.array([eval_utility(C1, q) for q in samples])
    y = np.array([eval_utility(C2, q) for q in samples])
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]

    # merge samples lying on one C1 level; C2 must agree there
    levels, images = [], []
    start = 0
    for i in range(1, x.size + 1):
        if i == x.size or x[i] - x[start] > tol * max(1.0, x[start]):
            ys = y[start:i]
            if ys.max() - ys.min() > tol * max(1.0, abs(ys.max())):
                j, k = start + int(np.argmin(ys)), start + int(np.argmax(ys))
                raise NotSameFoliation(
                    f"C1 = {x[j]:.10g} at two samples but C2 = {y[j]:.10g} vs {y[k]:.10g}")
            levels.append(x[start:i].mean())
            images.append(ys.mean())
            start = i
    levels, images = np.array(levels), np.array(images)
    if levels.size < 2:
        raise ValueError("need samples on at least two distinct utility levels")

    scale = float(np.dot(levels, images) / np.dot(levels, levels))
    if scale > 0 and np.all(np.abs(scale * levels - images) <= tol * np.maximum(1.0, np.abs(images))):
        return GaugeMap.affine(scale)
    steps = np.diff(images)
    if np.any(steps <= 0):
        k = int(np.argmin(steps))
        raise NonMonotone(
            f"levels {levels[k]:.10g} < {levels[k + 1]:.10g} map to {images[k]:.10g} >= {images[k + 1]:.10g}")
    return GaugeMap.tabulated(levels, images)


def level_point(C: UtilityFunction, direction, u: float, rtol: float = 1e-14) -> np.ndarray:
    """Point where the ray through ``direction`` meets the level set ``C = u``.

    Utilities satisfying the structural hypotheses increase along rays, so
    the radius is bracketed geometrically and then refined by Brent's method.
    """
    w = as_basket(direction, C.n)

    def excess(r):
        value = C.value(r * w) - u
        if np.isnan(value):
            raise LevelSetError(f"utility undefined at radius {r:g} along {w}")
        return value

    at_one = excess(1.0)
    if at_one == 0:
        return w.copy()
    if at_one < 0:
        lo, hi = 1.0, 2.0
        while excess(hi) < 0:
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                raise LevelSetError(f"ray through {w} never reaches utility {u}")
    else:
        lo, hi = 0.5, 1.0
        while excess(lo) > 0:
            lo, hi = 0.5 * lo, lo
            if lo < 1e-300:
                raise LevelSetError(f"ray through {w} stays above utility {u}")
    r = brentq(excess, lo, hi, xtol=1e-300, rtol=rtol, maxiter=500)
    return r * w


@dataclass
class ConvexityReport:
    passed: bool
    pairs_checked: int
    worst_margin: float = np.inf
    witness: Optional[tuple] = None
    message: str = ""

    def __bool__(self):
        return self.passed


def validate_convex_to_origin(C: UtilityFunction, u: float, sample_pairs: int = 64,
                              tol: float = DEFAULT_TOL, seed: int = 0) -> ConvexityReport:
    """Spot-check that the level set ``C = u`` is convex to the origin.

    Pairs of level-set points are located along random rays; the midpoint of
    each well-separated pair must have utility strictly above ``u`` (the ray
    through the midpoint then crosses the level set before reaching it).
    The margin reported is ``C(midpoint)/u - 1``.  Raises
    :class:`LevelSetError` when a ray never attains ``u``.
    """
    if C.n == 1:
        return ConvexityReport(True, 0, message="one good: level sets are single points")
    rng = np.random.default_rng(seed)
    worst, witness, checked = np.inf, None, 0
    for _ in range(sample_pairs):
        q1 = level_point(C, rng.dirichlet(np.ones(C.n)), u)
        q2 = level_point(C, rng.dirichlet(np.ones(C.n)), u)
        if np.linalg.norm(q1 - q2) < 1e-2 * min(np.linalg.norm(q1), np.linalg.norm(q2)):
            continue
        mid = 0.5 * (q1 + q2)
        margin = C.value(mid) / u - 1.0
        checked += 1
        if margin < worst:
            worst, witness = margin, (q1, q2, mid)
    passed = checked == 0 or worst > tol
    msg = "convex to origin" if passed else (
        f"midpoint {np.array2string(witness[2], precision=6)} has utility ratio {1 + worst:.10g} <= 1")
    return ConvexityReport(passed, checked, worst, witness, msg)


def validate_cross_section(X: CrossSection, u_grid, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``|C(X(u)) - u| <= tol * max(1, u)`` on every grid point."""
    for u in u_grid:
        if abs(X.utility.value(X(u)) - u) > tol * max(1.0, u):
            return False
    return True
