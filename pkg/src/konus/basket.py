"""Minimal-price baskets and the cost-of-living function.

For a utility ``C``, prices ``P`` and a level ``u`` the minimal basket is the
cheapest basket on ``C = u``; its price is the cost of living ``c(u)``.
Cobb-Douglas utilities have a closed form; anything else goes through a
damped Newton solve of the Lagrange conditions

    p + lam * grad C(q) = 0,    C(q) = u

carried out in log-quantities so iterates stay in the positive orthant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOL,
    CobbDouglas,
    CrossSection,
    PriceFunctional,
    UtilityFunction,
    eval_utility,
    level_point,
)
from .errors import BasketError, NonConvergence


@dataclass(frozen=True, eq=False)
class MinimalBasketRecord:
    """Solution of the expenditure-minimisation problem at one utility level.

    ``multiplier`` is the Lagrange multiplier with ``p = -multiplier * grad C``;
    it is negative and ``-multiplier`` is the marginal cost of utility.
    ``residual`` is the larger of the relative stationarity and level errors.
    """

    u: float
    c: float
    q_star: np.ndarray
    multiplier: float
    residual: float = 0.0
    iterations: int = 0


def _check_problem(C: UtilityFunction, P: PriceFunctional, u: float):
    if C.n != P.n:
        raise BasketError(f"utility has {C.n} goods but prices have {P.n}")
    if not (np.isfinite(u) and u > 0):
        raise ValueError(f"utility level must be positive, got {u}")


def _residual(C, P, q, lam, u):
    p = P.p
    stationarity = np.max(np.abs(p + lam * C.gradient(q)) / p)
    return float(max(stationarity, abs(C.value(q) / u - 1.0)))


def minimal_basket_closed_form(a, P: PriceFunctional, u: float) -> MinimalBasketRecord:
    """Expenditure minimiser of ``prod(q_i ** a_i)`` at level ``u``.

    Each good receives the budget share ``a_i / sum(a)``, so
    ``q_i = a_i c / (p_i sum(a))`` with ``c`` fixed by the level constraint.
    """
    a = np.asarray(CobbDouglas(a).exponents)
    _check_problem(CobbDouglas(a), P, u)
    p = P.p
    total = a.sum()
    per_cost = a / (p * total)
    c = math.exp((math.log(u) - float(a @ np.log(per_cost))) / total)
    q = per_cost * c
    return MinimalBasketRecord(u=float(u), c=P(q), q_star=q, multiplier=-c / (total * u))


def _log_hessian_model(qg, cq):
    # exact for Cobb-Douglas; seeds the quasi-Newton Jacobian otherwise
    return np.outer(qg, qg) / cq - np.diag(qg)


def minimal_basket_numeric(C: UtilityFunction, P: PriceFunctional, u: float,
                           tol: float = DEFAULT_TOL, max_iter: int = 100) -> MinimalBasketRecord:
    """Solve the Lagrange system by damped Newton iteration.

    The start is the equal-expenditure direction ``1/(n p_i)`` scaled onto
    the level set.  When ``C`` has no Hessian the Jacobian is maintained by
    Broyden updates, seeded from a Cobb-Douglas-shaped curvature model.
    """
    _check_problem(C, P, u)
    p = P.p
    n = C.n
    q = level_point(C, 1.0 / (n * p), u)
    if n == 1:
        lam = float(-p[0] / C.gradient(q)[0])
        return MinimalBasketRecord(float(u), P(q), q, lam, _residual(C, P, q, lam, u), 0)

    g = C.gradient(q)
    lam = float(-(p @ g) / (g @ g))
    scale = P(q)
    exact = C.has_hessian

    def evaluate(x, lam):
        q = np.exp(x)
        cq = C.value(q)
        if not (np.isfinite(cq) and cq > 0):
            return None
        qg = q * C.gradient(q)
        F = np.append((p * q + lam * qg) / scale, math.log(cq / u))
        return F, q, cq, qg

    def jacobian(q, cq, qg, lam):
        curvature = q[:, None] * C.hessian(q) * q[None, :] if exact else _log_hessian_model(qg, cq)
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = (np.diag(p * q + lam * qg) + lam * curvature) / scale
        J[:n, n] = qg / scale
        J[n, :n] = qg / cq
        return J

    x = np.log(q)
    F, q, cq, qg = evaluate(x, lam)
    J = jacobian(q, cq, qg, lam)
    fresh = True
    iterations = 0
    for iterations in range(1, max_iter + 1):
        norm = np.linalg.norm(F)
        if np.max(np.abs(F)) <= 1e-15 or _residual(C, P, q, lam, u) <= 1e-4 * tol:
            break
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        # keep a single step from moving quantities by more than a factor e**2
        alpha = min(1.0, 2.0 / max(np.max(np.abs(step[:n])), 1e-300))
        accepted = None
        for _ in range(60):
            trial = evaluate(x + alpha * step[:n], lam + alpha * step[n])
            if trial is not None and np.linalg.norm(trial[0]) < norm:
                accepted = trial
                break
            alpha *= 0.5
        if accepted is None:
            if not exact and not fresh:
                J = jacobian(q, cq, qg, lam)
                fresh = True
                continue
            break
        s = alpha * step
        x, lam = x + s[:n], lam + s[n]
        F_new, q, cq, qg = accepted
        if exact:
            J = jacobian(q, cq, qg, lam)
        else:
            J = J + np.outer(F_new - F - J @ s, s) / (s @ s)
            fresh = False
        F = F_new

    residual = _residual(C, P, q, lam, u)
    if not residual <= tol:
        raise NonConvergence(
            f"minimal basket at u={u:g} stopped after {iterations} iterations with residual {residual:.3g}")
    return MinimalBasketRecord(float(u), P(q), q, float(lam), residual, iterations)


def minimal_basket(C: UtilityFunction, P: PriceFunctional, u: float,
                   tol: float = DEFAULT_TOL, method: str = "auto") -> MinimalBasketRecord:
    """Dispatch to the closed form for Cobb-Douglas utilities, else the numeric path."""
    if method == "closed" or (method == "auto" and isinstance(C, CobbDouglas)):
        if not isinstance(C, CobbDouglas):
            raise TypeError("closed form requires a Cobb-Douglas utility")
        return minimal_basket_closed_form(C.exponents, P, u)
    if method not in ("auto", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    return minimal_basket_numeric(C, P, u, tol)


def cost_of_living(C: UtilityFunction, P: PriceFunctional, u: float,
                   tol: float = DEFAULT_TOL, method: str = "auto") -> float:
    """Minimum expenditure needed to reach utility ``u`` at prices ``P``."""
    return minimal_basket(C, P, u, tol, method).c


def basket_by_cost(C: UtilityFunction, P: PriceFunctional, c: float,
                   tol: float = DEFAULT_TOL, method: str = "auto") -> np.ndarray:
    """Minimal basket whose price is ``c``."""
    return basket_record_by_cost(C, P, c, tol, method).q_star


def basket_record_by_cost(C: UtilityFunction, P: PriceFunctional, c: float,
                          tol: float = DEFAULT_TOL, method: str = "auto") -> MinimalBasketRecord:
    """Invert the cost-of-living curve at ``c`` and return the full record."""
    if not (np.isfinite(c) and c > 0):
        raise ValueError(f"cost must be positive, got {c}")
    if C.n != P.n:
        raise BasketError(f"utility has {C.n} goods but prices have {P.n}")
    use_closed = method == "closed" or (method == "auto" and isinstance(C, CobbDouglas))
    if use_closed:
        a = np.asarray(C.exponents)
        q = a / (P.p * a.sum()) * c
        u = C.value(q)
        return MinimalBasketRecord(u, P(q), q, -c / (a.sum() * u))

    def solve(u):
        return minimal_basket(C, P, u, tol, method)

    # any basket costing c reaches at most the utility of the minimal one
    lo = C.value(c / (C.n * P.p))
    lo_rec = solve(lo)
    hi, hi_rec = lo, lo_rec
    while hi_rec.c < c:
        lo, lo_rec = hi, hi_rec
        hi = hi * 2.0
        if not np.isfinite(hi):
            raise ValueError(f"cost {c} is not attainable")
        hi_rec = solve(hi)

    best = lo_rec if abs(lo_rec.c - c) <= abs(hi_rec.c - c) else hi_rec
    for _ in range(100):
        if abs(best.c / c - 1.0) <= 1e-15:
            break
        # Newton on log c against log u; dc/du = -multiplier
        slope = -best.multiplier * best.u / best.c
        u_next = best.u * math.exp(-math.log(best.c / c) / slope) if slope > 0 else math.nan
        if not (lo < u_next < hi):
            u_next = math.sqrt(lo * hi)
        rec = solve(u_next)
        if rec.c < c:
            lo = u_next
        else:
            hi = u_next
        if abs(rec.c - c) >= abs(best.c - c) and hi / lo - 1.0 < 1e-15:
            break
        if abs(rec.c - c) < abs(best.c - c):
            best = rec
    if abs(best.c / c - 1.0) > tol:
        raise NonConvergence(f"could not invert the cost curve at c={c:g}")
    return best


@dataclass(frozen=True, eq=False)
class CostOfLivingCurve:
    """``u -> c(u)`` for fixed utility and prices, with its inverse."""

    utility: UtilityFunction
    prices: PriceFunctional
    tol: float = DEFAULT_TOL

    def cost(self, u: float) -> float:
        return cost_of_living(self.utility, self.prices, u, self.tol)

    def level(self, c: float) -> float:
        return basket_record_by_cost(self.utility, self.prices, c, self.tol).u

    def basket(self, c: float) -> np.ndarray:
        return basket_by_cost(self.utility, self.prices, c, self.tol)

    __call__ = cost


def m_map_eval(C: UtilityFunction, P: PriceFunctional, q, tol: float = DEFAULT_TOL) -> float:
    """Relabel the indifference set through ``q`` by its minimal attainment cost."""
    return cost_of_living(C, P, eval_utility(C, q), tol)


def minimal_section(C: UtilityFunction, P: PriceFunctional, tol: float = DEFAULT_TOL) -> CrossSection:
    """The cross-section of ``C`` through the minimal-price baskets."""
    return CrossSection(C, lambda u: minimal_basket(C, P, u, tol).q_star)
