"""Function-space layer: K constants, modulars, Luxemburg norms, sandwich bounds."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .exponent import ExponentField
from .quadrature import (ModularResult, QuadratureSpec, fractional_modular, integrate_domain,
                         integrate_sphere)

SPHERE_ORDER = {1: 1, 2: 2**16, 3: 128}


# ---------------------------------------------------------------------------
# K_{n,p}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KConstant:
    n: int
    p: float
    value_gamma: float
    value_sphere: float

    @property
    def value(self):
        return self.value_gamma

    @property
    def rel_gap(self):
        return abs(self.value_gamma - self.value_sphere) / self.value_gamma


def k_gamma(n, p):
    """``(1/p) int_{S^{n-1}} |w_n|^p`` in closed form; vectorised in `p`."""
    p = np.asarray(p, float)
    val = 2 * math.pi ** ((n - 1) / 2) * gamma((p + 1) / 2) / gamma((n + p) / 2) / p
    return float(val) if val.ndim == 0 else val


def k_sphere(n, p, order=None):
    """The same constant by quadrature over the unit sphere."""
    order = SPHERE_ORDER[n] if order is None else order
    return integrate_sphere(lambda w: np.abs(w[:, -1]) ** p, n, order) / p


def k_constant(n, p):
    """Both forms of ``K_{n,p}``; raises if they disagree beyond 1e-6."""
    if n not in (1, 2, 3):
        raise ValueError("n must be 1, 2 or 3")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    k = KConstant(n, float(p), k_gamma(n, p), k_sphere(n, p))
    if k.rel_gap > 1e-6:
        raise ArithmeticError(f"K_{n},{p}: gamma {k.value_gamma} vs sphere {k.value_sphere}")
    return k


# ---------------------------------------------------------------------------
# local modulars
# ---------------------------------------------------------------------------


def _exponent_at(qbar, x):
    if isinstance(qbar, ExponentField):
        return np.asarray(qbar.trace(x), float)
    if callable(qbar):
        return np.broadcast_to(np.asarray(qbar(x), float), x.shape[:-1])
    return np.full(x.shape[:-1], float(qbar))


def _exponent_bounds(qbar, dom):
    if isinstance(qbar, ExponentField):
        lo, hi = qbar.p_minus, qbar.p_plus
    elif callable(qbar):
        vals = _exponent_at(qbar, dom.sample(4096, seed=7))
        lo, hi = float(vals.min()), float(vals.max())
    else:
        lo = hi = float(qbar)
    if not (1 < lo <= hi < math.inf):
        raise ValueError(f"exponent must stay in (1, inf); found [{lo}, {hi}]")
    return lo, hi


def _is_constant(qbar):
    if isinstance(qbar, ExponentField):
        return qbar.isotropic or qbar.kind == "constant"
    return not callable(qbar)


def _plan(u, dom, qbar, spec, power_order):
    """Radial reduction and grading for a point singularity of order `power_order`."""
    singular = u.smoothness == "singular-radial"
    radial = u.radial and _is_constant(qbar) and dom.outer == "ball"
    if singular:
        beta = dom.dimension - power_order
        if beta <= 0:
            raise ValueError("integrand is not integrable at the origin")
        spec = spec.replace(grading_exponent=max(spec.grading_exponent, 2.0 / beta))
    return spec, singular, radial


def _powered(base, q):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(base > 0, np.exp(q * np.log(np.where(base > 0, base, 1.0))), 0.0)


def lebesgue_modular(u, dom, qbar, spec=None, profile=False):
    """``int_Omega |u(x)|**qbar(x) dx``.

    `qbar` may be a number, an :class:`ExponentField` (its trace is used) or a
    vectorised callable of ``x``.
    """
    spec = spec or QuadratureSpec()
    u.check_domain(dom)
    lo, hi = _exponent_bounds(qbar, dom)
    if u.is_zero:
        return ModularResult(0.0, 0.0, 0)
    order = (u.singular_order - 1) * hi if u.smoothness == "singular-radial" else 0.0
    spec, singular, radial = _plan(u, dom, qbar, spec, order)

    def f(x):
        q = _exponent_at(qbar, x)
        vals = _powered(np.abs(u(x)), q)
        return (vals, q) if profile else vals

    return integrate_domain(f, dom, spec, singular=singular, radial=radial,
                            profile_range=(lo, hi) if profile else None)


@dataclass
class SobolevModular:
    weighted: ModularResult
    unweighted: ModularResult


def check_gradient_integrability(u, qbar_max, n):
    if u.smoothness == "singular-radial":
        q = u.singular_order
        if not qbar_max < n / q:
            raise ValueError(
                f"|grad u|^p̄ is not integrable: 1 < p̄ < n/q fails (p̄={qbar_max}, n/q={n / q})"
            )


def sobolev_modular(u, dom, qbar, spec=None):
    """``int |grad u|**qbar`` with and without the weight ``K_{n,qbar(x)}``."""
    spec = spec or QuadratureSpec()
    u.check_domain(dom)
    n = dom.dimension
    lo, hi = _exponent_bounds(qbar, dom)
    check_gradient_integrability(u, hi, n)
    if u.is_zero or u.lipschitz == 0:
        zero = ModularResult(0.0, 0.0, 0)
        return SobolevModular(zero, zero)
    order = u.singular_order * hi if u.smoothness == "singular-radial" else 0.0
    spec, singular, radial = _plan(u, dom, qbar, spec, order)

    def grad_power(x):
        return _powered(np.linalg.norm(u.gradient(x), axis=-1), _exponent_at(qbar, x))

    def weighted(x):
        return k_gamma(n, _exponent_at(qbar, x)) * grad_power(x)

    kw = dict(singular=singular, radial=radial)
    return SobolevModular(integrate_domain(weighted, dom, spec, **kw),
                          integrate_domain(grad_power, dom, spec, **kw))


# ---------------------------------------------------------------------------
# Luxemburg norms
# ---------------------------------------------------------------------------


class NotInSpaceError(ArithmeticError):
    """The modular of ``u/lam`` exceeds 1 (or is infinite) for every tested ``lam``."""


@dataclass
class NormResult:
    norm: float
    modular_at_norm: float
    bisection_iters: int
    bracket: tuple = None


LAMBDA_MIN, LAMBDA_MAX = 1e-12, 1e12


def luxemburg(modular_fn, tol=1e-6, max_iter=200, xtol=1e-12):
    """``inf{lam > 0 : modular_fn(lam) <= 1}`` by bisection in ``log lam``.

    `modular_fn(lam)` must be the (nonincreasing) modular of ``u/lam``.  The
    initial bracket ``[1e-6, 1e6]`` grows geometrically up to
    ``[1e-12, 1e12]``.  Bisection stops once the modular is within `tol` of 1
    and the bracket is narrower than `xtol` in ``log lam``.  Returns norm 0
    when the modular is ``<= 1`` down to ``1e-12``; raises
    :class:`NotInSpaceError` when it stays above 1 up to ``1e12``.
    """

    def f(lam):
        v = float(modular_fn(lam))
        if math.isnan(v):
            raise ValueError(f"modular is NaN at lam={lam}")
        return v

    hi = 1e6
    f_hi = f(hi)
    while f_hi > 1:
        if hi >= LAMBDA_MAX:
            raise NotInSpaceError(
                f"not in space: modular(u/lam) = {f_hi} > 1 for every lam up to {LAMBDA_MAX:g}"
            )
        hi = min(hi * 100, LAMBDA_MAX)
        f_hi = f(hi)
    lo = min(1e-6, hi)
    f_lo = f(lo)
    while f_lo <= 1:
        if abs(f_lo - 1) <= tol:
            return NormResult(lo, f_lo, 0, (lo, lo))
        if lo <= LAMBDA_MIN:
            return NormResult(0.0, f_lo, 0, (LAMBDA_MIN, hi))
        hi, f_hi = lo, f_lo
        lo = max(lo / 100, LAMBDA_MIN)
        f_lo = f(lo)
    if abs(f_hi - 1) <= tol:
        return NormResult(hi, f_hi, 0, (lo, hi))
    bracket = (lo, hi)
    a, b = math.log(lo), math.log(hi)
    best, f_best = hi, f_hi
    for it in range(1, max_iter + 1):
        m = 0.5 * (a + b)
        lam = math.exp(m)
        v = f(lam)
        if v > 1:
            a = m
        else:
            b = m
            best, f_best = lam, v
        if abs(f_best - 1) <= tol and b - a <= xtol:
            break
        if b - a < 4 * np.finfo(float).eps * max(1.0, abs(m)):
            break
    return NormResult(best, f_best, it, bracket)


def lebesgue_norm(u, dom, qbar, spec=None, tol=1e-6):
    """Luxemburg norm ``||u||_{qbar(.)}``."""
    res = lebesgue_modular(u, dom, qbar, spec, profile=True)
    if res.profile is None:
        return NormResult(0.0, 0.0, 0)
    return luxemburg(res.profile, tol)


def seminorm(u, dom, s, p, spec=None, tol=1e-6, inner_cutoff=None):
    """Luxemburg seminorm ``[u]_{s,p(.,.)}`` from one profiled modular."""
    res = fractional_modular(u, dom, s, p, spec, inner_cutoff=inner_cutoff, profile=True)
    return luxemburg(res.profile, tol), res


def sobolev_norm(u, dom, s, p, spec=None, tol=1e-6):
    """``||u||_{pbar(.)} + [u]_{s,p(.,.)}`` with the trace of `p` as the
    Lebesgue exponent."""
    lp = lebesgue_norm(u, dom, p, spec, tol)
    semi, _ = seminorm(u, dom, s, p, spec, tol)
    return lp.norm + semi.norm, lp, semi


# ---------------------------------------------------------------------------
# sandwich bounds between modular and seminorm
# ---------------------------------------------------------------------------


@dataclass
class SandwichReport:
    modular: float
    modular_error: float
    seminorm: float
    modular_at_norm: float
    p_minus: float
    p_plus: float
    lower: float
    upper: float
    tolerance: float
    lower_ok: bool
    upper_ok: bool

    @property
    def holds(self):
        return self.lower_ok and self.upper_ok


def sandwich_check(u, dom, s, p, spec=None, tol=1e-6):
    """Check ``min([u]^p+, [u]^p-) <= rho(u) <= max([u]^p+, [u]^p-)``.

    ``rho(u)`` comes from a plain modular evaluation, ``[u]`` from Luxemburg
    bisection over a separately computed profile.
    """
    spec = spec or QuadratureSpec()
    plain = fractional_modular(u, dom, s, p, spec)
    norm, prof = seminorm(u, dom, s, p, spec, tol)
    lam = norm.norm
    a, b = lam ** p.p_plus, lam ** p.p_minus
    lower, upper = min(a, b), max(a, b)
    rel = plain.error_estimate / plain.value if plain.value > 0 else 0.0
    slack = 3 * (plain.error_estimate + prof.error_estimate
                 + (p.p_plus / p.p_minus) * (tol + rel) * upper)
    rho = plain.value
    return SandwichReport(rho, float(plain.error_estimate), lam, norm.modular_at_norm,
                          p.p_minus, p.p_plus, lower, upper, float(slack),
                          bool(rho >= lower - slack), bool(rho <= upper + slack))
