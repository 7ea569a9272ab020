"""Drivers: s -> 1 sweeps, pointwise limits, far-field decay, majorants and the
log-divergence run for the embedding counterexample."""

import math
from dataclasses import dataclass, field

import numpy as np

from .exponent import (check_counterexample_conditions, check_log_holder,
                       counterexample_exponent)
from .fields import Domain, counterexample_field
from .quadrature import QuadratureSpec, fractional_modular, pointwise_fs
from .spaces import (NotInSpaceError, k_gamma, lebesgue_modular, luxemburg,
                     sobolev_modular)

DEFAULT_S_LIST = (0.5, 0.9, 0.99, 0.999)
DEFAULT_LOG_HOLDER_L = 10.0
RATE_NOTE = "no convergence rate is known; extrapolation assumes error linear in (1-s)"


def _relative(values, target):
    if target == 0:
        return [abs(v) for v in values]
    return [abs(v - target) / abs(target) for v in values]


def _strictly_decreasing(seq):
    return all(b < a for a, b in zip(seq, seq[1:]))


def richardson(s_values, values):
    """Extrapolate to ``s = 1`` from the last two points, linear in ``1 - s``."""
    if len(values) < 2:
        return float(values[-1]) if values else math.nan
    h1, h2 = 1 - s_values[-2], 1 - s_values[-1]
    v1, v2 = values[-2], values[-1]
    return float(v2 + (v2 - v1) * h2 / (h1 - h2))


# ---------------------------------------------------------------------------
# BBM sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepReport:
    s_values: list
    modulars: list
    local_limit: object
    rel_errors: list
    converging: bool
    extrapolated_limit: float
    extrapolated_rel_error: float
    log_holder: object = None
    warnings: list = field(default_factory=list)
    note: str = RATE_NOTE


def local_limit(u, dom, p, spec=None):
    """``int K_{n,pbar(x)} |grad u|**pbar(x) dx`` with ``pbar`` the trace of `p`."""
    return sobolev_modular(u, dom, p, spec).weighted


def bbm_sweep(u, dom, p, s_list=DEFAULT_S_LIST, spec=None, log_holder_L=DEFAULT_LOG_HOLDER_L,
              check_exponent=True):
    """Fractional modular at each ``s`` against the local limit.

    A failed log-Hölder audit attaches a warning; the sweep still runs.
    """
    spec = spec or QuadratureSpec()
    if u.smoothness == "singular-radial":
        raise ValueError("bbm_sweep needs a C2c or Lipschitz field")
    s_list = [float(s) for s in s_list]
    if not _strictly_decreasing([1 - s for s in s_list]):
        raise ValueError("s_list must be strictly increasing")
    warnings = []
    audit = None
    if check_exponent:
        audit = check_log_holder(p, dom, log_holder_L)
        if audit.verdict != "bounded-by-L":
            warnings.append(
                f"log-Hölder audit {audit.verdict}: max r^-osc = {audit.max_ratio:.4g} "
                f"(L={log_holder_L}); the limit is not guaranteed"
            )
    if u.smoothness == "lipschitz":
        warnings.append("Lipschitz field: convergence relies on the W^{1,p+} ∩ W^{1,p-} extension")
    mods = [fractional_modular(u, dom, s, p, spec) for s in s_list]
    limit = local_limit(u, dom, p, spec)
    values = [m.value for m in mods]
    rel = _relative(values, limit.value)
    last = rel[-3:]
    converging = len(last) == 3 and _strictly_decreasing(last)
    extra = richardson(s_list, values)
    extra_rel = _relative([extra], limit.value)[0]
    return SweepReport(s_list, mods, limit, rel, converging, extra, extra_rel, audit, warnings)


# ---------------------------------------------------------------------------
# pointwise limits, decay and majorants
# ---------------------------------------------------------------------------


def pointwise_target(u, x, p):
    """``K_{n,pbar(x)} |grad u(x)|**pbar(x)``."""
    x = np.atleast_2d(np.asarray(x, float))
    pb = float(p.trace(x)[0])
    g = float(np.linalg.norm(u.gradient(x)[0]))
    return k_gamma(x.shape[-1], pb) * g**pb


@dataclass
class PointRow:
    x: tuple
    target: float
    values: list
    errors: list
    abs_errors: list
    rel_errors: list
    monotone: bool


@dataclass
class PointwiseStudy:
    s_values: list
    rows: list

    @property
    def flagged(self):
        return [r.x for r in self.rows if not r.monotone]


def pointwise_limit_study(u, points, dom, p, s_list=DEFAULT_S_LIST, spec=None):
    """``F_s(x)`` per point and ``s`` against ``K_{n,pbar(x)}|grad u(x)|**pbar(x)``.

    Rows whose error sequence is not strictly decreasing are flagged.
    """
    spec = spec or QuadratureSpec()
    rows = []
    for x in points:
        x = tuple(float(c) for c in np.atleast_1d(np.asarray(x, float)))
        target = pointwise_target(u, x, p)
        res = [pointwise_fs(u, x, dom, s, p, spec) for s in s_list]
        vals = [r.value for r in res]
        abs_err = [abs(v - target) for v in vals]
        rel = _relative(vals, target)
        rows.append(PointRow(x, target, vals, [r.error_estimate for r in res], abs_err, rel,
                             _strictly_decreasing(abs_err)))
    return PointwiseStudy([float(s) for s in s_list], rows)


@dataclass
class DecayReport:
    radii: list
    values: list
    errors: list
    exponent: float
    reference: float
    ok: bool
    constant: float


def far_field_decay(u, dom, p, s0=0.5, radii=(4.0, 8.0, 16.0), direction=None, spec=None):
    """Fit ``F_s0(r*e) ~ C r**a`` on a log-log scale; pass when
    ``a <= 0.9 * reference`` with ``reference = -(n + s0*p_minus)``."""
    spec = spec or QuadratureSpec()
    n = dom.dimension
    e = np.eye(n)[0] if direction is None else np.asarray(direction, float) / np.linalg.norm(direction)
    res = [pointwise_fs(u, r * e, dom, s0, p, spec) for r in radii]
    vals = np.array([r.value for r in res])
    if np.any(vals <= 0):
        raise ValueError("far-field values must be positive to fit a decay exponent")
    slope, icpt = np.polyfit(np.log(radii), np.log(vals), 1)
    ref = -(n + s0 * p.p_minus)
    return DecayReport(list(map(float, radii)), vals.tolist(), [r.error_estimate for r in res],
                       float(slope), ref, bool(slope <= 0.9 * ref), float(math.exp(icpt)))


@dataclass
class MajorantReport:
    s0: float
    s_values: list
    points: list
    constant: float
    exponent: float
    radius: float
    bound: list
    values: dict
    errors: dict
    violations: list

    @property
    def ok(self):
        return not self.violations


def _as_point(x, n):
    """A scalar means a distance along the first axis."""
    x = np.atleast_1d(np.asarray(x, float))
    return x[0] * np.eye(n)[0] if x.size == 1 else x


def majorant_shape(x, radius, a):
    r = float(np.linalg.norm(np.atleast_1d(x)))
    return min(radius**-a, r**-a) if r > 0 else radius**-a


def majorant_check(u, dom, p, s0=0.5, s_list=(0.9, 0.99), sample_points=(4.0, 8.0, 16.0),
                   spec=None, radius=None):
    """Fit ``C`` so that ``F_s0 <= C*min(R**-a, |x|**-a)`` at the sample points,
    ``a = n + s0*p_minus``, then check the bound at every ``s`` in `s_list`
    within three error estimates.  `radius` defaults to the support radius."""
    spec = spec or QuadratureSpec()
    if u.is_zero:
        return MajorantReport(s0, list(s_list), list(sample_points), 0.0, 0.0, 0.0, [], {}, {}, [])
    if any(s < s0 or s > spec.s_cap for s in s_list):
        raise ValueError("s_list must lie in [s0, s_cap]")
    n = dom.dimension
    a = n + s0 * p.p_minus
    R = u.support_radius if radius is None else radius
    if not math.isfinite(R):
        raise ValueError("majorant needs a finite radius")
    pts = [_as_point(x, n) for x in sample_points]
    shape = [majorant_shape(x, R, a) for x in pts]
    values, errors = {}, {}
    for s in [s0, *s_list]:
        res = [pointwise_fs(u, x, dom, s, p, spec) for x in pts]
        values[s] = [r.value for r in res]
        errors[s] = [r.error_estimate for r in res]
    C = max(v / m for v, m in zip(values[s0], shape))
    bound = [C * m for m in shape]
    violations = []
    for s in s_list:
        for x, v, err, b in zip(pts, values[s], errors[s], bound):
            if v > b + 3 * err:
                violations.append((float(s), tuple(x.tolist()), v, b))
    return MajorantReport(s0, list(s_list), [tuple(x.tolist()) for x in pts], C, a, R, bound,
                          values, errors, violations)


# ---------------------------------------------------------------------------
# counterexample
# ---------------------------------------------------------------------------


@dataclass
class DivergenceReport:
    cutoffs: list
    modulars: list
    errors: list
    slope_vs_log: float
    decade_slopes: list
    sobolev_modular: float
    sobolev_error: float
    sobolev_by_eps: list
    sobolev_cut: list
    sobolev_change: float
    lebesgue_modular: float
    divergent_exponents: list
    not_in_space: bool
    not_in_space_message: str
    verdict: str


def _slopes(xs, ys):
    return [(y1 - y0) / (x1 - x0) for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:])]


def _stable(slopes, rel=0.2):
    if len(slopes) < 2:
        return False
    a, b = slopes[-2], slopes[-1]
    return a > 0 and b > 0 and abs(b - a) <= rel * max(a, b)


def divergent_components(profiles, cutoffs, rel=0.2, significance=0.01):
    """Exponent bins whose coefficient grows like ``log(1/eps)``.

    The modular of ``u/lam`` is ``sum_b lam**(-c_b) A_b(eps)``; a bin whose
    ``A_b`` has positive, decade-stable slopes diverges for every ``lam``.
    Bins contributing less than `significance` of the total last-decade
    growth are ignored.
    """
    logs = [math.log(1 / e) for e in cutoffs]
    A = np.stack([pr.moments[:, 0] for pr in profiles])
    total = _slopes(logs, A.sum(axis=1).tolist())[-1]
    out = []
    for b in np.nonzero(np.any(A != 0, axis=0))[0]:
        sl = _slopes(logs, A[:, b].tolist())
        if _stable(sl, rel) and sl[-1] > significance * abs(total):
            out.append((round(float((b + profiles[0].offset) * profiles[0].WIDTH), 6), float(sl[-1])))
    return out


def uncut_modular_fn(profiles, cutoffs, rel=0.2):
    """``lam -> modular(u/lam)`` without a cutoff: infinite when some exponent
    component diverges logarithmically, else the smallest-cutoff value."""
    divergent = divergent_components(profiles, cutoffs, rel)
    last = profiles[-1]

    def fn(lam):
        return math.inf if divergent else last(lam)

    fn.divergent = divergent
    return fn


def counterexample_run(n=2, q=1.5, pbar=7 / 6, pinf=4.0, eps_list=(1e-2, 1e-3, 1e-4), s=0.5,
                       spec=None, r_out=8.0, transition=(0.25, 0.75)):
    """Fractional modular of the radial counterexample with shrinking cutoffs.

    Returns slopes against ``log(1/eps)``, the finite Sobolev modular of the
    same field and the Luxemburg verdict for the uncut modular.
    """
    check_counterexample_conditions(n, q, pbar, pinf)
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2 or not _strictly_decreasing(eps_list) or eps_list[-1] <= 0:
        raise ValueError("cutoffs must be positive and strictly decreasing")
    spec = spec or QuadratureSpec()
    u = counterexample_field(q, n)
    p = counterexample_exponent(n, q, pbar, pinf, *transition)
    dom = Domain.ball(n, r_out)
    runs = [fractional_modular(u, dom, s, p, spec, inner_cutoff=e, profile=True) for e in eps_list]
    vals = [r.value for r in runs]
    logs = [math.log(1 / e) for e in eps_list]
    slope = float(np.polyfit(logs, vals, 1)[0])
    dslopes = _slopes(logs, vals)
    verdict = "diverges-log" if _stable(dslopes) else "inconclusive"

    sob = sobolev_modular(u, dom, pbar, spec).unweighted
    cut, split = [], []
    for e in eps_list:
        outer = sobolev_modular(u, dom.excise(e), pbar, spec).unweighted.value
        inner = sobolev_modular(u, Domain.ball(n, e), pbar, spec).unweighted.value
        cut.append(outer)
        split.append(outer + inner)
    change = abs(split[-1] - split[-2]) / abs(split[-2])
    leb = lebesgue_modular(u, dom, pbar, spec).value

    fn = uncut_modular_fn([r.profile for r in runs], eps_list)
    try:
        luxemburg(fn)
        nis, msg = False, "finite Luxemburg norm"
    except NotInSpaceError as exc:
        nis, msg = True, str(exc)
    return DivergenceReport(eps_list, vals, [r.error_estimate for r in runs], slope, dslopes,
                            sob.value, sob.error_estimate, split, cut, change, leb,
                            fn.divergent, nis, msg, verdict)
