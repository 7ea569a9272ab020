"""Deterministic quadrature for domain integrals, sphere integrals and the
singular double integral of the fractional modular.

Outer integrals use adaptive tensor Gauss-Kronrod (7/15) cells from
:func:`varexp.fields.cell_decomposition`; the cell error is the difference of
the embedded rules.  Refinement order, reduction order and chunking are fixed,
so results are bit-identical for any worker count.

The inner integral at an outer node ``x`` runs in polar coordinates around
``x``.  Along a ray ``y = x + rho*omega`` the integrand of the modular is
``G(rho) * rho**(alpha - 1)`` with ``alpha = (1 - s)*p0`` and ``G`` bounded,
where ``p0`` is the exponent's limit at ``x`` along the ray.  Writing
``G = G0 + (G - G0)`` with ``G0 = |grad u(x).omega|**p0`` splits it into an
exact power integral plus a remainder that vanishes at ``rho = 0``; the
remainder is integrated in ``t = log(b/rho)`` on geometrically growing panels.
The cost is flat in ``s`` and the ``1/(1 - s)`` growth is carried exactly.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._util import ordered_map, pairwise_sum
from .fields import cell_decomposition

# QUADPACK G7-K15 abscissae and weights on [-1, 1] (non-negative half)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])


def gauss_kronrod_15():
    """Nodes and weights on [-1, 1]: ``(x, w_kronrod, w_gauss)``, ascending.

    The Gauss weights are zero at the eight Kronrod-only nodes.
    """
    x = np.concatenate([-_XGK[:-1], _XGK[::-1]])
    wk = np.concatenate([_WGK[:-1], _WGK[::-1]])
    wg_half = np.zeros(8)
    wg_half[1::2] = _WG
    wg = np.concatenate([wg_half[:-1], wg_half[::-1]])
    return x, wk, wg


def _unit_rule():
    x, wk, wg = gauss_kronrod_15()
    return 0.5 * (x + 1.0), 0.5 * wk, 0.5 * wg


_UNIT = _unit_rule()


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and resolution for every integral in the package.

    ``rel_tol``/``abs_tol`` bound the outer adaptive error.  ``base_level``
    pre-splits the domain before adapting.  ``grading_exponent`` grades outer
    cells touching a field singularity.  ``s_cap`` is the largest admissible
    ``s``.  The ``angular_*``, ``radial_*`` and ``tail_length`` fields set the
    fixed inner rule; ``chunk`` is the number of outer nodes per task.
    """

    rel_tol: float = 1e-7
    abs_tol: float = 1e-13
    max_evals: int = 4_000_000_000
    base_level: int = 1
    grading_exponent: float = 2.0
    s_cap: float = 0.999
    angular_panels: int = 8
    azimuth_nodes: int = 16
    radial_panels: int = 16
    radial_ratio: float = 1.25
    tail_length: float = 18.0
    max_level: int = 48
    chunk: int = 16
    workers: int = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if not 0 < self.s_cap < 1:
            raise ValueError("s_cap must lie in (0, 1)")
        if not self.grading_exponent >= 1:
            raise ValueError("grading_exponent must be >= 1")
        if self.base_level < 0 or self.max_evals <= 0:
            raise ValueError("base_level must be >= 0 and max_evals positive")
        if self.angular_panels < 2 or self.angular_panels % 2:
            raise ValueError("angular_panels must be even and >= 2")
        if self.azimuth_nodes < 4 or self.azimuth_nodes % 2:
            raise ValueError("azimuth_nodes must be even and >= 4")
        if self.radial_panels < 1 or self.radial_ratio < 1 or self.chunk < 1:
            raise ValueError("radial_panels, radial_ratio and chunk must be positive")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class ModularResult:
    value: float
    error_estimate: float
    evals: int
    truncation_note: str = None
    inconclusive: bool = False
    cells: int = 0
    profile: "ModularProfile" = field(default=None, repr=False)

    def __post_init__(self):
        self.value = float(self.value)
        self.error_estimate = float(self.error_estimate)
        if self.value < 0 or not self.error_estimate >= 0:
            raise ValueError("modular value and error estimate must be non-negative")


class ModularProfile:
    """A computed modular as a function of the scaling ``lam``.

    The discrete modular is a sum ``sum_j w_j * lam**(-e_j)``.  Atoms are
    binned by exponent (bin width ``WIDTH``) and each bin keeps the moments
    ``sum w*d**k`` of the offsets ``d`` from the bin centre, so that

        ``profile(lam) = sum_b lam**(-c_b) * sum_k m_bk * (-log lam)**k / k!``

    reproduces the atom sum to about 5e-12 relative for ``|log lam| <= 28``.
    """

    WIDTH = 1e-3
    ORDER = 4

    def __init__(self, offset, moments):
        self.offset = int(offset)
        self.moments = np.asarray(moments, float)

    @classmethod
    def for_range(cls, e_min, e_max):
        offset = int(math.floor(e_min / cls.WIDTH)) - 1
        size = int(math.ceil(e_max / cls.WIDTH)) - offset + 2
        return cls(offset, np.zeros((size, cls.ORDER + 1)))

    def empty_like(self):
        return ModularProfile(self.offset, np.zeros_like(self.moments))

    def atom_moments(self, weights, exponents):
        """Dense moment array for a batch of atoms (not added in place)."""
        w = np.ravel(weights)
        e = np.ravel(exponents)
        keep = w != 0
        w, e = w[keep], e[keep]
        idx = np.rint(e / self.WIDTH).astype(np.int64) - self.offset
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.moments)):
            raise ValueError("exponent outside the declared bounds of the profile")
        d = e - (idx + self.offset) * self.WIDTH
        out = np.empty_like(self.moments)
        dk = np.ones_like(d)
        for k in range(self.ORDER + 1):
            out[:, k] = np.bincount(idx, weights=w * dk, minlength=len(self.moments))
            dk = dk * d
        return out

    def scaled(self, factor):
        return ModularProfile(self.offset, self.moments * factor)

    def __add__(self, other):
        if other.offset != self.offset or other.moments.shape != self.moments.shape:
            raise ValueError("profiles have different exponent ranges")
        return ModularProfile(self.offset, self.moments + other.moments)

    def __call__(self, lam):
        lam = float(lam)
        if not lam > 0:
            raise ValueError("lam must be positive")
        L = math.log(lam)
        used = np.any(self.moments != 0, axis=1)
        if not used.any():
            return 0.0
        centres = (np.nonzero(used)[0] + self.offset) * self.WIDTH
        m = self.moments[used]
        poly = m[:, self.ORDER].copy()
        for k in range(self.ORDER - 1, -1, -1):
            poly = m[:, k] + poly * (-L) / (k + 1)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.exp(-centres * L) * poly
        return float(pairwise_sum(vals))

    @property
    def exponent_range(self):
        used = np.nonzero(np.any(self.moments != 0, axis=1))[0]
        if used.size == 0:
            return None
        return ((used[0] + self.offset) * self.WIDTH, (used[-1] + self.offset) * self.WIDTH)




# ---------------------------------------------------------------------------
# adaptive outer engine
# ---------------------------------------------------------------------------


@dataclass
class _Leaf:
    cell: object
    fine: float
    coarse: float
    inner: float
    absval: float
    moments: np.ndarray
    evals: int

    @property
    def error(self):
        return abs(self.fine - self.coarse)


def _evaluate_cells(cells, evaluate, spec):
    tasks = []
    for ci, cell in enumerate(cells):
        pts, wf, wc = cell.nodes(_UNIT)
        for st in range(0, len(pts), spec.chunk):
            sl = slice(st, st + spec.chunk)
            tasks.append((ci, pts[sl], wf[sl], wc[sl]))

    def run(task):
        _, pts, wf, wc = task
        vals, ierr, mom, ev = evaluate(pts, wf)
        return (float(np.sum(wf * vals)), float(np.sum(wc * vals)),
                float(np.sum(np.abs(wf) * ierr)), float(np.sum(np.abs(wf * vals))), mom, ev)

    results = ordered_map(run, tasks, spec.workers)
    grouped = [[] for _ in cells]
    for (ci, *_), res in zip(tasks, results):
        grouped[ci].append(res)
    leaves = []
    for cell, group in zip(cells, grouped):
        cols = list(zip(*group))
        moments = None
        if cols[4][0] is not None:
            moments = pairwise_sum(np.stack(cols[4]))
        leaves.append(_Leaf(cell, float(pairwise_sum(cols[0])), float(pairwise_sum(cols[1])),
                            float(pairwise_sum(cols[2])), float(pairwise_sum(cols[3])),
                            moments, int(sum(cols[5]))))
    return leaves


@dataclass
class _Outcome:
    value: float
    outer_error: float
    inner_error: float
    rounding: float
    evals: int
    cells: int
    inconclusive: bool
    moments: np.ndarray
    note: str = None

    @property
    def error(self):
        return self.outer_error + self.inner_error + self.rounding


def _adaptive(cells, evaluate, spec):
    """Refine the cells with the largest embedded-rule error until the summed
    outer error meets the tolerance.  Leaves stay in tree order."""
    leaves = _evaluate_cells(cells, evaluate, spec)
    evals = sum(lf.evals for lf in leaves)
    inconclusive, note = False, None
    while True:
        total = float(pairwise_sum([lf.fine for lf in leaves]))
        if not math.isfinite(total):
            if np.isnan(total):
                raise FloatingPointError("integrand produced NaN")
            note = "integrand overflow"
            break
        outer = float(sum(lf.error for lf in leaves))
        tol = max(spec.abs_tol, spec.rel_tol * abs(total))
        if outer <= tol:
            break
        if evals >= spec.max_evals:
            inconclusive, note = True, f"max_evals={spec.max_evals} exhausted"
            break
        order = sorted(range(len(leaves)),
                       key=lambda i: (-leaves[i].error, leaves[i].cell.path))
        chosen, remaining = [], outer
        for i in order:
            if remaining <= tol / 2 and chosen:
                break
            if leaves[i].cell.level >= spec.max_level:
                continue
            chosen.append(i)
            remaining -= leaves[i].error
        if not chosen:
            inconclusive, note = True, f"max_level={spec.max_level} reached"
            break
        chosen_set = set(chosen)
        children = [ch for i in chosen for ch in leaves[i].cell.split()]
        fresh = iter(_evaluate_cells(children, evaluate, spec))
        new_leaves = []
        for i, lf in enumerate(leaves):
            if i in chosen_set:
                kids = [next(fresh) for _ in range(2 ** len(lf.cell.lo))]
                evals += sum(k.evals for k in kids)
                new_leaves.extend(kids)
            else:
                new_leaves.append(lf)
        leaves = new_leaves
    total = float(pairwise_sum([lf.fine for lf in leaves]))
    outer = float(sum(lf.error for lf in leaves))
    inner = float(sum(lf.inner for lf in leaves))
    rounding = 64 * np.finfo(float).eps * float(sum(lf.absval for lf in leaves))
    moments = None
    if leaves and leaves[0].moments is not None:
        moments = pairwise_sum(np.stack([lf.moments for lf in leaves]))
    return _Outcome(total, outer, inner, rounding, evals, len(leaves), inconclusive, moments, note)


def integrate_domain(f, dom, spec=None, singular=False, radial=False, profile_range=None):
    """Adaptive integral of ``f`` over `dom`.

    Parameters
    ----------
    f : callable
        Vectorised ``f(points) -> values`` for points of shape ``(N, n)``.
        With `profile_range` it must return ``(values, weights_unused, exponents)``
        -- see :func:`varexp.spaces.lebesgue_modular`.
    singular : bool
        Grade cells touching the origin (integrable point singularity there).
    radial : bool
        ``f`` is rotation invariant; integrate along the radius only.
    """
    spec = spec or QuadratureSpec()
    cells = cell_decomposition(dom, spec.base_level, singular=singular, radial=radial,
                               grading_exponent=spec.grading_exponent)
    base = ModularProfile.for_range(*profile_range) if profile_range else None

    def evaluate(pts, w):
        if base is None:
            vals = np.asarray(f(pts), float)
            if np.any(np.isnan(vals)):
                bad = pts[np.isnan(vals)][0]
                raise ValueError(f"integrand is NaN at x={bad}")
            return vals, np.zeros(len(pts)), None, len(pts)
        vals, exps = f(pts)
        return vals, np.zeros(len(pts)), base.atom_moments(w * vals, exps), len(pts)

    out = _adaptive(cells, evaluate, spec)
    prof = None if base is None else ModularProfile(base.offset, out.moments)
    return ModularResult(out.value, out.error, out.evals, out.note, out.inconclusive,
                         out.cells, prof)


# ---------------------------------------------------------------------------
# sphere integrals
# ---------------------------------------------------------------------------


def sphere_rule(n, order):
    """Points and weights on the unit sphere ``S^{n-1}``.

    n=1: the two points -1, 1.  n=2: trapezoid with `order` nodes.  n=3:
    Gauss-Legendre with `order` nodes in the polar angle on each hemisphere
    times a ``2*order``-node trapezoid in the azimuth.
    """
    if n == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if order < 1:
        raise ValueError("order must be positive")
    if n == 2:
        th = 2 * math.pi * np.arange(order) / order
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(order, 2 * math.pi / order)
    if n == 3:
        x, w = np.polynomial.legendre.leggauss(order)
        th = np.concatenate([math.pi / 4 * (x + 1), math.pi / 4 * (x + 3)])
        wth = np.concatenate([w, w]) * math.pi / 4 * np.sin(th)
        m = 2 * order
        ph = 2 * math.pi * np.arange(m) / m
        T, P = np.meshgrid(th, ph, indexing="ij")
        W = np.outer(wth, np.full(m, 2 * math.pi / m))
        pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
        return pts.reshape(-1, 3), W.ravel()
    raise ValueError(f"unsupported dimension n={n}; use 1, 2 or 3")


def integrate_sphere(g, n, order=64):
    """``int_{S^{n-1}} g dH^{n-1}`` for vectorised ``g(points)``."""
    pts, w = sphere_rule(n, order)
    vals = np.asarray(g(pts), float)
    return float(pairwise_sum(w * vals))


# ---------------------------------------------------------------------------
# fractional modular
# ---------------------------------------------------------------------------


def _direction_rule(n, spec):
    """Reference angular rule: (params, w_fine, w_coarse)."""
    t, wk, wg = _UNIT
    if n == 1:
        return None, np.ones(2), np.ones(2)
    A = spec.angular_panels
    if n == 2:
        k = np.repeat(np.arange(A), len(t))
        ang = 2 * math.pi * (k + np.tile(t, A)) / A
        return ang, np.tile(wk, A) * 2 * math.pi / A, np.tile(wg, A) * 2 * math.pi / A
    k = np.repeat(np.arange(A), len(t))
    th = math.pi * (k + np.tile(t, A)) / A
    wth_f = np.tile(wk, A) * math.pi / A * np.sin(th)
    wth_c = np.tile(wg, A) * math.pi / A * np.sin(th)
    m = spec.azimuth_nodes
    ph = 2 * math.pi * np.arange(m) / m
    wph_f = np.full(m, 2 * math.pi / m)
    wph_c = np.where(np.arange(m) % 2 == 0, 4 * math.pi / m, 0.0)
    T, P = np.meshgrid(th, ph, indexing="ij")
    return ((T.ravel(), P.ravel()), np.outer(wth_f, wph_f).ravel(),
            np.outer(wth_c, wph_c).ravel())


def _frames(X, g, prefer_radial):
    """Unit axis per node: the gradient direction, else x/|x|, else e_1."""
    n = X.shape[-1]
    gn = np.linalg.norm(g, axis=-1)
    xn = np.linalg.norm(X, axis=-1)
    e1 = np.zeros_like(X)
    e1[:, 0] = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        gu = g / gn[:, None]
        xu = X / xn[:, None]
    use_g = (gn > 0) & np.all(np.isfinite(gu), axis=-1)
    use_x = xn > 0
    if prefer_radial:
        axis = np.where(use_x[:, None], xu, np.where(use_g[:, None], gu, e1))
    else:
        axis = np.where(use_g[:, None], gu, np.where(use_x[:, None], xu, e1))
    return axis


def _support_cone(X, R):
    """Half-angle of the cone from ``x`` onto ``B_R`` (0 where ``|x| <= R``)."""
    xn = np.linalg.norm(X, axis=-1)
    if not math.isfinite(R):
        return np.zeros(len(X))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(xn > R, np.arcsin(np.clip(R / xn, 0.0, 1.0)), 0.0)


def _directions(X, axis, rule, cone=None):
    """Directions ``(N, M, n)`` and per-node fine/coarse weights ``(N, M)``.

    Nodes with ``cone > 0`` lie outside the support ball: the rule is mapped
    onto the cone of that half-angle around ``-x/|x|``, which carries every
    nonzero part of the integrand.
    """
    n = X.shape[-1]
    params, wf, wc = rule
    N = len(X)
    if n == 1:
        om = np.array([[1.0], [-1.0]])
        return np.broadcast_to(om, (N, 2, 1)), wf, wc
    if cone is None:
        cone = np.zeros(N)
    out = cone > 0
    if out.any():
        xu = -X / np.linalg.norm(X, axis=-1, keepdims=True)
        axis = np.where(out[:, None], xu, axis)
    if n == 2:
        base = np.arctan2(axis[:, 1], axis[:, 0])
        full = base[:, None] + math.pi / 2 + params[None, :]
        narrow = base[:, None] + cone[:, None] * (params[None, :] / math.pi - 1.0)
        ang = np.where(out[:, None], narrow, full)
        scale = np.where(out, cone / math.pi, 1.0)[:, None]
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1), wf * scale, wc * scale
    th, ph = params
    th = np.where(out[:, None], th[None, :] * cone[:, None] / math.pi, th[None, :])
    jac = np.where(out[:, None], np.sin(th) / np.sin(params[0])[None, :] * cone[:, None] / math.pi, 1.0)
    e3 = axis
    helper = np.zeros_like(e3)
    idx = np.argmin(np.abs(e3), axis=-1)
    helper[np.arange(N), idx] = 1.0
    e1 = np.cross(e3, helper)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(e3, e1)
    st, ct = np.sin(th), np.cos(th)
    om = (st * np.cos(ph))[..., None] * e1[:, None, :] \
        + (st * np.sin(ph))[..., None] * e2[:, None, :] \
        + ct[..., None] * e3[:, None, :]
    return om, wf * jac, wc * jac


def _clip_to_support(X, om, lo, hi, R):
    """For ``|x| > R`` the integrand vanishes off the chord of ``B_R``; cut each
    ray segment to that chord so its ends become panel breakpoints."""
    if not math.isfinite(R):
        return lo, hi
    outside = np.linalg.norm(X, axis=-1) > R
    if not outside.any():
        return lo, hi
    xo = np.einsum("nmk,nk->nm", om, X)
    disc = xo**2 - (np.sum(X * X, axis=-1) - R * R)[:, None]
    root = np.sqrt(np.maximum(disc, 0.0))
    r1, r2 = -xo - root, -xo + root
    hit = (disc > 0) & (r2 > 0)
    keep = ~outside[:, None] | hit
    lo = np.where(outside[:, None, None], np.maximum(lo, r1[..., None]), lo)
    hi = np.where(outside[:, None, None], np.minimum(hi, r2[..., None]), hi)
    hi = np.where(keep[..., None], hi, lo)
    return lo, hi


class _InnerIntegral:
    """Inner integral ``int_Omega k(x, y) dy`` at a batch of outer nodes."""

    def __init__(self, u, dom, s, p, spec, ordered=False, profile=None):
        self.u, self.dom, self.s, self.p, self.spec = u, dom, s, p, spec
        self.ordered = ordered
        self.profile = profile
        self.rule = _direction_rule(dom.dimension, spec)
        K, r = spec.radial_panels, spec.radial_ratio
        if r == 1:
            starts = np.arange(K) / K
            widths = np.full(K, 1.0 / K)
        else:
            starts = (r ** np.arange(K) - 1) / (r**K - 1)
            widths = r ** np.arange(K) * (r - 1) / (r**K - 1)
        t, wk, wg = _UNIT
        self.t_ref = (starts[:, None] + widths[:, None] * t[None, :]).ravel()
        self.wk_ref = (widths[:, None] * wk[None, :]).ravel()
        self.wg_ref = (widths[:, None] * wg[None, :]).ravel()

    def local_scale(self, X):
        d = np.abs(self.dom.dist_to_boundary(X))
        delta = 0.5 * d
        if self.ordered or self.u.smoothness == "singular-radial":
            delta = np.minimum(delta, 0.5 * np.linalg.norm(X, axis=-1))
        return np.clip(delta, 1e-12, 1.0)

    def __call__(self, X, Wx=None):
        u, p, s = self.u, self.p, self.s
        N, n = X.shape
        ux = u(X)
        g = u.gradient(X)
        g = np.where(np.isfinite(g), g, 0.0)
        axis = _frames(X, g, self.ordered or u.radial)
        om, wdir, wdir_c = _directions(X, axis, self.rule, _support_cone(X, u.support_radius))
        M = om.shape[1]
        scale = np.maximum(1.0, np.linalg.norm(X, axis=-1))
        p0 = p(X[:, None, :], X[:, None, :] + (1e-9 * scale)[:, None, None] * om)
        self._check_nan(p0, X[:, None, :], X[:, None, :] + 1e-9 * om)
        alpha = (1.0 - s) * p0
        slope = np.abs(np.einsum("nmk,nk->nm", om, g))
        with np.errstate(divide="ignore"):
            G0 = np.where(slope > 0, np.exp(p0 * np.log(slope)), 0.0)
        extra = None
        if self.ordered:
            extra = np.broadcast_to(np.linalg.norm(X, axis=-1)[:, None], (N, M))
        lo, hi = self.dom.ray_segments(X[:, None, :], om, extra)
        lo, hi = _clip_to_support(X, om, lo, hi, u.support_radius)
        delta = self.local_scale(X)

        V = np.zeros((N, M))
        Verr = np.zeros((N, M))
        evals = 0
        mom = None
        if self.profile is not None:
            mom = np.zeros_like(self.profile.moments)
        for k in range(2):
            a, b = lo[..., k], hi[..., k]
            valid = b > a
            if not valid.any():
                continue
            bs = np.where(valid, b, 1.0)
            as_ = np.where(valid, a, 0.0)
            with np.errstate(divide="ignore"):
                t_end = np.where(as_ > 0, np.log(bs / np.where(as_ > 0, as_, 1.0)), np.inf)
            T = np.minimum(t_end, np.maximum(np.log(bs / delta[:, None]), 0.0) + self.spec.tail_length)
            t = T[..., None] * self.t_ref
            wt = T[..., None] * self.wk_ref
            wtc = T[..., None] * self.wg_ref
            rho = bs[..., None] * np.exp(-t)
            y = X[:, None, None, :] + rho[..., None] * om[:, :, None, :]
            uy = u(y)
            pv = p(X[:, None, None, :], y)
            self._check_nan(pv, X[:, None, None, :], y)
            diff = np.abs(uy - ux[:, None, None])
            logr = np.log(rho)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                logG = pv * (np.log(diff) - logr) + (1.0 - s) * (pv - p0[..., None]) * logr
                G = np.where(diff > 0, np.exp(logG), 0.0)
            decay = np.exp(-alpha[..., None] * t)
            h = (G - G0[..., None]) * decay
            rem = np.sum(wt * h, axis=-1)
            remc = np.sum(wtc * h, axis=-1)
            b_alpha = np.exp(alpha * np.log(bs))
            lead = b_alpha * (-np.expm1(-alpha * t_end)) / alpha
            V += np.where(valid, G0 * lead + b_alpha * rem, 0.0)
            Verr += np.where(valid, b_alpha * np.abs(rem - remc), 0.0)
            evals += int(valid.sum()) * t.shape[-1]
            if mom is not None:
                wn = Wx[:, None] * wdir
                w_atoms = np.where(valid[..., None], (wn * b_alpha)[..., None] * wt * decay * G, 0.0)
                c0 = wn * G0 * (lead - b_alpha * np.sum(wt * decay, axis=-1))
                c0 = np.where(valid, c0, 0.0)
                mom += self.profile.atom_moments(w_atoms, pv)
                mom += self.profile.atom_moments(c0, p0)
        F = np.sum(V * wdir, axis=-1)
        Fc = np.sum(V * wdir_c, axis=-1)
        Ferr = np.sum(Verr * wdir, axis=-1) + np.abs(F - Fc)
        return F, Ferr, mom, evals

    @staticmethod
    def _check_nan(vals, x, y):
        bad = np.isnan(vals)
        if bad.any():
            xb, yb = np.broadcast_arrays(x, y)
            idx = np.argwhere(bad)[0]
            raise ValueError(
                f"exponent returned NaN at x={xb[tuple(idx)]}, y={yb[tuple(idx)]}"
            )


def _check_s(s, spec):
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if s > spec.s_cap:
        raise ValueError(f"s={s} exceeds s_cap={spec.s_cap}; extrapolate instead")


def _radial_reduction_ok(u, p, dom):
    return u.radial and getattr(p, "isotropic", False) and dom.outer == "ball"


def fractional_modular(u, dom, s, p, spec=None, inner_cutoff=None, profile=False,
                       radial_reduction=None, ordered=None):
    """``s(1-s) int int |u(x)-u(y)|**p(x,y) / |x-y|**(n + s*p(x,y)) dx dy``.

    Parameters
    ----------
    inner_cutoff : float, optional
        Radius ``eps`` of a ball around the origin removed from the domain
        (for both variables).  Required for singular-radial fields.
    profile : bool
        Also return a :class:`ModularProfile` so that ``u/lam`` can be
        evaluated for any ``lam`` without new quadrature.
    radial_reduction : bool, optional
        Integrate the outer variable along a radius only.  Default: when the
        field is radial, the exponent depends on ``|x - y|`` only and the
        domain is a centred ball or annulus.
    ordered : bool, optional
        Integrate over ``|y| > |x|`` and double.  Needs a symmetric exponent;
        default on for singular-radial fields.
    """
    spec = spec or QuadratureSpec()
    _check_s(s, spec)
    if u.dimension != dom.dimension or p.dimension != dom.dimension:
        raise ValueError("field, exponent and domain dimensions differ")
    u.check_domain(dom)
    singular = u.smoothness == "singular-radial"
    note = None
    if singular:
        if inner_cutoff is None:
            raise ValueError(
                f"field {u.name!r} is singular at the origin; supply inner_cutoff"
            )
    if inner_cutoff is not None:
        if not inner_cutoff > 0:
            raise ValueError("inner_cutoff must be positive")
        dom = dom.excise(inner_cutoff)
        note = f"inner cutoff eps={inner_cutoff!r}: B_eps(0) removed for x and y"
    if ordered is None:
        ordered = singular
    if ordered and not p.symmetric:
        raise ValueError("ordered integration needs a symmetric exponent")
    if radial_reduction is None:
        radial_reduction = _radial_reduction_ok(u, p, dom)
    elif radial_reduction and not _radial_reduction_ok(u, p, dom):
        raise ValueError("radial reduction needs a radial field, isotropic exponent and centred ball")
    if u.is_zero:
        return ModularResult(0.0, 0.0, 0, note, False, 0,
                             ModularProfile.for_range(p.p_minus, p.p_plus) if profile else None)
    prof = ModularProfile.for_range(p.p_minus, p.p_plus) if profile else None
    inner = _InnerIntegral(u, dom, s, p, spec, ordered=ordered, profile=prof)
    cells = cell_decomposition(dom, spec.base_level, singular=singular, radial=radial_reduction,
                               grading_exponent=spec.grading_exponent)
    out = _adaptive(cells, inner, spec)
    factor = s * (1.0 - s) * (2.0 if ordered else 1.0)
    result_profile = None
    if prof is not None:
        result_profile = ModularProfile(prof.offset, out.moments * factor)
    value = factor * out.value
    return ModularResult(max(value, 0.0), factor * out.error, out.evals,
                         note if out.note is None else f"{note}; {out.note}" if note else out.note,
                         out.inconclusive, out.cells, result_profile)


def pointwise_fs(u, x, dom, s, p, spec=None):
    """``F_s(x) = s(1-s) int_Omega |u(x)-u(y)|**p / |x-y|**(n+s*p) dy``."""
    spec = spec or QuadratureSpec()
    _check_s(s, spec)
    x = np.atleast_2d(np.asarray(x, float))
    if x.shape != (1, dom.dimension):
        raise ValueError("x must be a single point of the domain dimension")
    if u.smoothness == "singular-radial" and np.linalg.norm(x) == 0:
        raise ValueError("x is the singular point of the field")
    if u.is_zero:
        return ModularResult(0.0, 0.0, 0)
    inner = _InnerIntegral(u, dom, s, p, spec)
    F, Ferr, _, evals = inner(x)
    factor = s * (1.0 - s)
    val = factor * float(F[0])
    err = factor * float(Ferr[0]) + 64 * np.finfo(float).eps * abs(val)
    return ModularResult(max(val, 0.0), err, evals)
