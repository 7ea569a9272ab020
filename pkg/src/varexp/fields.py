"""Domains, scalar test functions and their cell decompositions.

Domains are bounded regions in dimension ``n <= 3``: an axis-aligned box
(an interval when ``n == 1``) or a ball centred at the origin, optionally with
a closed ball ``B_h(0)`` removed.  A ball with a hole is an annulus.

Scalar fields are vectorised callables ``u(x)`` on arrays of shape ``(..., n)``
together with a gradient, a support radius and a smoothness tag.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

SMOOTHNESS = ("C2c", "lipschitz", "singular-radial")
MAX_DIMENSION = 3


def sphere_area(n):
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n, r=1.0):
    return sphere_area(n) / n * r**n


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """Bounded region: convex outer shape minus an optional ball at the origin.

    Use the constructors :meth:`interval`, :meth:`box`, :meth:`ball`,
    :meth:`annulus` rather than the raw fields.
    """

    dimension: int
    outer: str  # "box" or "ball"
    lower: tuple = None
    upper: tuple = None
    radius: float = None
    hole: float = 0.0

    def __post_init__(self):
        n = self.dimension
        if n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {n}")
        if self.outer == "box":
            lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
            if lo.shape != (n,) or hi.shape != (n,):
                raise ValueError("box bounds must have one entry per dimension")
            if not np.all(hi > lo):
                raise ValueError("box must have positive volume")
            if self.hole > 0:
                if n > 1:
                    raise ValueError("holes in boxes are only supported for n = 1")
                if not (lo[0] < -self.hole and self.hole < hi[0]):
                    raise ValueError("the excised ball must lie inside the interval")
        elif self.outer == "ball":
            if not self.radius or self.radius <= 0:
                raise ValueError("ball radius must be positive")
            if not 0 <= self.hole < self.radius:
                raise ValueError("hole radius must lie in [0, radius)")
        else:
            raise ValueError(f"unknown outer shape {self.outer!r}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def interval(cls, a, b):
        return cls(1, "box", (float(a),), (float(b),))

    @classmethod
    def box(cls, lower, upper):
        lower = tuple(float(v) for v in lower)
        return cls(len(lower), "box", lower, tuple(float(v) for v in upper))

    @classmethod
    def cube(cls, n, a, b):
        return cls.box((a,) * n, (b,) * n)

    @classmethod
    def ball(cls, n, radius):
        return cls(n, "ball", radius=float(radius))

    @classmethod
    def annulus(cls, n, r_in, r_out):
        return cls(n, "ball", radius=float(r_out), hole=float(r_in))

    ball_minus_ball = annulus

    def excise(self, eps):
        """Remove the closed ball ``B_eps(0)`` (no-op for ``eps <= hole``)."""
        if eps is None or eps <= self.hole:
            return self
        return replace(self, hole=float(eps))

    # -- geometry ---------------------------------------------------------
    @property
    def shape(self):
        if self.outer == "ball":
            return "annulus" if self.hole > 0 else "ball"
        if self.dimension == 1:
            return "interval-minus-ball" if self.hole > 0 else "interval"
        return "box"

    @property
    def bounded(self):
        if self.outer == "ball":
            return math.isfinite(self.radius)
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    @property
    def outer_radius(self):
        """Largest |x| over the domain."""
        if self.outer == "ball":
            return self.radius
        corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return float(np.linalg.norm(corner))

    @property
    def diameter(self):
        if self.outer == "ball":
            return 2 * self.radius
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    @property
    def volume(self):
        n = self.dimension
        if self.outer == "ball":
            return ball_volume(n, self.radius) - ball_volume(n, self.hole)
        return float(np.prod(np.subtract(self.upper, self.lower))) - ball_volume(n, self.hole)

    def contains(self, points):
        x = np.asarray(points, float)
        r = np.linalg.norm(x, axis=-1)
        if self.outer == "ball":
            inside = r < self.radius
        else:
            inside = np.all((x > self.lower) & (x < self.upper), axis=-1)
        if self.hole > 0:
            inside &= r > self.hole
        return inside

    def dist_to_boundary(self, points):
        """Signed distance to the boundary (positive inside)."""
        x = np.asarray(points, float)
        r = np.linalg.norm(x, axis=-1)
        if self.outer == "ball":
            d = self.radius - r
        else:
            d = np.min(np.minimum(x - self.lower, self.upper - x), axis=-1)
        if self.hole > 0:
            d = np.minimum(d, r - self.hole)
        return d

    def ray_segments(self, x, omega, extra_hole=None):
        """Intersect rays ``x + rho*omega`` (rho >= 0) with the domain.

        Parameters
        ----------
        x, omega : array, shape (..., n)
            Ray origins and unit directions (broadcast together).
        extra_hole : array, shape (...), optional
            Radius of an additional ball centred at the origin to remove.

        Returns
        -------
        lo, hi : arrays, shape (..., 2)
            Up to two segments; an empty segment has ``hi <= lo``.
        """
        x, omega = np.broadcast_arrays(np.asarray(x, float), np.asarray(omega, float))
        b = np.sum(x * omega, axis=-1)
        xx = np.sum(x * x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.outer == "ball":
                disc = b * b - (xx - self.radius**2)
                sq = np.sqrt(np.maximum(disc, 0.0))
                e0 = np.maximum(-b - sq, 0.0)
                e1 = np.where(disc > 0, -b + sq, 0.0)
            else:
                e0 = np.zeros(b.shape)
                e1 = np.full(b.shape, np.inf)
                for i in range(self.dimension):
                    o, xi = omega[..., i], x[..., i]
                    lo, hi = self.lower[i], self.upper[i]
                    t1 = (lo - xi) / o
                    t2 = (hi - xi) / o
                    zero = o == 0
                    tmin = np.where(zero, np.where((xi > lo) & (xi < hi), -np.inf, np.inf), np.minimum(t1, t2))
                    tmax = np.where(zero, np.where((xi > lo) & (xi < hi), np.inf, -np.inf), np.maximum(t1, t2))
                    e0 = np.maximum(e0, tmin)
                    e1 = np.minimum(e1, tmax)
            h = np.full(b.shape, self.hole)
            if extra_hole is not None:
                h = np.maximum(h, extra_hole)
            hdisc = b * b - (xx - h * h)
            hsq = np.sqrt(np.maximum(hdisc, 0.0))
            has_hole = (hdisc > 0) & (h > 0)
            h0 = np.where(has_hole, -b - hsq, np.inf)
            h1 = np.where(has_hole, -b + hsq, np.inf)
        lo = np.stack([e0, np.maximum(e0, h1)], axis=-1)
        hi = np.stack([np.minimum(e1, h0), e1], axis=-1)
        hi = np.where(hi > lo, hi, lo)
        return lo, hi

    def sample(self, count, seed=0):
        """Deterministic uniform sample of interior points (rejection)."""
        rng = np.random.default_rng(seed)
        n = self.dimension
        if self.outer == "ball":
            lo, hi = -self.radius * np.ones(n), self.radius * np.ones(n)
        else:
            lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        out = []
        have = 0
        while have < count:
            pts = rng.uniform(lo, hi, size=(2 * count + 16, n))
            pts = pts[self.contains(pts)]
            out.append(pts)
            have += len(pts)
        return np.concatenate(out)[:count]

    def to_spec(self):
        """Catalog string for this domain (see :func:`domain_from_spec`)."""
        n = self.dimension
        if self.outer == "ball":
            if self.hole > 0:
                return f"annulus:{n}:{self.hole!r}:{self.radius!r}"
            return f"ball:{n}:{self.radius!r}"
        if n == 1 and self.hole == 0:
            return f"interval:{self.lower[0]!r}:{self.upper[0]!r}"
        lo, hi = set(self.lower), set(self.upper)
        if len(lo) == 1 and len(hi) == 1 and self.hole == 0:
            return f"box:{n}:{self.lower[0]!r}:{self.upper[0]!r}"
        raise ValueError("domain has no catalog representation")


def domain_from_spec(text):
    """Parse ``interval:a:b``, ``box:n:a:b``, ``ball:n:R`` or ``annulus:n:r:R``."""
    parts = text.split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "interval" and len(args) == 2:
            return Domain.interval(float(args[0]), float(args[1]))
        if kind == "box" and len(args) == 3:
            return Domain.cube(int(args[0]), float(args[1]), float(args[2]))
        if kind == "ball" and len(args) == 2:
            return Domain.ball(int(args[0]), float(args[1]))
        if kind == "annulus" and len(args) == 3:
            return Domain.annulus(int(args[0]), float(args[1]), float(args[2]))
    except ValueError as exc:
        raise ValueError(f"bad domain {text!r}: {exc}") from None
    raise ValueError(
        f"unknown domain {text!r}; expected interval:a:b, box:n:a:b, ball:n:R or annulus:n:r:R"
    )


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------


class ScalarField:
    """A real function on R^n with gradient access.

    Parameters
    ----------
    value : callable
        ``value(x)`` for ``x`` of shape ``(..., n)`` returning shape ``(...)``.
    dimension : int
    gradient : callable, optional
        Analytic gradient with the same calling convention, returning
        ``(..., n)``.  Central differences with step `fd_step` are used when
        omitted.
    support_radius : float
        ``value`` vanishes for ``|x| > support_radius``; ``inf`` if unbounded.
    smoothness : {"C2c", "lipschitz", "singular-radial"}
    radial : bool
        True when ``value(x)`` depends on ``|x|`` only.
    singular_order : float, optional
        For singular-radial fields, ``|grad u| ~ |x|**-singular_order`` at 0.
    """

    def __init__(self, value, dimension, gradient=None, support_radius=math.inf,
                 smoothness="C2c", name="field", radial=False, singular_order=None,
                 sup_norm=None, lipschitz=None, fd_step=1e-4, richardson=False):
        if smoothness not in SMOOTHNESS:
            raise ValueError(f"smoothness must be one of {SMOOTHNESS}")
        if dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        self._value = value
        self._gradient = gradient
        self.dimension = dimension
        self.support_radius = float(support_radius)
        self.smoothness = smoothness
        self.name = name
        self.radial = radial
        self.singular_order = singular_order
        self.sup_norm = sup_norm
        self.lipschitz = lipschitz
        self.fd_step = fd_step
        self.richardson = richardson

    def __repr__(self):
        return f"ScalarField({self.name!r}, n={self.dimension}, {self.smoothness})"

    def __call__(self, x):
        return self._value(np.asarray(x, float))

    value = __call__

    @property
    def has_analytic_gradient(self):
        return self._gradient is not None

    @property
    def is_zero(self):
        return self.name == "zero" or (self.sup_norm == 0)

    def gradient(self, x):
        x = np.asarray(x, float)
        if self._gradient is not None:
            return self._gradient(x)
        return self.fd_gradient(x, self.fd_step, self.richardson)

    def fd_gradient(self, x, h=1e-4, richardson=False):
        """Central finite differences, optionally with one Richardson step."""
        x = np.asarray(x, float)

        def central(step):
            g = np.empty(x.shape)
            for i in range(self.dimension):
                e = np.zeros(self.dimension)
                e[i] = step
                g[..., i] = (self._value(x + e) - self._value(x - e)) / (2 * step)
            return g

        if not richardson:
            return central(h)
        return (4 * central(h / 2) - central(h)) / 3

    def scaled(self, c):
        """The field ``c * u``."""
        c = float(c)
        grad = None if self._gradient is None else (lambda x, g=self._gradient: c * g(x))
        return ScalarField(
            lambda x, v=self._value: c * v(x), self.dimension, grad,
            support_radius=self.support_radius, smoothness=self.smoothness,
            name=f"{c!r}*{self.name}", radial=self.radial,
            singular_order=self.singular_order,
            sup_norm=None if self.sup_norm is None else abs(c) * self.sup_norm,
            lipschitz=None if self.lipschitz is None else abs(c) * self.lipschitz,
            fd_step=self.fd_step, richardson=self.richardson,
        )

    def check_domain(self, dom):
        if not math.isfinite(self.support_radius) and not dom.bounded:
            raise ValueError(f"field {self.name!r} has unbounded support; use a bounded domain")


def zero_field(n):
    return ScalarField(lambda x: np.zeros(x.shape[:-1]), n,
                       lambda x: np.zeros(x.shape), support_radius=0.0,
                       name="zero", radial=True, sup_norm=0.0, lipschitz=0.0)


def constant_field(n, c):
    return ScalarField(lambda x: np.full(x.shape[:-1], float(c)), n,
                       lambda x: np.zeros(x.shape), name=f"const:{c}", radial=True,
                       sup_norm=abs(c), lipschitz=0.0)


def bump(n, radius=1.0):
    """Mollifier bump ``exp(1/(|x/radius|^2 - 1))`` inside the ball, 0 outside."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    r2 = radius * radius

    def value(x):
        q = np.sum(x * x, axis=-1) / r2
        inside = q < 1
        with np.errstate(divide="ignore", over="ignore"):
            out = np.exp(1.0 / np.where(inside, q - 1.0, -1.0))
        return np.where(inside, out, 0.0)

    def gradient(x):
        q = np.sum(x * x, axis=-1) / r2
        inside = q < 1
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            d = np.where(inside, q - 1.0, -1.0)
            fac = np.where(inside, -np.exp(1.0 / d) * 2.0 / (r2 * d * d), 0.0)
        return fac[..., None] * x

    # sup |u'| for the 1-D profile; used by the majorant bound
    t = np.linspace(0, radius, 20001)[:-1]
    lip = float(np.max(np.linalg.norm(gradient(t[:, None] * np.eye(n)[0]), axis=-1)))
    return ScalarField(value, n, gradient, support_radius=radius, smoothness="C2c",
                       name=f"bump:{n}:{radius!r}", radial=True, sup_norm=math.exp(-1),
                       lipschitz=lip)


def linear_field(n=1):
    """``u(x) = x_1``; infinite support, only usable on bounded domains."""
    return ScalarField(lambda x: x[..., 0].copy(), n,
                       lambda x: np.broadcast_to(np.eye(n)[0], x.shape).copy(),
                       name="linear", smoothness="C2c", lipschitz=1.0)


def tent_field(n, radius=1.0):
    """Lipschitz tent ``max(0, 1 - |x|/radius)``: in W^{1,inf}, not C^2.

    This is the shipped non-smooth representative for the
    ``W^{1,p+} ∩ W^{1,p-}`` experiment; any Lipschitz compactly supported
    function would do.
    """
    def value(x):
        return np.maximum(0.0, 1.0 - np.linalg.norm(x, axis=-1) / radius)

    def gradient(x):
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = -x / (radius * r[..., None])
        return np.where(((r > 0) & (r < radius))[..., None], g, 0.0)

    return ScalarField(value, n, gradient, support_radius=radius, smoothness="lipschitz",
                       name=f"tent:{n}:{radius!r}", radial=True, sup_norm=1.0,
                       lipschitz=1.0 / radius)


def _hermite_blend(q):
    """Cubic Hermite on [1, 2]: phi(1)=1, phi'(1)=1-q, phi(2)=0, phi'(2)=0."""
    def phi(t):
        tau = t - 1.0
        return (2 * tau**3 - 3 * tau**2 + 1) + (1 - q) * (tau**3 - 2 * tau**2 + tau)

    def dphi(t):
        tau = t - 1.0
        return (6 * tau**2 - 6 * tau) + (1 - q) * (3 * tau**2 - 4 * tau + 1)

    return phi, dphi


def radial_profile(q):
    """The decreasing profile ``phi`` and its derivative for exponent `q`."""
    blend, dblend = _hermite_blend(q)

    def phi(t):
        t = np.asarray(t, float)
        with np.errstate(divide="ignore"):
            core = np.where(t > 0, t, 1.0) ** (1 - q)
        out = np.where(t <= 1, np.where(t > 0, core, np.inf), np.clip(blend(t), 0.0, 1.0))
        return np.where(t >= 2, 0.0, out)

    def dphi(t):
        t = np.asarray(t, float)
        with np.errstate(divide="ignore"):
            core = (1 - q) * np.where(t > 0, t, 1.0) ** (-q)
        out = np.where(t <= 1, np.where(t > 0, core, -np.inf), dblend(t))
        return np.where(t >= 2, 0.0, out)

    return phi, dphi


def counterexample_field(q, n):
    """``u(x) = phi(|x|)`` with ``phi(t) = t**(1-q)`` on (0, 1], a C^1 Hermite
    blend on [1, 2] and zero beyond.  Requires ``1 < q < n``."""
    if not 1 < q < n:
        raise ValueError(
            f"q must lie in (1, n) = (1, {n}); otherwise '1 < p̄ < n/q' cannot hold (q={q})"
        )
    phi, dphi = radial_profile(q)

    def value(x):
        return phi(np.linalg.norm(x, axis=-1))

    def gradient(x):
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = (dphi(r) / r)[..., None] * x
        return g

    return ScalarField(value, n, gradient, support_radius=2.0, smoothness="singular-radial",
                       name=f"counterexample:{q!r}", radial=True, singular_order=q)


def field_from_spec(text, n):
    """Parse ``bump:<n>:<radius>``, ``linear``, ``counterexample:<q>``,
    ``tent:<n>:<radius>`` or ``zero``."""
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "bump":
            dim = int(parts[1]) if len(parts) > 1 else n
            radius = float(parts[2]) if len(parts) > 2 else 1.0
            return bump(dim, radius)
        if kind == "tent":
            dim = int(parts[1]) if len(parts) > 1 else n
            radius = float(parts[2]) if len(parts) > 2 else 1.0
            return tent_field(dim, radius)
        if kind == "linear" and len(parts) == 1:
            return linear_field(n)
        if kind == "counterexample" and len(parts) == 2:
            return counterexample_field(float(parts[1]), n)
        if kind == "zero" and len(parts) == 1:
            return zero_field(n)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad field {text!r}: {exc}") from None
    raise KeyError(text)


FIELD_NAMES = ("bump:<n>:<radius>", "linear", "counterexample:<q>", "tent:<n>:<radius>", "zero")


# ---------------------------------------------------------------------------
# Cells
# ---------------------------------------------------------------------------

COORDS = ("cartesian", "polar", "logpolar", "spherical", "logspherical",
          "radial", "logradial")


@dataclass(frozen=True)
class Cell:
    """Axis-aligned box in the parameter coordinates of a domain.

    ``coords`` selects the map to physical space: cartesian boxes, polar
    ``(r, theta)``, spherical ``(r, theta, phi)``, their logarithmic-radius
    variants ``(log r, ...)``, or the 1-D ``radial`` reductions used for
    rotation-invariant integrands.  ``grade`` lists, per parameter axis,
    -1/+1 when the polynomial grading toward the lower/upper end is active.
    """

    lo: tuple
    hi: tuple
    coords: str
    dimension: int
    path: tuple = ()
    near_singular: bool = False
    grade: tuple = None
    grading_exponent: float = 1.0
    singular: bool = False

    @property
    def center(self):
        mid = 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))
        return self.to_physical(mid[None, :])[0]

    @property
    def level(self):
        return len(self.path)

    @property
    def measure(self):
        """Exact measure of the cell (in the reduced sense for radial coords)."""
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        c, n = self.coords, self.dimension
        if c == "cartesian":
            return float(np.prod(hi - lo))
        r0, r1 = lo[0], hi[0]
        if c.startswith("log"):
            r0, r1 = math.exp(r0), math.exp(r1)
        if c.endswith("polar"):
            return (r1**2 - r0**2) / 2 * (hi[1] - lo[1])
        if c.endswith("spherical"):
            return (r1**3 - r0**3) / 3 * (math.cos(lo[1]) - math.cos(hi[1])) * (hi[2] - lo[2])
        return sphere_area(n) * (r1**n - r0**n) / n

    def split(self):
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        mid = 0.5 * (lo + hi)
        k = len(lo)
        out = []
        for idx in range(2**k):
            bits = [(idx >> j) & 1 for j in range(k)]
            clo = tuple(float(lo[j] if b == 0 else mid[j]) for j, b in enumerate(bits))
            chi = tuple(float(mid[j] if b == 0 else hi[j]) for j, b in enumerate(bits))
            grade = None
            if self.grade is not None:
                g = []
                for j, b in enumerate(bits):
                    gj = self.grade[j]
                    keep = (gj == -1 and b == 0) or (gj == 1 and b == 1)
                    g.append(gj if keep else 0)
                if any(g):
                    grade = tuple(g)
            if self.coords == "cartesian":
                near = False
            else:
                near = self.near_singular and bits[0] == 0
            child = replace(self, lo=clo, hi=chi, path=self.path + (idx,),
                            grade=grade, near_singular=near)
            if self.coords == "cartesian":
                child = _mark_cartesian(child)
            out.append(child)
        return out

    def _axis_map(self, t, j):
        """Map reference t in [0,1] along axis j; returns (param, dparam/dt)."""
        a, b = self.lo[j], self.hi[j]
        g = 0 if self.grade is None else self.grade[j]
        e = self.grading_exponent
        if g == 0 or e == 1:
            return a + (b - a) * t, np.full_like(t, b - a)
        if g == -1:
            return a + (b - a) * t**e, (b - a) * e * t ** (e - 1)
        return b - (b - a) * (1 - t) ** e, (b - a) * e * (1 - t) ** (e - 1)

    def to_physical(self, params):
        params = np.asarray(params, float)
        c, n = self.coords, self.dimension
        if c == "cartesian":
            return params
        r = params[:, 0]
        if c.startswith("log"):
            r = np.exp(r)
        if c.endswith("radial"):
            out = np.zeros((len(r), n))
            out[:, 0] = r
            return out
        if c.endswith("polar"):
            th = params[:, 1]
            return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
        th, ph = params[:, 1], params[:, 2]
        return np.stack([r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph),
                         r * np.cos(th)], axis=-1)

    def _jacobian(self, params):
        c, n = self.coords, self.dimension
        if c == "cartesian":
            return np.ones(len(params))
        r = params[:, 0]
        jac = np.ones(len(params))
        if c.startswith("log"):
            r = np.exp(r)
            jac = r.copy()
        if c.endswith("radial"):
            return jac * sphere_area(n) * r ** (n - 1)
        if c.endswith("polar"):
            return jac * r
        return jac * r * r * np.sin(params[:, 1])

    def nodes(self, rule):
        """Tensor nodes of a 1-D rule on [0, 1].

        Parameters
        ----------
        rule : tuple (t, w_fine, w_coarse)
            Reference nodes and the two embedded weight sets.

        Returns
        -------
        points : array (N, n)
        w_fine, w_coarse : arrays (N,)
        """
        t, wf, wc = rule
        k = len(self.lo)
        grids, dgrids = [], []
        for j in range(k):
            p, dp = self._axis_map(t, j)
            grids.append(p)
            dgrids.append(dp)
        mesh = np.meshgrid(*grids, indexing="ij")
        dmesh = np.meshgrid(*dgrids, indexing="ij")
        wfm = np.meshgrid(*([wf] * k), indexing="ij")
        wcm = np.meshgrid(*([wc] * k), indexing="ij")
        params = np.stack([m.ravel() for m in mesh], axis=-1)
        d = np.prod([m.ravel() for m in dmesh], axis=0)
        jac = self._jacobian(params) * d
        w_fine = np.prod([m.ravel() for m in wfm], axis=0) * jac
        w_coarse = np.prod([m.ravel() for m in wcm], axis=0) * jac
        return self.to_physical(params), w_fine, w_coarse


def _root_cells(dom, radial=False, singular=False, grading=1.0, log_ratio=16.0):
    n = dom.dimension
    common = dict(dimension=n, grading_exponent=grading, singular=singular)
    use_log = dom.hole > 0 and dom.radius is not None and dom.radius / dom.hole >= log_ratio
    if radial:
        if dom.outer != "ball":
            raise ValueError("radial reduction needs a ball or annulus centred at 0")
        if use_log:
            return [Cell((math.log(dom.hole),), (math.log(dom.radius),), "logradial", **common)]
        touch = dom.hole == 0
        return [Cell((dom.hole,), (dom.radius,), "radial", near_singular=touch,
                     grade=(-1,) if (touch and singular) else None, **common)]
    if dom.outer == "box":
        if dom.hole > 0:
            a, b = dom.lower[0], dom.upper[0]
            return [Cell((a,), (-dom.hole,), "cartesian", path=(0,), **common),
                    Cell((dom.hole,), (b,), "cartesian", path=(1,), **common)]
        return [Cell(tuple(dom.lower), tuple(dom.upper), "cartesian", **common)]
    R, h = dom.radius, dom.hole
    if n == 1:
        if h > 0:
            return [Cell((-R,), (-h,), "cartesian", path=(0,), **common),
                    Cell((h,), (R,), "cartesian", path=(1,), **common)]
        return [Cell((-R,), (R,), "cartesian", **common)]
    coords = ("logpolar" if use_log else "polar") if n == 2 else ("logspherical" if use_log else "spherical")
    r0, r1 = (math.log(h), math.log(R)) if use_log else (h, R)
    ang_lo = (0.0,) if n == 2 else (0.0, 0.0)
    ang_hi = (2 * math.pi,) if n == 2 else (math.pi, 2 * math.pi)
    touch = h == 0
    grade = ((-1,) + (0,) * (n - 1)) if (touch and singular) else None
    return [Cell((r0,) + ang_lo, (r1,) + ang_hi, coords, near_singular=touch, grade=grade,
                 **common)]


def _mark_cartesian(cell):
    """Flag Cartesian cells touching the origin and grade toward it."""
    lo, hi = np.asarray(cell.lo), np.asarray(cell.hi)
    touches = bool(np.all((lo <= 0) & (hi >= 0)))
    if not touches:
        return replace(cell, near_singular=False, grade=None)
    grade = None
    if cell.singular:
        g = tuple(-1 if lo[j] == 0 else (1 if hi[j] == 0 else 0) for j in range(len(lo)))
        grade = g if any(g) else None
    return replace(cell, near_singular=True, grade=grade)


def cell_decomposition(dom, level, singular=False, radial=False, grading_exponent=1.0):
    """Deterministic partition of `dom` into parameter-space boxes.

    Each root cell is split ``level`` times along every parameter axis.  Balls
    and annuli use polar/spherical parameters (logarithmic radius for thin
    holes), so cell measures are exact and sum to the domain volume.

    Parameters
    ----------
    singular : bool
        Enable polynomial grading (`grading_exponent`) toward the origin in
        cells that touch it.
    radial : bool
        Use the 1-D radial reduction (rotation-invariant integrands only).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    cells = _root_cells(dom, radial=radial, singular=singular, grading=grading_exponent)
    if dom.outer == "box" or (dom.dimension == 1 and not radial):
        cells = [_mark_cartesian(c) for c in cells]
    for _ in range(level):
        cells = [child for c in cells for child in c.split()]
    return cells
