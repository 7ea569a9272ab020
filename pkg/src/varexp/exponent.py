"""Variable exponents ``p(x, y)`` and a sampled log-Hölder audit.

An :class:`ExponentField` wraps a vectorised function of two points together
with declared bounds ``1 < p_minus <= p <= p_plus``.  The bounds are declared
by the constructor and spot-checked by sampling; they are not proven.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .fields import Domain, cell_decomposition

KINDS = ("constant", "separable-radial", "smooth-general")


class ExponentField:
    """Exponent ``p(x, y)`` with bounds, trace and symmetry metadata.

    Parameters
    ----------
    func : callable
        ``func(x, y)`` on broadcastable arrays of shape ``(..., n)``.
    p_minus, p_plus : float
        Declared bounds, ``1 < p_minus <= p_plus < inf``.
    dimension : int
    kind : {"constant", "separable-radial", "smooth-general"}
    symmetric : bool
        ``p(x, y) == p(y, x)``.  Asymmetric exponents are allowed; the modular
        integrates over both orderings and nothing is symmetrised.
    isotropic : bool
        ``p(x, y)`` depends on ``|x - y|`` only.
    """

    def __init__(self, func, p_minus, p_plus, dimension, kind="smooth-general",
                 name="exponent", symmetric=False, isotropic=False):
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not (1 < p_minus <= p_plus < math.inf):
            raise ValueError(
                f"exponent bounds must satisfy 1 < p_minus <= p_plus < inf, got ({p_minus}, {p_plus})"
            )
        self._func = func
        self.p_minus = float(p_minus)
        self.p_plus = float(p_plus)
        self.dimension = dimension
        self.kind = kind
        self.name = name
        self.symmetric = symmetric
        self.isotropic = isotropic

    def __repr__(self):
        return f"ExponentField({self.name!r}, [{self.p_minus}, {self.p_plus}])"

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.asarray(self._func(x, y), float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        return np.broadcast_to(out, shape)

    evaluate = __call__

    def trace(self, x):
        """The diagonal ``p̄(x) = p(x, x)``."""
        x = np.asarray(x, float)
        return self(x, x)

    def check_bounds(self, dom, samples=10_000, seed=0):
        """Sample random pairs in `dom`; return the observed (min, max).

        Raises ``ValueError`` when a sample leaves ``[p_minus, p_plus]``.
        """
        x = dom.sample(samples, seed=seed)
        y = dom.sample(samples, seed=seed + 1)
        vals = np.concatenate([self(x, y), self.trace(x)])
        if np.any(~np.isfinite(vals)):
            raise ValueError(f"exponent {self.name!r} produced non-finite values")
        lo, hi = float(vals.min()), float(vals.max())
        slack = 1e-12 * max(1.0, self.p_plus)
        if lo < self.p_minus - slack or hi > self.p_plus + slack:
            raise ValueError(
                f"exponent {self.name!r} sampled range [{lo}, {hi}] leaves declared "
                f"[{self.p_minus}, {self.p_plus}]"
            )
        return lo, hi


def make_constant_exponent(p, n):
    """The constant exponent ``p(x, y) = p``; requires ``p > 1``."""
    p = float(p)
    if not p > 1:
        raise ValueError(f"constant exponent must exceed 1, got {p}")
    if not math.isfinite(p):
        raise ValueError("constant exponent must be finite")
    return ExponentField(lambda x, y: np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), p),
                         p, p, n, kind="constant", name=f"const:{p!r}",
                         symmetric=True, isotropic=True)


def make_radial_exponent(profile, n, r_max=64.0, name="radial", samples=8193):
    """Exponent ``p(x, y) = profile(|x - y|)``.

    The bounds are the extremes of `profile` on a sample of ``[0, r_max]``
    (uniform plus geometric near zero); profiles leaving ``(1, inf)`` there are
    rejected.
    """
    r = np.unique(np.concatenate([np.linspace(0.0, r_max, samples),
                                  np.geomspace(1e-9, r_max, samples)]))
    vals = np.asarray(profile(r), float)
    if vals.shape != r.shape:
        vals = np.broadcast_to(vals, r.shape)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 1):
        raise ValueError(f"radial profile must stay in (1, inf); sampled min {np.nanmin(vals)}")
    lo, hi = float(vals.min()), float(vals.max())
    kind = "constant" if lo == hi else "separable-radial"

    def func(x, y):
        return profile(np.linalg.norm(x - y, axis=-1))

    field = ExponentField(func, lo, hi, n, kind=kind, name=name, symmetric=True, isotropic=True)
    field.profile = profile
    return field


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, monotone in between."""
    t = np.asarray(t, float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def counterexample_profile(pbar, pinf, r_start=0.25, r_end=0.75):
    """Smooth monotone profile equal to `pbar` near 0 and `pinf` for r >= r_end."""
    def profile(r):
        return pbar + (pinf - pbar) * smoothstep((np.asarray(r, float) - r_start) / (r_end - r_start))
    return profile


def counterexample_exponent(n, q, pbar, pinf, r_start=0.25, r_end=0.75):
    """Radial exponent for the embedding counterexample.

    Validates ``1 < pbar < n/q`` and ``pinf >= n/(q-1)`` with ``q in (1, n)``.
    """
    check_counterexample_conditions(n, q, pbar, pinf)
    if not 0 < r_start < r_end <= 1:
        raise ValueError("transition must satisfy 0 < r_start < r_end <= 1")
    field = make_radial_exponent(counterexample_profile(pbar, pinf, r_start, r_end), n,
                                 name=f"radial:counterexample:{q!r}:{pbar!r}:{pinf!r}")
    field.p_minus, field.p_plus = float(min(pbar, pinf)), float(max(pbar, pinf))
    return field


def check_counterexample_conditions(n, q, pbar, pinf):
    if not 1 < q < n:
        raise ValueError(f"q in (1, n) fails: q={q}, n={n}")
    if not 1 < pbar:
        raise ValueError(f"1 < p̄ fails: p̄={pbar}")
    if not pbar < n / q:
        raise ValueError(f"p̄ < n/q fails: p̄={pbar} >= n/q={n / q}")
    if not pinf >= n / (q - 1):
        raise ValueError(f"p(r) >= n/(q-1) fails: p_inf={pinf} < n/(q-1)={n / (q - 1)}")


def sine_exponent(n):
    """Built-in smooth exponent ``p(x, y) = 2 + 0.5*sin(sum_i (x_i + y_i))``.

    Symmetric, C-infinity, bounded in [1.5, 2.5]; its trace is
    ``2 + 0.5*sin(2*sum_i x_i)``.  Gradient bound ``0.5*sqrt(n)`` in ``y`` makes
    it log-Hölder with ``L = exp(sqrt(n)/e)``.
    """
    def func(x, y):
        return 2.0 + 0.5 * np.sin(np.sum(x, axis=-1) + np.sum(y, axis=-1))
    return ExponentField(func, 1.5, 2.5, n, kind="smooth-general", name="smooth:sine",
                         symmetric=True)


def jump_exponent(n, base=2.0, jump=0.5):
    """Non-log-Hölder exponent: ``base + jump`` when ``(y - x)_1 > 0`` else ``base``.

    Every ``p(x, .)`` jumps across the hyperplane through ``x``; used to
    illustrate what the limit looks like without the log-Hölder condition.
    The trace is ``base``.
    """
    def func(x, y):
        return base + jump * ((y[..., 0] - x[..., 0]) > 0)
    return ExponentField(func, base, base + jump, n, kind="smooth-general",
                         name=f"jump:{base!r}:{jump!r}")


def lipschitz_distance_exponent(n, base=2.0, slope=0.5):
    """``base + slope*min(|x - y|, 1)``: Lipschitz in ``y``, oscillation <= slope*r."""
    def func(x, y):
        return base + slope * np.minimum(np.linalg.norm(x - y, axis=-1), 1.0)
    field = make_radial_exponent(lambda r: base + slope * np.minimum(r, 1.0), n,
                                 name=f"lipdist:{base!r}:{slope!r}")
    field._func = func
    return field


def exponent_from_spec(text, n):
    """Catalog lookup: ``const:<p>``, ``radial:counterexample:<q>:<pbar>:<pinf>``,
    ``smooth:sine``, ``jump:<base>:<size>``, ``lipdist:<base>:<slope>``."""
    parts = text.split(":")
    try:
        if parts[0] == "const" and len(parts) == 2:
            return make_constant_exponent(float(parts[1]), n)
        if parts[:2] == ["radial", "counterexample"] and len(parts) == 5:
            q, pbar, pinf = (float(v) for v in parts[2:])
            return counterexample_exponent(n, q, pbar, pinf)
        if text == "smooth:sine":
            return sine_exponent(n)
        if parts[0] == "jump" and len(parts) == 3:
            return jump_exponent(n, float(parts[1]), float(parts[2]))
        if parts[0] == "lipdist" and len(parts) == 3:
            return lipschitz_distance_exponent(n, float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad exponent {text!r}: {exc}") from None
    raise KeyError(text)


EXPONENT_NAMES = ("const:<p>", "radial:counterexample:<q>:<pbar>:<pinf>", "smooth:sine",
                  "jump:<base>:<size>", "lipdist:<base>:<slope>")


# ---------------------------------------------------------------------------
# log-Hölder audit
# ---------------------------------------------------------------------------


@dataclass
class LogHolderGrid:
    """Centres and radii at which ``r**-osc`` is sampled."""

    centers: np.ndarray
    radii: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)

    @classmethod
    def default(cls, dom, level=3, radii=None):
        cells = cell_decomposition(dom, level)
        centers = np.array([c.center for c in cells])
        centers = centers[dom.contains(centers)]
        return cls(centers, tuple(radii) if radii is not None else cls.radii)


@dataclass
class LogHolderReport:
    max_ratio: float
    worst_point: np.ndarray
    worst_radius: float
    sample_count: int
    skipped: int
    verdict: str  # "bounded-by-L" | "violated" | "inconclusive"
    L: float


def _ball_offsets(n, count=64):
    """Fixed low-discrepancy points in the closed unit ball."""
    sob = qmc.Sobol(d=n, scramble=False)
    pts = 2.0 * sob.random(256) - 1.0
    pts = pts[np.linalg.norm(pts, axis=-1) <= 1.0]
    return pts[:count]


def oscillation(p, x, r, offsets=None):
    """Estimate ``osc_{B_r(x)} p(x, .)`` from 2n axis points, 64 fixed interior
    points and the centre."""
    x = np.asarray(x, float)
    n = x.shape[-1]
    if offsets is None:
        offsets = _ball_offsets(n)
    axes = np.concatenate([np.eye(n), -np.eye(n)])
    ys = x + r * np.concatenate([np.zeros((1, n)), axes, offsets])
    vals = p(x[None, :], ys)
    if np.any(np.isnan(vals)):
        raise ValueError(f"exponent returned NaN near x={x}")
    return float(vals.max() - vals.min())


def check_log_holder(p, dom, L, grid=None):
    """Sample ``r**(-osc_{B_r(x)} p(x, .))`` over a grid of centres and radii.

    Samples with ``r >= min(dist(x, boundary), 1)`` are skipped and counted.
    Because a finite sample under-estimates the oscillation, a "violated"
    verdict is a certificate while "bounded-by-L" is only evidence.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if grid is None:
        grid = LogHolderGrid.default(dom)
    centers = np.atleast_2d(np.asarray(grid.centers, float))
    if centers.size == 0 or len(grid.radii) == 0:
        raise ValueError("log-Hölder grid is empty")
    offsets = _ball_offsets(dom.dimension)
    dist = dom.dist_to_boundary(centers)
    best, worst_x, worst_r = 1.0, centers[0], float(grid.radii[0])
    count = skipped = 0
    for x, d in zip(centers, dist):
        for r in grid.radii:
            if not (0 < r < min(d, 1.0)):
                skipped += 1
                continue
            osc = oscillation(p, x, r, offsets)
            ratio = r ** (-osc)
            count += 1
            if ratio > best:
                best, worst_x, worst_r = ratio, x, float(r)
    if count == 0:
        verdict = "inconclusive"
    elif best <= L:
        verdict = "bounded-by-L"
    else:
        verdict = "violated"
    return LogHolderReport(best, np.asarray(worst_x), worst_r, count, skipped, verdict, float(L))
