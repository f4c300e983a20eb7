"""Determinant functionals and the constants of the convergence law.

The central quantity is the weighted mass

    M(f) = integral of (det D^2 f)^(p/(n+2p)) * omega(x, f(x))^(n/(n+2p))

over a region; the rescaled approximation errors m^(2p/n) * Delta_p
converge to  (delta(n, p) / 2^p) * M(f)^((n+2p)/n),  where delta(n, p) is
the quantization coefficient of the exponent-2p power distortion in n
dimensions.  delta is closed form in one dimension; in the plane the
optimal quantizer is asymptotically the hexagonal lattice, so the
coefficient is the corresponding moment of a unit-area regular hexagon
(0.1603750747... for p = 1, i.e. twice the per-dimension normalized
second moment 5/(36 sqrt 3) quoted in coding tables).  An empirical
estimator backed by the Lloyd quantizer is provided for cross-checks.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _sp_integrate

from .convex_core import Domain, DomainError, WeightError
from .quadrature import ErrorReport, QuadratureSpec, integrate


@dataclass(frozen=True)
class ZadorConstant:
    """Quantization coefficient delta(n, p) with its provenance.

    provenance is one of ``closed_form_1d``, ``hexagonal_2d``,
    ``empirical``; half_width is a confidence half-width for empirical
    values (0 for exact ones).
    """

    n: int
    p: float
    value: float
    provenance: str
    half_width: float = 0.0


@dataclass(frozen=True)
class FunctionalResult:
    value: float
    error_bar: float
    nodes_used: int
    conc_warning: bool = False


class ZetaFunction:
    """Scalar transform applied to det D^2 f inside Z functionals.

    The natural class is concave with zeta(0+) = 0 and zeta(t)/t -> 0 at
    infinity; transforms outside it are allowed but flagged.

    kinds: ``power`` (t^exponent), ``capped_linear`` (min(t, cap)),
    ``tabulated`` (linear interpolation of (ts, vals)).
    """

    def __init__(self, kind, params):
        self.kind = kind
        self.params = dict(params)
        if kind == "power":
            a = float(self.params["exponent"])
            if a <= 0:
                raise ValueError("power exponent must be positive")
            self.in_conc = a < 1.0
        elif kind == "capped_linear":
            c = float(self.params["cap"])
            if c < 0:
                raise ValueError("cap must be nonnegative")
            self.in_conc = True
        elif kind == "tabulated":
            ts = np.asarray(self.params["ts"], dtype=float)
            vals = np.asarray(self.params["vals"], dtype=float)
            if ts.ndim != 1 or ts.shape != vals.shape or np.any(np.diff(ts) <= 0):
                raise ValueError("tabulated zeta needs increasing ts and matching vals")
            self.params = {"ts": ts.tolist(), "vals": vals.tolist()}
            # concavity and endpoint probes for the flag
            slopes = np.diff(vals) / np.diff(ts)
            self.in_conc = bool(
                np.all(np.diff(slopes) <= 1e-12)
                and abs(np.interp(0.0, ts, vals)) < 1e-12
                and slopes[-1] <= 1e-12 + 0.0
            )
        else:
            raise ValueError(f"unknown zeta kind {kind!r}")

    @classmethod
    def power(cls, exponent):
        return cls("power", {"exponent": exponent})

    @classmethod
    def capped_linear(cls, cap):
        return cls("capped_linear", {"cap": cap})

    @classmethod
    def tabulated(cls, ts, vals):
        return cls("tabulated", {"ts": ts, "vals": vals})

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return np.power(np.maximum(t, 0.0), self.params["exponent"])
        if self.kind == "capped_linear":
            return np.minimum(t, self.params["cap"])
        return np.interp(t, self.params["ts"], self.params["vals"])


def z_zeta(f, zeta, quad=None, region=None):
    """Z functional: integral of zeta(det D^2 f) over the region."""
    region = region or f.domain
    quad = quad or _default_quad(region)
    conc_warning = not zeta.in_conc
    if conc_warning:
        warnings.warn("zeta transform is outside the concave class; "
                      "the value is reported anyway", stacklevel=2)
    rep = integrate(lambda x: zeta(f.hessian_det(x)), region, quad)
    return FunctionalResult(value=rep.value, error_bar=rep.error_bar,
                            nodes_used=rep.nodes_used, conc_warning=conc_warning)


def weighted_mass(f, p, omega, region=None, quad=None):
    """The mass integral M(f) driving the convergence law (see module docs)."""
    region = region or f.domain
    if region.dim != f.dim:
        raise DomainError("region dimension does not match the function")
    _check_region_inside(region, f.domain)
    quad = quad or _default_quad(region)
    n = f.dim
    a = p / (n + 2.0 * p)
    b = n / (n + 2.0 * p)

    def integrand(x):
        det = np.maximum(f.hessian_det(x), 0.0)
        vals = f.value(x)
        w = np.asarray(omega(x, vals), dtype=float)
        if np.any(w <= 0):
            raise WeightError("weight must be positive on the region")
        return det ** a * w ** b

    return float(integrate(integrand, region, quad).value)


def _check_region_inside(region, domain):
    lo, hi = region.bounding_box()
    dlo, dhi = domain.bounding_box()
    if np.any(lo < dlo - 1e-12) or np.any(hi > dhi + 1e-12):
        raise DomainError("integration region exceeds the function domain")


def _default_quad(region):
    if region.dim == 1:
        return QuadratureSpec(kind="tensor_grid", level=64)
    if region.kind == "box":
        return QuadratureSpec(kind="tensor_grid", level=128)
    return QuadratureSpec(kind="monte_carlo", samples=1_000_000)


def theoretical_limit(mass, p, n, delta):
    """Limit of m^(2p/n) * Delta_p:  (delta/2^p) * mass^((n+2p)/n)."""
    if mass < 0:
        raise ValueError("mass must be nonnegative")
    if delta.n != n or abs(delta.p - p) > 1e-12:
        raise ValueError(
            f"constant is for (n={delta.n}, p={delta.p}), not (n={n}, p={p})")
    return delta.value / 2.0 ** p * mass ** ((n + 2.0 * p) / n)


def zador_closed_form_1d(p):
    """delta(1, p) = 1 / (2^{2p} (2p+1)): optimal 1-d cells are equal intervals."""
    if p <= 0:
        raise ValueError("p must be positive")
    return ZadorConstant(n=1, p=float(p), value=1.0 / (2.0 ** (2 * p) * (2 * p + 1)),
                         provenance="closed_form_1d")


def hexagonal_moment(p):
    """Moment of order 2p of a unit-area regular hexagon about its center.

    Computed in polar form: 12 * int_0^{pi/6} a^{2p+2} / ((2p+2) cos^{2p+2})
    with apothem a = (2 sqrt 3)^{-1/2}.  For p = 1 this equals
    5 sqrt(3)/54 = 0.16037507477...
    """
    a = (2.0 * np.sqrt(3.0)) ** -0.5
    val, _ = _sp_integrate.quad(
        lambda t: a ** (2 * p + 2) / np.cos(t) ** (2 * p + 2) / (2 * p + 2),
        0.0, np.pi / 6.0, epsabs=1e-15, epsrel=1e-13)
    return 12.0 * val


def zador_reference(n, p):
    """Best known exact/lattice value of delta(n, p).

    n = 1: closed form.  n = 2: hexagonal-lattice moment (the asymptotically
    optimal planar quantizer).  Higher dimensions have no exact value; use
    :func:`zador_estimate`.
    """
    if n == 1:
        return zador_closed_form_1d(p)
    if n == 2:
        return ZadorConstant(n=2, p=float(p), value=hexagonal_moment(p),
                             provenance="hexagonal_2d")
    raise ValueError(f"no reference constant in dimension {n}; estimate it")


def zador_estimate(n, p, m_list, trials=8, seed=0, max_iterations=200,
                   eval_samples=200_000):
    """Empirical delta(n, p) from Lloyd runs on the unit cube.

    For each m the quantizer runs ``trials`` times with independent seeds;
    the rescaled distortion m^(2p/n) * distortion is evaluated on a fresh
    cloud (so the training cloud's optimism does not leak in).  Reported
    value: minimum over trials at the largest m; half_width: a bootstrap
    of that minimum.  Being a feasible-point estimate it upper-bounds the
    true coefficient up to sampling error.
    """
    from .quantizer import QuantizerConfig, quantize, quantizer_objective

    cube = Domain.box(np.zeros(n), np.ones(n))
    m_list = sorted(set(int(m) for m in m_list))
    if not m_list:
        raise ValueError("m_list must be non-empty")
    m_top = m_list[-1]
    per_trial = []
    for m in m_list:
        vals = []
        for t in range(trials):
            cfg = QuantizerConfig(m=m, p=p, seed=(seed * 1000003 + 7919 * t + m),
                                  max_iterations=max_iterations)
            ps = quantize(cube, None, cfg)
            rep = quantizer_objective(
                cube, None, np.eye(n), p, ps.points,
                QuadratureSpec(kind="monte_carlo", samples=eval_samples,
                               seed=(seed, m, t)))
            vals.append(m ** (2.0 * p / n) * rep.value)
        if m == m_top:
            per_trial = vals
    arr = np.asarray(per_trial)
    est = float(arr.min())
    rng = np.random.default_rng(seed + 17)
    boots = np.min(rng.choice(arr, size=(1000, arr.size), replace=True), axis=1)
    half = float(1.96 * np.std(boots))
    return ZadorConstant(n=n, p=float(p), value=est, provenance="empirical",
                         half_width=half)
