"""Core geometry: domains, smooth convex test functions, tangent planes,
and max-of-affine (circumscribed piecewise-affine) envelopes.

The function catalog is closed and serializable: every entry is named by a
``catalog_id`` plus a parameter dict, so configurations round-trip through
plain JSON.  Catalog entries supply exact gradients and Hessians; a finite
difference cross-check (:func:`hessian_fd_check`) guards against drift
between the value and derivative implementations.

Points are numpy arrays: a single point has shape (n,), a batch (N, n).
All catalog callables are vectorized over batches.
"""

import json
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """A point or region fell outside the domain of definition."""


class NumericsError(RuntimeError):
    """A numeric contract was violated (non-PD metric, bad weight, ...)."""


class MetricError(NumericsError):
    """Quadratic form is not symmetric positive definite."""


class WeightError(NumericsError):
    """Weight function evaluated non-positive where positivity is required."""


class CircumscriptionError(NumericsError):
    """An alleged lower envelope exceeded the function it should support."""


def as_points(x, dim):
    """Coerce ``x`` to a (N, dim) float array; scalars allowed when dim==1."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        if dim != 1:
            raise ValueError("scalar point only valid in one dimension")
        return a.reshape(1, 1)
    if a.ndim == 1:
        if a.size == dim:
            return a.reshape(1, dim)
        if dim == 1:
            return a.reshape(-1, 1)
        raise ValueError(f"point of length {a.size} does not match dimension {dim}")
    if a.ndim == 2 and a.shape[1] == dim:
        return a
    raise ValueError(f"cannot interpret array of shape {a.shape} as points in R^{dim}")


# ---------------------------------------------------------------------------
# domains


class Domain:
    """Compact region: axis-aligned box, closed ball, or bounded polytope.

    Polytopes are stored as ``A x <= b`` and handled through their bounding
    box plus rejection, so only membership, bounding box and sampling are
    exact; volume is closed-form for boxes and balls only.
    """

    def __init__(self, kind, dim, **data):
        self.kind = kind
        self.dim = dim
        self._data = data

    # -- constructors -------------------------------------------------
    @classmethod
    def box(cls, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise DomainError("box bounds must be 1-d arrays of equal length")
        if not np.all(lower < upper):
            raise DomainError("box must be full dimensional (lower < upper)")
        lower.flags.writeable = False
        upper.flags.writeable = False
        return cls("box", lower.size, lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float)).copy()
        radius = float(radius)
        if radius <= 0:
            raise DomainError("ball must be full dimensional (radius > 0)")
        center.flags.writeable = False
        return cls("ball", center.size, center=center, radius=radius)

    @classmethod
    def polytope(cls, a, b):
        a = np.asarray(a, dtype=float).copy()
        b = np.atleast_1d(np.asarray(b, dtype=float)).copy()
        if a.ndim != 2 or a.shape[0] != b.size:
            raise DomainError("polytope wants A of shape (k, n) and b of shape (k,)")
        dim = a.shape[1]
        from scipy.optimize import linprog

        # bounding box via 2n LPs; unboundedness is rejected here
        lower = np.empty(dim)
        upper = np.empty(dim)
        for k in range(dim):
            c = np.zeros(dim)
            c[k] = 1.0
            lo = linprog(c, A_ub=a, b_ub=b, bounds=[(None, None)] * dim, method="highs")
            hi = linprog(-c, A_ub=a, b_ub=b, bounds=[(None, None)] * dim, method="highs")
            if not (lo.success and hi.success):
                raise DomainError("polytope must be bounded and feasible")
            lower[k], upper[k] = lo.fun, -hi.fun
        # Chebyshev center: full-dimensionality check
        norms = np.linalg.norm(a, axis=1)
        c = np.zeros(dim + 1)
        c[-1] = -1.0
        cheb = linprog(
            c,
            A_ub=np.hstack([a, norms[:, None]]),
            b_ub=b,
            bounds=[(None, None)] * dim + [(0, None)],
            method="highs",
        )
        if not cheb.success or cheb.x[-1] <= 1e-12:
            raise DomainError("polytope must have non-empty interior")
        a.flags.writeable = False
        b.flags.writeable = False
        lower.flags.writeable = False
        upper.flags.writeable = False
        return cls("polytope", dim, a=a, b=b, lower=lower, upper=upper,
                   chebyshev=np.array(cheb.x[:dim]))

    @classmethod
    def from_config(cls, cfg):
        kind = cfg.get("kind")
        if kind == "box":
            return cls.box(cfg["lower"], cfg["upper"])
        if kind == "ball":
            return cls.ball(cfg["center"], cfg["radius"])
        if kind == "polytope":
            return cls.polytope(cfg["a"], cfg["b"])
        raise DomainError(f"unknown domain kind {kind!r}")

    def to_config(self):
        if self.kind == "box":
            return {"kind": "box", "lower": self._data["lower"].tolist(),
                    "upper": self._data["upper"].tolist()}
        if self.kind == "ball":
            return {"kind": "ball", "center": self._data["center"].tolist(),
                    "radius": self._data["radius"]}
        return {"kind": "polytope", "a": self._data["a"].tolist(),
                "b": self._data["b"].tolist()}

    # -- geometry ------------------------------------------------------
    def bounding_box(self):
        if self.kind == "box":
            return self._data["lower"], self._data["upper"]
        if self.kind == "ball":
            c, r = self._data["center"], self._data["radius"]
            return c - r, c + r
        return self._data["lower"], self._data["upper"]

    def contains(self, x):
        pts = as_points(x, self.dim)
        if self.kind == "box":
            lo, hi = self._data["lower"], self._data["upper"]
            return np.all((pts >= lo) & (pts <= hi), axis=1)
        if self.kind == "ball":
            c, r = self._data["center"], self._data["radius"]
            return np.einsum("ij,ij->i", pts - c, pts - c) <= r * r
        a, b = self._data["a"], self._data["b"]
        return np.all(pts @ a.T <= b + 1e-12, axis=1)

    def volume(self):
        if self.kind == "box":
            lo, hi = self._data["lower"], self._data["upper"]
            return float(np.prod(hi - lo))
        if self.kind == "ball":
            r, n = self._data["radius"], self.dim
            from scipy.special import gamma

            return float(np.pi ** (n / 2) / gamma(n / 2 + 1) * r ** n)
        raise DomainError("polytope volume has no closed form here")

    def centroid(self):
        if self.kind == "box":
            lo, hi = self._data["lower"], self._data["upper"]
            return (lo + hi) / 2.0
        if self.kind == "ball":
            return self._data["center"].copy()
        return self._data["chebyshev"].copy()

    def sample(self, rng, count):
        """Uniform sample of the region (rejection for non-boxes)."""
        lo, hi = self.bounding_box()
        if self.kind == "box":
            return lo + rng.random((count, self.dim)) * (hi - lo)
        out = np.empty((count, self.dim))
        got = 0
        while got < count:
            batch = lo + rng.random((max(count, 1024), self.dim)) * (hi - lo)
            keep = batch[self.contains(batch)]
            take = min(count - got, keep.shape[0])
            out[got:got + take] = keep[:take]
            got += take
        return out

    def __repr__(self):
        return f"Domain({self.kind}, dim={self.dim})"


# ---------------------------------------------------------------------------
# affine pieces and envelopes


@dataclass(frozen=True)
class AffineFunction:
    """x -> slope . x + offset"""

    slope: np.ndarray
    offset: float

    def __call__(self, x):
        pts = as_points(x, self.slope.size)
        return pts @ self.slope + self.offset


class PiecewiseAffineMax:
    """Finite max of affine functions l(x) = max_j (slope_j . x + offset_j)."""

    def __init__(self, slopes, offsets):
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float)).copy()
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float)).copy()
        if slopes.shape[0] != offsets.size or slopes.shape[0] == 0:
            raise ValueError("need one offset per slope row and at least one piece")
        slopes.flags.writeable = False
        offsets.flags.writeable = False
        self.slopes = slopes
        self.offsets = offsets

    @classmethod
    def from_pieces(cls, pieces):
        return cls(np.stack([p.slope for p in pieces]),
                   np.array([p.offset for p in pieces]))

    @property
    def npieces(self):
        return self.slopes.shape[0]

    @property
    def dim(self):
        return self.slopes.shape[1]

    def pieces(self):
        return [AffineFunction(self.slopes[j].copy(), float(self.offsets[j]))
                for j in range(self.npieces)]

    def evaluate(self, x, chunk=None):
        """Envelope values at points (vectorized, chunked for large batches)."""
        pts = as_points(x, self.dim)
        if chunk is None:
            # keep the (chunk x npieces) score block around 32 MB
            chunk = max(1024, (1 << 22) // max(self.npieces, 1))
        out = np.empty(pts.shape[0])
        for s in range(0, pts.shape[0], chunk):
            block = pts[s:s + chunk]
            out[s:s + block.shape[0]] = np.max(
                block @ self.slopes.T + self.offsets, axis=1
            )
        return out

    def evaluate_with_index(self, x):
        """(values, argmax indices); ties resolve to the smallest index."""
        pts = as_points(x, self.dim)
        table = pts @ self.slopes.T + self.offsets
        idx = np.argmax(table, axis=1)
        return table[np.arange(pts.shape[0]), idx], idx

    def __call__(self, x):
        return self.evaluate(x)

    def compose_linear(self, t):
        """Envelope of x -> l(T x): slopes become T^t slope."""
        t = np.asarray(t, dtype=float)
        return PiecewiseAffineMax(self.slopes @ t, self.offsets.copy())

    def shifted(self, c):
        return PiecewiseAffineMax(self.slopes.copy(), self.offsets + float(c))

    # plain numeric text serialization: one row per piece, slope then offset
    def save_text(self, path):
        with open(path, "w") as fh:
            fh.write(f"# maxaffine pieces dim={self.dim} count={self.npieces}\n")
            for j in range(self.npieces):
                row = " ".join(f"{v:.17g}" for v in self.slopes[j])
                fh.write(f"{row} {self.offsets[j]:.17g}\n")

    @classmethod
    def load_text(cls, path):
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                rows.append([float(v) for v in line.split()])
        arr = np.asarray(rows, dtype=float)
        return cls(arr[:, :-1], arr[:, -1])


@dataclass(frozen=True)
class QuadraticForm:
    """Positive definite form q(y) = y . A y with cached Cholesky factor."""

    matrix: np.ndarray
    factor: np.ndarray  # lower-triangular L with A = L L^t
    det: float

    @classmethod
    def from_matrix(cls, a):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise MetricError("quadratic form matrix must be square")
        if not np.allclose(a, a.T, rtol=0, atol=1e-10 * max(1.0, np.abs(a).max())):
            raise MetricError("quadratic form matrix must be symmetric")
        sym = (a + a.T) / 2.0
        try:
            factor = np.linalg.cholesky(sym)
        except np.linalg.LinAlgError as exc:
            raise MetricError("quadratic form must be positive definite") from exc
        det = float(np.prod(np.diag(factor)) ** 2)
        sym.flags.writeable = False
        factor.flags.writeable = False
        return cls(matrix=sym, factor=factor, det=det)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, y):
        pts = as_points(y, self.dim)
        z = pts @ self.factor  # rows are L^t y
        return np.einsum("ij,ij->i", z, z)


# ---------------------------------------------------------------------------
# weights


class WeightFunction:
    """Positive weight omega(x, t) from a small serializable catalog.

    ``constant``   omega = value
    ``exp_neg_t``  omega = exp(-t)          (t is the function value)
    ``affine_x``   omega = offset + coeffs . x   (validated positive)
    """

    def __init__(self, catalog_id, params):
        self.catalog_id = catalog_id
        self.params = dict(params)
        if catalog_id == "constant":
            v = float(self.params.get("value", 1.0))
            if v <= 0:
                raise WeightError("constant weight must be positive")
            self.params = {"value": v}
        elif catalog_id == "exp_neg_t":
            self.params = {}
        elif catalog_id == "affine_x":
            coeffs = np.atleast_1d(np.asarray(self.params["coeffs"], dtype=float))
            offset = float(self.params.get("offset", 1.0))
            self.params = {"coeffs": coeffs.tolist(), "offset": offset}
        else:
            raise WeightError(f"unknown weight catalog id {catalog_id!r}")

    @classmethod
    def constant(cls, value=1.0):
        return cls("constant", {"value": value})

    @classmethod
    def exp_neg_t(cls):
        return cls("exp_neg_t", {})

    @classmethod
    def affine_x(cls, coeffs, offset=1.0):
        return cls("affine_x", {"coeffs": np.atleast_1d(coeffs).tolist(),
                                "offset": offset})

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg["catalog_id"], cfg.get("parameters", {}))

    def to_config(self):
        return {"catalog_id": self.catalog_id, "parameters": dict(self.params)}

    def __call__(self, x, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.catalog_id == "constant":
            return np.full(t.shape, self.params["value"])
        if self.catalog_id == "exp_neg_t":
            return np.exp(-t)
        coeffs = np.asarray(self.params["coeffs"], dtype=float)
        pts = as_points(x, coeffs.size)
        return self.params["offset"] + pts @ coeffs

    def validate_positive(self, domain):
        """Raise WeightError when the weight can reach <= 0 on the domain."""
        if self.catalog_id in ("constant", "exp_neg_t"):
            return
        coeffs = np.asarray(self.params["coeffs"], dtype=float)
        lo, hi = domain.bounding_box()
        corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), axis=-1)
        corners = corners.reshape(-1, coeffs.size)
        vals = self.params["offset"] + corners @ coeffs
        if np.min(vals) <= 0:
            raise WeightError("affine weight is non-positive somewhere on the domain")


# ---------------------------------------------------------------------------
# smooth convex function catalog


class SmoothConvexFunction:
    """Convex function on a compact domain with exact derivatives.

    Instances come from :func:`catalog_entry`; they carry their catalog id
    and parameters so they serialize, plus a sound (not tight) upper bound
    on the gradient norm over the domain.
    """

    def __init__(self, catalog_id, params, domain, value_fn, grad_fn, hess_fn,
                 lipschitz_bound, strictly_convex=True):
        self.catalog_id = catalog_id
        self.params = params
        self.domain = domain
        self._value = value_fn
        self._grad = grad_fn
        self._hess = hess_fn
        self.lipschitz_bound = float(lipschitz_bound)
        self.strictly_convex = bool(strictly_convex)

    @property
    def dim(self):
        return self.domain.dim

    def value(self, x):
        return self._value(as_points(x, self.dim))

    def gradient(self, x):
        return self._grad(as_points(x, self.dim))

    def hessian(self, x):
        return self._hess(as_points(x, self.dim))

    def value_at(self, x):
        return float(self.value(x)[0])

    def hessian_det(self, x):
        h = self.hessian(x)
        if self.dim == 1:
            return h[:, 0, 0]
        if self.dim == 2:
            return h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0]
        return np.linalg.det(h)

    def restricted_to(self, domain):
        if domain.dim != self.dim:
            raise DomainError("restriction must preserve dimension")
        return catalog_entry(self.catalog_id, self.params, domain)

    def with_offset(self, c):
        params = dict(self.params)
        params["offset"] = params.get("offset", 0.0) + float(c)
        return catalog_entry(self.catalog_id, params, self.domain)

    def to_config(self):
        return {"catalog_id": self.catalog_id,
                "parameters": json.loads(json.dumps(self.params)),
                "domain": self.domain.to_config()}

    @classmethod
    def from_config(cls, cfg):
        return catalog_entry(cfg["catalog_id"], cfg.get("parameters", {}),
                             Domain.from_config(cfg["domain"]))

    def __repr__(self):
        return f"SmoothConvexFunction({self.catalog_id}, dim={self.dim})"


def _corner_max(domain, fn):
    lo, hi = domain.bounding_box()
    corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), axis=-1)
    return float(np.max(fn(corners.reshape(-1, lo.size))))


def catalog_entry(catalog_id, params, domain):
    """Build a catalog function on ``domain``.

    ids and parameters (all optional keys have defaults):

    ``quadratic``   hessian H (n x n SPD or zero), linear b, offset c:
                    f = x.Hx/2 + b.x + c
    ``cosh_quadratic``  hessian H, eps, freq: f = x.Hx/2 + eps*sum cosh(freq*x_i)
    ``exp_sum``     alpha (n,), mu: f = sum exp(alpha_i x_i) + mu |x|^2
    ``quartic``     eps: f = |x|^4/4 + eps |x|^2/2  (eps=0 degenerates at 0)
    ``huber``       delta: f = sum of per-coordinate quadratic/linear glue;
                    C^{1,1} stress entry, Hessian flattens to 0 outside a box
    """
    n = domain.dim
    params = dict(params)
    offset = float(params.get("offset", 0.0))

    if catalog_id == "quadratic":
        h = np.atleast_2d(np.asarray(params.get("hessian",
                                                np.eye(n)), dtype=float))
        b = np.atleast_1d(np.asarray(params.get("linear",
                                                np.zeros(n)), dtype=float))
        if h.shape != (n, n) or b.shape != (n,):
            raise ValueError("quadratic catalog entry has mismatched shapes")
        h = (h + h.T) / 2.0
        eig = np.linalg.eigvalsh(h)
        strictly = bool(eig.min() > 0)

        def value(x):
            return 0.5 * np.einsum("ij,jk,ik->i", x, h, x) + x @ b + offset

        def grad(x):
            return x @ h + b

        def hess(x):
            return np.broadcast_to(h, (x.shape[0], n, n)).copy()

        lip = _corner_max(domain, lambda x: np.linalg.norm(x @ h + b, axis=1))
        stored = {"hessian": h.tolist(), "linear": b.tolist(), "offset": offset}
        return SmoothConvexFunction("quadratic", stored, domain, value, grad,
                                    hess, lip, strictly)

    if catalog_id == "cosh_quadratic":
        h = np.atleast_2d(np.asarray(params.get("hessian",
                                                np.zeros((n, n))), dtype=float))
        eps = float(params.get("eps", 1.0))
        freq = float(params.get("freq", 1.0))
        if eps < 0:
            raise ValueError("cosh_quadratic needs eps >= 0")
        h = (h + h.T) / 2.0
        base_eig = np.linalg.eigvalsh(h).min()
        strictly = bool(base_eig > 0 or eps > 0)

        def value(x):
            quad = 0.5 * np.einsum("ij,jk,ik->i", x, h, x)
            return quad + eps * np.sum(np.cosh(freq * x), axis=1) + offset

        def grad(x):
            return x @ h + eps * freq * np.sinh(freq * x)

        def hess(x):
            out = np.broadcast_to(h, (x.shape[0], n, n)).copy()
            idx = np.arange(n)
            out[:, idx, idx] += eps * freq ** 2 * np.cosh(freq * x)
            return out

        lip = _corner_max(
            domain,
            lambda x: np.linalg.norm(x @ h, axis=1)
            + eps * freq * np.linalg.norm(np.sinh(freq * x), axis=1),
        )
        stored = {"hessian": h.tolist(), "eps": eps, "freq": freq, "offset": offset}
        return SmoothConvexFunction("cosh_quadratic", stored, domain, value,
                                    grad, hess, lip, strictly)

    if catalog_id == "exp_sum":
        alpha = np.atleast_1d(np.asarray(params.get("alpha",
                                                    np.full(n, 0.5)), dtype=float))
        mu = float(params.get("mu", 0.5))
        if alpha.shape != (n,):
            raise ValueError("exp_sum alpha must have one entry per axis")
        if mu < 0:
            raise ValueError("exp_sum needs mu >= 0")
        strictly = bool(mu > 0 or np.all(alpha != 0))

        def value(x):
            return (np.sum(np.exp(alpha * x), axis=1)
                    + mu * np.einsum("ij,ij->i", x, x) + offset)

        def grad(x):
            return alpha * np.exp(alpha * x) + 2.0 * mu * x

        def hess(x):
            out = np.zeros((x.shape[0], n, n))
            idx = np.arange(n)
            out[:, idx, idx] = alpha ** 2 * np.exp(alpha * x) + 2.0 * mu
            return out

        lip = _corner_max(
            domain,
            lambda x: np.linalg.norm(alpha * np.exp(alpha * x) + 2 * mu * x, axis=1),
        )
        stored = {"alpha": alpha.tolist(), "mu": mu, "offset": offset}
        return SmoothConvexFunction("exp_sum", stored, domain, value, grad,
                                    hess, lip, strictly)

    if catalog_id == "quartic":
        eps = float(params.get("eps", 0.5))
        if eps < 0:
            raise ValueError("quartic needs eps >= 0")

        def value(x):
            r2 = np.einsum("ij,ij->i", x, x)
            return 0.25 * r2 ** 2 + 0.5 * eps * r2 + offset

        def grad(x):
            r2 = np.einsum("ij,ij->i", x, x)
            return (r2 + eps)[:, None] * x

        def hess(x):
            r2 = np.einsum("ij,ij->i", x, x)
            eye = np.broadcast_to(np.eye(n), (x.shape[0], n, n))
            return ((r2 + eps)[:, None, None] * eye
                    + 2.0 * np.einsum("ij,ik->ijk", x, x))

        lip = _corner_max(
            domain,
            lambda x: (np.einsum("ij,ij->i", x, x) + eps)
            * np.sqrt(np.einsum("ij,ij->i", x, x)),
        )
        stored = {"eps": eps, "offset": offset}
        return SmoothConvexFunction("quartic", stored, domain, value, grad,
                                    hess, lip, strictly_convex=eps > 0)

    if catalog_id == "huber":
        delta = float(params.get("delta", 0.5))
        if delta <= 0:
            raise ValueError("huber needs delta > 0")

        def value(x):
            a = np.abs(x)
            per = np.where(a <= delta, 0.5 * x * x,
                           delta * a - 0.5 * delta * delta)
            return np.sum(per, axis=1) + offset

        def grad(x):
            return np.clip(x, -delta, delta)

        def hess(x):
            out = np.zeros((x.shape[0], n, n))
            idx = np.arange(n)
            out[:, idx, idx] = (np.abs(x) < delta).astype(float)
            return out

        lip = delta * np.sqrt(n)
        stored = {"delta": delta, "offset": offset}
        return SmoothConvexFunction("huber", stored, domain, value, grad,
                                    hess, lip, strictly_convex=False)

    raise ValueError(f"unknown catalog id {catalog_id!r}")


# ---------------------------------------------------------------------------
# operations


def tangent_plane(f, a):
    """Supporting tangent plane of f at interior point a."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if not bool(f.domain.contains(a)[0]):
        raise DomainError("tangency point lies outside the domain")
    g = f.gradient(a)[0]
    beta = f.value_at(a) - float(g @ a)
    return AffineFunction(slope=g.copy(), offset=beta)


def eval_pwmax(l, x):
    """Value of the envelope at a single point (ties go to the smallest piece)."""
    return float(l.evaluate(np.atleast_1d(np.asarray(x, dtype=float)))[0])


def taylor_gap(f, a, x):
    """f(x) minus the tangent at a, evaluated at x (nonnegative by convexity)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not bool(f.domain.contains(x)[0]):
        raise DomainError("evaluation point lies outside the domain")
    psi = tangent_plane(f, a)
    return float(f.value(x)[0] - psi(x)[0])


def is_circumscribed(f, l, samples, tol=1e-12):
    """Check l <= f on the samples.  Returns (ok, max violation)."""
    pts = as_points(samples, f.dim)
    viol = l.evaluate(pts) - f.value(pts)
    worst = float(np.max(viol)) if viol.size else 0.0
    return (worst <= tol, max(worst, 0.0))


def max_violation(f, l, samples):
    """Signed max of l - f over the samples (negative = strictly below)."""
    pts = as_points(samples, f.dim)
    if pts.shape[0] == 0:
        raise ValueError("need at least one sample point")
    return float(np.max(l.evaluate(pts) - f.value(pts)))


def sup_gap(f, l, samples):
    """Max of f - l over the samples (sup-norm gap on the probe set)."""
    pts = as_points(samples, f.dim)
    if pts.shape[0] == 0:
        raise ValueError("need at least one sample point")
    return float(np.max(f.value(pts) - l.evaluate(pts)))


def hessian_fd_check(f, x, h=1e-5):
    """Max abs difference between the analytic Hessian and central differences.

    Raises DomainError when the stencil exits the domain.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    stencil = [x]
    for i in range(n):
        for j in range(n):
            if i == j:
                stencil += [x + h * _e(i, n), x - h * _e(i, n)]
            else:
                for si in (1, -1):
                    for sj in (1, -1):
                        stencil.append(x + h * si * _e(i, n) + h * sj * _e(j, n))
    if not np.all(f.domain.contains(np.stack(stencil))):
        raise DomainError("finite difference stencil exits the domain")

    fd = np.empty((n, n))
    f0 = f.value_at(x)
    for i in range(n):
        ei = _e(i, n)
        fd[i, i] = (f.value_at(x + h * ei) - 2 * f0 + f.value_at(x - h * ei)) / h ** 2
        for j in range(i + 1, n):
            ej = _e(j, n)
            fd[i, j] = fd[j, i] = (
                f.value_at(x + h * ei + h * ej)
                - f.value_at(x + h * ei - h * ej)
                - f.value_at(x - h * ei + h * ej)
                + f.value_at(x - h * ei - h * ej)
            ) / (4 * h ** 2)
    return float(np.max(np.abs(fd - f.hessian(x)[0])))


def _e(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v
