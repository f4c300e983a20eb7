"""Quadrature engines shared by the functional and error integrals.

Three kinds are supported, selected by :class:`QuadratureSpec`:

``tensor_grid``
    Composite tensor-product Gauss-Legendre over the bounding box of the
    region (panels per axis = ``level``).  Non-box regions are handled by
    multiplying the integrand with the region indicator.  The error bar is
    a panel-refinement delta (recompute at half the panel count).

``monte_carlo``
    Stratified jittered sampling over the bounding box on a 2^k per-axis
    panel grid, with the usual stratified standard error.

``exact_1d``
    Reserved for 1-d integrands that the caller can integrate cell by
    cell; :func:`integrate` maps it to adaptive Gauss-Kronrod quadrature
    (``scipy.integrate.quad``), which is exact to tolerance for the smooth
    integrands the functional layer produces.

All reductions run single threaded with numpy pairwise summation, so a
fixed spec and seed give bit-stable results.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate as _sp_integrate

_VALID_KINDS = ("exact_1d", "tensor_grid", "monte_carlo")


@dataclass(frozen=True)
class QuadratureSpec:
    """How an integral should be evaluated.

    Parameters
    ----------
    kind : str
        One of ``exact_1d``, ``tensor_grid``, ``monte_carlo``.
    level : int
        Panels per axis for ``tensor_grid`` (>= 2).
    samples : int
        Sample budget for ``monte_carlo`` (>= 1000).
    seed : int
        Seed for the stochastic kinds.
    rel_tol : float
        Target relative tolerance; when the achieved error bar exceeds it
        the result is still returned (with the honest error bar).
    """

    kind: str = "tensor_grid"
    level: int = 64
    samples: int = 1_000_000
    seed: int = 0
    rel_tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in _VALID_KINDS:
            raise ValueError(
                f"unknown quadrature kind {self.kind!r}; expected one of {_VALID_KINDS}"
            )
        if self.level < 2:
            raise ValueError("tensor_grid level must be >= 2")
        if self.samples < 1000:
            raise ValueError("monte_carlo samples must be >= 1000")


@dataclass(frozen=True)
class ErrorReport:
    """Integral estimate with an honest uncertainty.

    ``error_bar`` is a standard error for stochastic kinds and a
    panel-refinement delta for deterministic ones.
    """

    value: float
    error_bar: float
    nodes_used: int


def _composite_gl_axis(lo, hi, panels, order):
    """Composite Gauss-Legendre nodes/weights on [lo, hi] with `panels` panels."""
    x, w = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    h = (edges[1:] - edges[:-1]) / 2.0
    mid = (edges[1:] + edges[:-1]) / 2.0
    nodes = (mid[:, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def tensor_nodes(lower, upper, level, order=None):
    """Tensor-product composite Gauss-Legendre nodes on a box.

    Returns (nodes, weights) with nodes of shape (N, n).  The per-panel
    order defaults to 4 in one dimension and 2 otherwise, which keeps the
    node count at ``(order*level)**n``.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    n = lower.size
    if order is None:
        order = 4 if n == 1 else 2
    axes = [_composite_gl_axis(lower[k], upper[k], level, order) for k in range(n)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    weights = np.ones(nodes.shape[0])
    for wg in wgrids:
        weights = weights * wg.ravel()
    return nodes, weights


def stratified_nodes(lower, upper, samples, rng):
    """Jittered stratified sample of a box over a 2^k per-axis panel grid.

    Returns (nodes, strata_index, per_stratum) where strata_index labels
    samples by stratum so callers can form the stratified variance.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    n = lower.size
    k = 0
    # largest power of two with at least ~4 samples per stratum
    while (2 ** (k + 1)) ** n * 4 <= samples:
        k += 1
    s = 2 ** k
    per = max(1, samples // s ** n)
    cells = np.stack(
        np.meshgrid(*[np.arange(s)] * n, indexing="ij"), axis=-1
    ).reshape(-1, n)
    base = np.repeat(cells, per, axis=0).astype(float)
    u = rng.random(base.shape)
    unit = (base + u) / s
    nodes = lower + unit * (upper - lower)
    idx = np.repeat(np.arange(s ** n), per)
    return nodes, idx, per


def integrate(func, domain, spec):
    """Integrate ``func`` (vectorized over (N, n) points) over ``domain``.

    ``domain`` is a :class:`maxaffine.convex_core.Domain`.  Points outside
    non-box domains contribute zero through the indicator.
    """
    lower, upper = domain.bounding_box()
    n = lower.size
    vol = float(np.prod(upper - lower))

    def masked(x):
        vals = np.asarray(func(x), dtype=float)
        if domain.kind != "box":
            vals = np.where(domain.contains(x), vals, 0.0)
        return vals

    if spec.kind == "exact_1d":
        if n != 1:
            raise ValueError("exact_1d quadrature is only defined in one dimension")
        val, err = _sp_integrate.quad(
            lambda t: float(masked(np.array([[t]]))[0]),
            float(lower[0]),
            float(upper[0]),
            epsabs=1e-14,
            epsrel=min(spec.rel_tol, 1e-12),
            limit=200,
        )
        return ErrorReport(value=float(val), error_bar=float(err), nodes_used=0)

    if spec.kind == "tensor_grid":
        nodes, weights = tensor_nodes(lower, upper, spec.level)
        fine = float(np.dot(weights, masked(nodes)))
        c_level = max(2, spec.level // 2)
        cnodes, cweights = tensor_nodes(lower, upper, c_level)
        coarse = float(np.dot(cweights, masked(cnodes)))
        return ErrorReport(
            value=fine,
            error_bar=abs(fine - coarse),
            nodes_used=nodes.shape[0] + cnodes.shape[0],
        )

    # monte_carlo
    rng = np.random.default_rng(spec.seed)
    nodes, idx, per = stratified_nodes(lower, upper, spec.samples, rng)
    vals = masked(nodes)
    nstrata = idx[-1] + 1
    value = vol * float(np.mean(vals))
    if per >= 2:
        sums = np.bincount(idx, weights=vals, minlength=nstrata)
        sqs = np.bincount(idx, weights=vals * vals, minlength=nstrata)
        var_within = (sqs - sums ** 2 / per) / (per - 1)
        var_mean = float(np.sum(var_within / per)) / nstrata ** 2
        se = vol * np.sqrt(max(var_mean, 0.0))
    else:
        se = vol * float(np.std(vals)) / np.sqrt(len(vals))
    return ErrorReport(value=value, error_bar=float(se), nodes_used=len(vals))
