"""Weighted point quantization under a quadratic-form metric.

quantize() minimizes, over point sets S of size m,

    integral over the region of  min_{s in S} q(x - s)^p  rho(x) dx

with q a fixed SPD quadratic form.  The integral is represented by a fixed
Monte Carlo cloud drawn from rho once per restart; Lloyd iterations then
alternate nearest-point assignment (in the whitened metric, where q is the
squared Euclidean norm) with per-cell minimization.  For p = 1 the cell
minimizer is the mean; for p = 2 it is found by damped Newton steps on the
quartic cell objective, assembled from cell moments so no extra passes
over the cloud are needed; other exponents fall back to damped
reweighted-mean steps.  The empirical objective is monotone across
iterations by construction and this is asserted.

Everything is deterministic for a fixed seed; restarts use independent,
reproducible substreams.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .convex_core import MetricError, QuadraticForm

log = logging.getLogger(__name__)


@dataclass
class QuantizerConfig:
    m: int
    p: float = 1.0
    metric: QuadraticForm | None = None  # None = identity
    max_iterations: int = 200
    tol: float = 1e-8
    restarts: int = 1
    seed: int = 0
    cloud_size: int | None = None  # None = max(20000, 200 m)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one point")
        if self.p <= 0:
            raise ValueError("exponent p must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class PointSet:
    points: np.ndarray
    objective: float
    iterations_used: int
    converged: bool
    objective_history: list = field(default_factory=list, repr=False)


def whiten(q):
    """Return W = L^t with q(y) = |W y|^2, from the Cholesky factor of q."""
    if not isinstance(q, QuadraticForm):
        q = QuadraticForm.from_matrix(q)
    return q.factor.T.copy()


def _draw_cloud(region, density, count, rng):
    """Cloud distributed as rho plus the exact/estimated total mass of rho.

    density=None means uniform on the region; then the mass is the exact
    region volume (for boxes/balls) so the objective has no normalization
    noise.  Otherwise rejection sampling against the bounding box is used
    and the mass is estimated from the acceptance rate.
    """
    lo, hi = region.bounding_box()
    box_vol = float(np.prod(hi - lo))
    if density is None:
        pts = region.sample(rng, count)
        return pts, region.volume() if region.kind != "polytope" else None

    # envelope constant from a probe lattice, with headroom
    probe = lo + rng.random((4096, region.dim)) * (hi - lo)
    pvals = np.asarray(density(probe), dtype=float)
    if np.any(pvals < 0):
        raise ValueError("density must be nonnegative")
    bound = float(pvals.max())
    if bound <= 0:
        raise ValueError("density is zero over the probe sample; region carries no mass")
    bound *= 1.5

    pts = np.empty((count, region.dim))
    got = proposed = accepted = 0
    while got < count:
        batch = lo + rng.random((max(4 * count, 4096), region.dim)) * (hi - lo)
        vals = np.asarray(density(batch), dtype=float)
        inside = region.contains(batch) if region.kind != "box" else np.ones(len(batch), bool)
        vals = np.where(inside, vals, 0.0)
        vmax = vals.max() if vals.size else 0.0
        if vmax > bound:  # envelope was too low; restart with more headroom
            bound = 1.5 * vmax
            got = proposed = accepted = 0
            continue
        keep = rng.random(len(batch)) * bound < vals
        proposed += len(batch)
        accepted += int(keep.sum())
        sel = batch[keep]
        take = min(count - got, sel.shape[0])
        pts[got:got + take] = sel[:take]
        got += take
        if proposed > 1000 * count:
            raise ValueError("density appears to be (almost) everywhere zero")
    mass = box_vol * bound * accepted / proposed
    return pts, mass


def _fps_select(cloud_w, m, rng):
    """Greedy farthest-point selection of m rows of the whitened cloud."""
    n = cloud_w.shape[0]
    chosen = np.empty(m, dtype=int)
    chosen[0] = rng.integers(n)
    d2 = np.einsum("ij,ij->i", cloud_w - cloud_w[chosen[0]],
                   cloud_w - cloud_w[chosen[0]])
    for k in range(1, m):
        chosen[k] = int(np.argmax(d2))
        diff = cloud_w - cloud_w[chosen[k]]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return cloud_w[chosen].copy()


def _cell_stats_p2(cloud_w, idx, m, dim):
    """Moments per cell needed for the quartic (p=2) cell objective."""
    ones = np.ones(cloud_w.shape[0])
    r2 = np.einsum("ij,ij->i", cloud_w, cloud_w)
    count = np.bincount(idx, weights=ones, minlength=m)
    s1 = np.stack([np.bincount(idx, weights=cloud_w[:, k], minlength=m)
                   for k in range(dim)], axis=1)
    s2 = np.empty((m, dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            mom = np.bincount(idx, weights=cloud_w[:, a] * cloud_w[:, b], minlength=m)
            s2[:, a, b] = s2[:, b, a] = mom
    s3 = np.stack([np.bincount(idx, weights=r2 * cloud_w[:, k], minlength=m)
                   for k in range(dim)], axis=1)
    s2tr = np.bincount(idx, weights=r2, minlength=m)
    s4 = np.bincount(idx, weights=r2 * r2, minlength=m)
    return count, s1, s2, s3, s2tr, s4


def _p2_value(s, count, s1, s2, s3, s2tr, s4):
    """Sum over the cell of |z - s|^4, from moments (vectorized over cells)."""
    ss = np.einsum("ij,ij->i", s, s)
    return (s4
            - 4.0 * np.einsum("ij,ij->i", s3, s)
            + 2.0 * s2tr * ss
            + 4.0 * np.einsum("ij,ijk,ik->i", s, s2, s)
            - 4.0 * ss * np.einsum("ij,ij->i", s1, s)
            + count * ss * ss)


def _p2_cell_update(start, count, s1, s2, s3, s2tr, s4, steps=20):
    """Damped Newton on the per-cell quartic objective, vectorized over cells."""
    m, dim = start.shape
    s = start.copy()
    val = _p2_value(s, count, s1, s2, s3, s2tr, s4)
    eye = np.eye(dim)
    for _ in range(steps):
        ss = np.einsum("ij,ij->i", s, s)
        s1s = np.einsum("ij,ij->i", s1, s)
        grad = (8.0 * np.einsum("ijk,ik->ij", s2, s)
                + 4.0 * count[:, None] * ss[:, None] * s
                - 4.0 * s3
                + 4.0 * s2tr[:, None] * s
                - 8.0 * s1s[:, None] * s
                - 4.0 * ss[:, None] * s1)
        hess = (8.0 * s2
                + 4.0 * count[:, None, None]
                * (ss[:, None, None] * eye + 2.0 * np.einsum("ij,ik->ijk", s, s))
                + 4.0 * s2tr[:, None, None] * eye
                - 8.0 * (np.einsum("ij,ik->ijk", s1, s)
                         + np.einsum("ij,ik->ijk", s, s1)
                         + s1s[:, None, None] * eye))
        # regularize any non-PD cell Hessian toward gradient descent
        tr = np.trace(hess, axis1=1, axis2=2) / dim
        hess = hess + 1e-12 * np.maximum(tr, 1.0)[:, None, None] * eye
        try:
            step = np.linalg.solve(hess, grad[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = grad / np.maximum(tr, 1e-30)[:, None]
        improved = np.zeros(m, dtype=bool)
        for alpha in (1.0, 0.5, 0.25, 0.05):
            trial = np.where(improved[:, None], s, s - alpha * step)
            tval = _p2_value(trial, count, s1, s2, s3, s2tr, s4)
            better = (~improved) & (tval < val - 1e-15 * np.abs(val))
            s = np.where(better[:, None], trial, s)
            val = np.where(better, tval, val)
            improved |= better
        if not improved.any():
            break
    return s, val


def _assign(cloud_w, centers_w):
    if centers_w.shape[1] == 1:
        # on a line the Voronoi cells are intervals between midpoints
        order = np.argsort(centers_w[:, 0], kind="stable")
        c = centers_w[order, 0]
        idx = order[np.searchsorted(0.5 * (c[1:] + c[:-1]), cloud_w[:, 0])]
        return np.abs(cloud_w[:, 0] - centers_w[idx, 0]), idx
    tree = cKDTree(centers_w)
    dist, idx = tree.query(cloud_w, k=1)
    return np.asarray(dist), np.asarray(idx)


def _project_into(region, pts):
    if region.kind == "box":
        lo, hi = region.bounding_box()
        return np.clip(pts, lo, hi)
    if region.kind == "ball":
        c = region.centroid()
        r = region._data["radius"]
        d = pts - c
        norms = np.linalg.norm(d, axis=1)
        scale = np.where(norms > r, r / np.maximum(norms, 1e-300), 1.0)
        return c + d * scale[:, None]
    lo, hi = region.bounding_box()
    return np.clip(pts, lo, hi)


def quantize(region, density, config, _cloud=None):
    """Place config.m points minimizing the weighted q^p distortion.

    ``density`` is a vectorized callable (or None for uniform).  Returns
    the best :class:`PointSet` over ``config.restarts`` independent runs.
    All returned points lie inside the closed region.
    """
    if config.m >= 1 and region.dim < 1:
        raise ValueError("region must have positive dimension")
    metric = config.metric or QuadraticForm.from_matrix(np.eye(region.dim))
    if metric.dim != region.dim:
        raise MetricError("metric dimension does not match the region")
    w = whiten(metric)
    w_inv = np.linalg.inv(w)
    if config.cloud_size:
        cloud_size = config.cloud_size
    elif region.dim == 1:
        # 1D assignment is cheap, and interval Lloyd needs the extra
        # resolution: the converged points inherit the cloud's sampling
        # noise, which enters the distortion at second order per cell
        cloud_size = max(100_000, 1_000 * config.m)
    else:
        cloud_size = max(20_000, 200 * config.m)

    best = None
    for restart in range(config.restarts):
        rng = np.random.default_rng((config.seed, restart))
        if _cloud is not None:
            cloud, mass = np.asarray(_cloud, dtype=float), None
        else:
            cloud, mass = _draw_cloud(region, density, cloud_size, rng)
        if mass is None:
            mass = 1.0  # report the cloud average when no exact mass exists
            norm = 1.0 / cloud.shape[0]
        else:
            norm = mass / cloud.shape[0]
        cloud_w = cloud @ w.T

        if config.m == 1:
            centers = cloud_w.mean(axis=0, keepdims=True).copy()
        elif region.dim == 1:
            # Lloyd-Max companding start: equal-mass quantiles of the cloud.
            # On a line this is already near-optimal and sidesteps the very
            # slow one-cell-per-iteration information flow of plain Lloyd.
            qs = (np.arange(config.m) + 0.5) / config.m
            centers = np.quantile(cloud_w[:, 0], qs)[:, None]
        else:
            centers = _fps_select(cloud_w, config.m, rng)
        history = []
        converged = False
        it = 0
        prev = np.inf
        for it in range(1, config.max_iterations + 1):
            dist, idx = _assign(cloud_w, centers)
            cost = dist ** (2.0 * config.p)
            obj = float(np.sum(cost)) * norm
            if obj > prev * (1 + 1e-12) + 1e-300:
                raise RuntimeError(
                    "Lloyd objective increased; monotonicity contract broken")
            history.append(obj)
            scored = centers
            counts = np.bincount(idx, minlength=config.m)
            empty = np.flatnonzero(counts == 0)
            if empty.size:
                # re-seed each empty cell at a currently expensive sample
                log.debug("re-seeding %d empty cells", empty.size)
                order = np.argsort(cost)[::-1]
                centers[empty] = cloud_w[order[: empty.size]]
                prev = obj
                continue
            if prev - obj <= config.tol * max(abs(obj), 1e-300) and it > 1:
                converged = True
                break
            prev = obj

            if config.p == 1.0:
                sums = np.stack(
                    [np.bincount(idx, weights=cloud_w[:, k], minlength=config.m)
                     for k in range(region.dim)], axis=1)
                centers = sums / counts[:, None]
            elif config.p == 2.0:
                # work in cell-centered coordinates: raw moments of far-from-
                # origin cells cancel catastrophically (moments are O(1) while
                # the cell objective is O(width^4))
                sums = np.stack(
                    [np.bincount(idx, weights=cloud_w[:, k], minlength=config.m)
                     for k in range(region.dim)], axis=1)
                means = sums / counts[:, None]
                count, s1, s2, s3, s2tr, s4 = _cell_stats_p2(
                    cloud_w - means[idx], idx, config.m, region.dim)
                shift, _ = _p2_cell_update(
                    np.zeros_like(means), count, s1, s2, s3, s2tr, s4)
                centers = means + shift
            else:
                centers = _generic_cell_update(cloud_w, idx, config, counts,
                                               centers)
            # keep iterates inside the closed region (in original coordinates)
            centers = _project_into(region, centers @ w_inv.T) @ w.T

        if not converged:
            # score the final update so PointSet.objective always matches the
            # distortion of the returned points on the training cloud
            dist, _ = _assign(cloud_w, centers)
            obj = float(np.sum(dist ** (2.0 * config.p))) * norm
            if obj <= history[-1]:
                history.append(obj)
            else:  # round-off made the last step a wash; keep the scored one
                centers = scored

        result = PointSet(points=centers @ w_inv.T, objective=history[-1],
                          iterations_used=it, converged=converged,
                          objective_history=history)
        if best is None or result.objective < best.objective:
            best = result
    return best


def _generic_cell_update(cloud_w, idx, config, counts, centers, steps=20):
    """Damped reweighted-mean descent for exponents other than 1 and 2.

    Starts from the better of the incumbent center and the cell mean and
    accepts only improvements, so the cell objective never increases.
    """
    m, dim = config.m, cloud_w.shape[1]
    d = cloud_w - centers[idx]
    val = np.bincount(idx, weights=np.einsum("ij,ij->i", d, d) ** config.p,
                      minlength=m)
    sums = np.stack([np.bincount(idx, weights=cloud_w[:, k], minlength=m)
                     for k in range(dim)], axis=1)
    means = sums / np.maximum(counts, 1)[:, None]
    dm = cloud_w - means[idx]
    mval = np.bincount(idx, weights=np.einsum("ij,ij->i", dm, dm) ** config.p,
                       minlength=m)
    take = mval < val
    centers = np.where(take[:, None], means, centers)
    val = np.minimum(val, mval)
    for _ in range(steps):
        d = cloud_w - centers[idx]
        r2 = np.einsum("ij,ij->i", d, d)
        wgt = np.maximum(r2, 1e-300) ** (config.p - 1.0)
        wsum = np.bincount(idx, weights=wgt, minlength=m)
        target = np.stack(
            [np.bincount(idx, weights=wgt * cloud_w[:, k], minlength=m)
             for k in range(dim)], axis=1) / np.maximum(wsum, 1e-300)[:, None]
        moved = False
        for alpha in (1.0, 0.5, 0.25):
            trial = centers + alpha * (target - centers)
            dt = cloud_w - trial[idx]
            tval = np.bincount(idx,
                               weights=np.einsum("ij,ij->i", dt, dt) ** config.p,
                               minlength=m)
            accept = tval < val - 1e-15 * np.abs(val)
            if accept.any():
                centers = np.where(accept[:, None], trial, centers)
                val = np.where(accept, tval, val)
                moved = True
                break
        if not moved:
            break
    return centers


def quantizer_objective(region, density, q, p, points, sample_spec):
    """Independent estimate of the distortion of a fixed point set.

    ``sample_spec`` is a QuadratureSpec; monte_carlo draws a fresh cloud
    from rho (standard error reported), tensor_grid uses deterministic
    nodes weighted by rho.
    """
    from .quadrature import ErrorReport, tensor_nodes

    if not isinstance(q, QuadraticForm):
        q = QuadraticForm.from_matrix(q)
    w = whiten(q)
    pts_w = np.asarray(points, dtype=float) @ w.T

    def min_cost(x):
        dist, _ = _assign(x @ w.T, pts_w)
        return dist ** (2.0 * p)

    if sample_spec.kind == "monte_carlo":
        rng = np.random.default_rng(sample_spec.seed)
        cloud, mass = _draw_cloud(region, density, sample_spec.samples, rng)
        vals = min_cost(cloud)
        if mass is None:
            mass, scale = 1.0, 1.0
        else:
            scale = mass
        value = scale * float(np.mean(vals))
        se = scale * float(np.std(vals)) / np.sqrt(len(vals))
        return ErrorReport(value=value, error_bar=se, nodes_used=len(vals))

    lo, hi = region.bounding_box()
    nodes, weights = tensor_nodes(lo, hi, sample_spec.level)
    rho = np.ones(len(nodes)) if density is None else np.asarray(density(nodes))
    if region.kind != "box":
        rho = np.where(region.contains(nodes), rho, 0.0)
    value = float(np.dot(weights * rho, min_cost(nodes)))
    return ErrorReport(value=value, error_bar=np.nan, nodes_used=len(nodes))


def brute_force_1d(m, p, grid_resolution=1e-4, interval=(0.0, 1.0)):
    """Globally optimal 1-d quantizer of the uniform density, by nested search.

    Points live on a grid that is refined around the incumbent until the
    spacing drops below ``grid_resolution``; within each stage the sorted
    point tuple is optimized exactly by dynamic programming over cell
    boundaries (cells of an optimal 1-d quantizer are intervals and the
    in-cell optimum is the midpoint).  Guarantees the global optimum to
    O(grid spacing).  Only small m is supported.
    """
    if m > 4:
        raise ValueError("brute force quantizer is limited to m <= 4")
    if m < 1:
        raise ValueError("need at least one point")
    a, b = float(interval[0]), float(interval[1])

    def cell_cost(width):
        # integral over a cell of |x - midpoint|^{2p}
        return (width / 2.0) ** (2 * p + 1) * 2.0 / (2 * p + 1)

    def dp(lo, hi, levels):
        # boundaries on a grid; DP over m cells
        edges = np.linspace(lo, hi, levels)
        npts = len(edges)
        # best[j][i] = optimal cost of covering [a, edges[i]] with j cells
        widths = edges[None, :] - edges[:, None]  # widths[i, k] = e_k - e_i
        costs = np.where(widths > 0, cell_cost(np.abs(widths)), np.inf)
        best = np.full((m + 1, npts), np.inf)
        arg = np.zeros((m + 1, npts), dtype=int)
        best[0, 0] = 0.0
        for j in range(1, m + 1):
            tot = best[j - 1][:, None] + costs
            arg[j] = np.argmin(tot, axis=0)
            best[j] = tot[arg[j], np.arange(npts)]
        # recover boundaries ending at b
        bounds = [npts - 1]
        for j in range(m, 0, -1):
            bounds.append(arg[j, bounds[-1]])
        bounds = edges[np.array(bounds[::-1])]
        pts = (bounds[:-1] + bounds[1:]) / 2.0
        return pts, float(best[m, npts - 1])

    pts, obj = dp(a, b, 513)
    # nested refinement: the objective is a convex function of the sorted
    # cell boundaries (cell costs are convex in the width), so coordinate
    # sweeps over progressively finer local grids reach the global optimum
    # to within the final spacing
    bounds = np.concatenate([[a], (pts[:-1] + pts[1:]) / 2.0, [b]])
    spacing = (b - a) / 512
    while spacing > grid_resolution / 4 and m > 1:
        for _ in range(4):  # sweeps at this resolution
            for i in range(1, m):
                lo = max(bounds[i - 1], bounds[i] - 16 * spacing)
                hi = min(bounds[i + 1], bounds[i] + 16 * spacing)
                cand = np.linspace(lo, hi, 33)
                tot = cell_cost(cand - bounds[i - 1]) + cell_cost(bounds[i + 1] - cand)
                bounds[i] = cand[np.argmin(tot)]
        spacing /= 8.0
    pts = (bounds[:-1] + bounds[1:]) / 2.0
    obj = float(np.sum(cell_cost(np.diff(bounds))))
    return PointSet(points=pts.reshape(-1, 1), objective=obj,
                    iterations_used=0, converged=True)
