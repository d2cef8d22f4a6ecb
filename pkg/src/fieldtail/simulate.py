"""Monte Carlo estimation of the tail probability of the score-field maximum.

Each iteration draws an independent standardized Bernoulli field, maximizes
the score surface over the parameter square (coarse grid scan, then damped
preconditioned ascent from the best grid points), and the exceedance
frequency over each threshold estimates the tail probability.
"""
from dataclasses import dataclass, field
import math
import multiprocessing
import time

import numpy as np

from .errors import DegeneracyError
from .families import FamilySpec
from .functionals import STANDARDIZED, FieldContext, score_grad
from .geometry import Grid, kernel_values
from .numerics import solve2

_ACTIVE_EPS = 1e-12


def default_coarse_cells(D):
    """Cells per axis for the coarse scan. The kernel correlation length
    shrinks like 1/sqrt(D), so the grid must keep up or ridges get skipped."""
    return max(32, math.ceil(4.0 * math.sqrt(D)))


@dataclass(frozen=True)
class SimConfig:
    m: int
    D: float
    p0: float = 0.1
    thresholds: tuple = ()
    iterations: int = 5000
    seed: int = 0
    coarse_grid: int | None = None
    max_steps: int = 50
    step_tol: float = 1e-8
    top_k: int = 5
    convention: str = STANDARDIZED

    def __post_init__(self):
        th = tuple(float(x) for x in self.thresholds)
        object.__setattr__(self, "thresholds", th)
        if not th:
            raise ValueError("at least one threshold is required")
        if list(th) != sorted(th):
            raise ValueError("thresholds must be ascending")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        cells = self.coarse_grid if self.coarse_grid is not None else default_coarse_cells(self.D)
        if cells < 2:
            raise ValueError("coarse grid needs at least 2 cells per axis")
        object.__setattr__(self, "coarse_grid", int(cells))

    def build_context(self):
        return FieldContext(
            Grid(self.m), FamilySpec.bernoulli(self.p0), self.D,
            tilt_convention=self.convention,
        )


@dataclass
class MaximizeResult:
    value: float           # refined supremum, never below the coarse one
    argmax: np.ndarray
    coarse_value: float
    coarse_argmax: np.ndarray
    converged: bool
    steps: int


@dataclass
class SimResult:
    thresholds: tuple
    counts: np.ndarray         # refined-maximum exceedances per threshold
    counts_coarse: np.ndarray  # grid-only exceedances, kept for comparison
    iterations: int
    seed: int
    sups: np.ndarray = field(repr=False)
    coarse_sups: np.ndarray = field(repr=False)
    wall_time: float = 0.0

    @property
    def p_hat(self):
        return self.counts / self.iterations

    @property
    def p_hat_coarse(self):
        return self.counts_coarse / self.iterations

    @property
    def se(self):
        p = self.p_hat
        return np.sqrt(p * (1.0 - p) / self.iterations)


def iteration_rng(seed, index):
    """Counter-based stream for one iteration; independent of scheduling."""
    return np.random.Generator(np.random.Philox(key=[seed, index]))


def sample_field(rng, n, p0):
    """Standardized Bernoulli field: (B - p0)/sqrt(p0 (1-p0)) per pixel."""
    b = rng.random(n) < p0
    s = math.sqrt(p0 * (1.0 - p0))
    return (b - p0) / s


def _coarse_scan(ctx, W, cells, chunk=2048):
    """Evaluate the score on a (cells+1)^2 grid, return values and the grid."""
    axis = np.arange(cells + 1) / cells
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    ts = np.column_stack([g1.ravel(), g2.ravel()])
    vals = np.empty(ts.shape[0])
    pts = ctx.grid.points
    for lo in range(0, ts.shape[0], chunk):
        sl = slice(lo, min(lo + chunk, ts.shape[0]))
        th, _, _ = kernel_values(pts, ts[sl, 0:1], ts[sl, 1:2], ctx.D, with_grad=False)
        info = np.sum(th * th, axis=1)
        vals[sl] = (th @ W) / np.sqrt(info)
    return vals, ts


def _precondition(ctx, t, g):
    """Ascent direction: gradient through the inverse local metric, with a
    plain gradient fallback if the metric is numerically singular here."""
    th, td1, td2 = ctx.kernel_at(t)
    info = np.sum(th * th)
    j1 = np.sum(th * td1)
    j2 = np.sum(th * td2)
    l11 = np.sum(td1 * td1) / info - (j1 / info) ** 2
    l12 = np.sum(td1 * td2) / info - j1 * j2 / info**2
    l22 = np.sum(td2 * td2) / info - (j2 / info) ** 2
    lam = np.array([[l11, l12], [l12, l22]])
    try:
        return solve2(lam, g), lam
    except DegeneracyError:
        return g.copy(), lam


def _project_active(t, d, lam, g):
    """Zero out directions that push through an active box face.

    For an active constraint with gradient gd (a coordinate axis here), the
    constrained step replaces inv(lam) g by
    (inv(lam) - inv(lam) gd gd' inv(lam) / <gd, inv(lam) gd>) g, which for an
    axis constraint is exactly the tangential step with the normal coordinate
    eliminated.
    """
    for k in range(2):
        at_low = t[k] <= _ACTIVE_EPS and d[k] < 0
        at_high = t[k] >= 1.0 - _ACTIVE_EPS and d[k] > 0
        if not (at_low or at_high):
            continue
        gd = np.zeros(2)
        gd[k] = 1.0
        try:
            lam_inv_gd = solve2(lam, gd)
            denom = lam_inv_gd[k]
            if denom <= 0:
                d[k] = 0.0
                continue
            d = d - lam_inv_gd * (d[k] / denom)
        except DegeneracyError:
            d[k] = 0.0
    return d


def maximize_score(ctx, W, config):
    """Two-phase global maximization of t -> Z(t) over the unit square."""
    W = np.asarray(W, dtype=float)
    vals, ts = _coarse_scan(ctx, W, config.coarse_grid)
    order = np.argsort(vals)[::-1][: config.top_k]
    coarse_best = float(vals[order[0]])
    coarse_arg = ts[order[0]].copy()

    best_val, best_arg = coarse_best, coarse_arg.copy()
    converged_all = True
    total_steps = 0
    for idx in order:
        t = ts[idx].copy()
        z, g = score_grad(ctx, t, W)
        converged = False
        for _ in range(config.max_steps):
            d, lam = _precondition(ctx, t, g)
            d = _project_active(t, d, lam, g)
            norm = math.hypot(d[0], d[1])
            if norm < config.step_tol:
                converged = True
                break
            step = d
            improved = False
            for _ in range(30):
                cand = np.clip(t + step, 0.0, 1.0)
                z_new, g_new = score_grad(ctx, cand, W)
                if z_new > z:
                    improved = True
                    break
                step = 0.5 * step
            if not improved:
                converged = True  # stationary to line-search resolution
                break
            moved = math.hypot(cand[0] - t[0], cand[1] - t[1])
            t, z, g = cand, z_new, g_new
            total_steps += 1
            if moved < config.step_tol:
                converged = True
                break
        converged_all = converged_all and converged
        if z > best_val:
            best_val, best_arg = float(z), t.copy()

    # refinement must never report less than the scan it started from
    if best_val < coarse_best:
        best_val, best_arg = coarse_best, coarse_arg.copy()
    return MaximizeResult(
        value=best_val, argmax=best_arg, coarse_value=coarse_best,
        coarse_argmax=coarse_arg, converged=converged_all, steps=total_steps,
    )


def _run_range(config, lo, hi):
    ctx = config.build_context()
    n = ctx.n
    sups = np.empty(hi - lo)
    coarse = np.empty(hi - lo)
    for i in range(lo, hi):
        rng = iteration_rng(config.seed, i)
        W = sample_field(rng, n, config.p0)
        res = maximize_score(ctx, W, config)
        sups[i - lo] = res.value
        coarse[i - lo] = res.coarse_value
    return lo, sups, coarse


def _run_range_star(args):
    return _run_range(*args)


def estimate_pvalues(config, workers=1, ctx=None):
    """Estimate the exceedance probability for every configured threshold.

    Iteration i's random stream depends only on (seed, i), and results are
    assembled by iteration index, so the outcome is bit-identical for any
    worker count. `ctx` may be supplied to reuse a context in the
    single-worker path; worker processes always build their own.
    """
    t0 = time.perf_counter()
    N = config.iterations
    sups = np.empty(N)
    coarse = np.empty(N)
    if workers <= 1:
        ctx = ctx if ctx is not None else config.build_context()
        n = ctx.n
        for i in range(N):
            rng = iteration_rng(config.seed, i)
            W = sample_field(rng, n, config.p0)
            res = maximize_score(ctx, W, config)
            sups[i] = res.value
            coarse[i] = res.coarse_value
    else:
        chunk = max(1, -(-N // (4 * workers)))
        ranges = [(config, lo, min(lo + chunk, N)) for lo in range(0, N, chunk)]
        with multiprocessing.Pool(workers) as pool:
            for lo, s_part, c_part in pool.imap_unordered(_run_range_star, ranges):
                sups[lo:lo + s_part.size] = s_part
                coarse[lo:lo + c_part.size] = c_part

    xs = np.asarray(config.thresholds)
    counts = np.sum(sups[:, None] >= xs[None, :], axis=0).astype(int)
    counts_coarse = np.sum(coarse[:, None] >= xs[None, :], axis=0).astype(int)
    return SimResult(
        thresholds=config.thresholds, counts=counts, counts_coarse=counts_coarse,
        iterations=N, seed=config.seed, sups=sups, coarse_sups=coarse,
        wall_time=time.perf_counter() - t0,
    )


def dump_sup_values(path, sups):
    """One supremum per line, full double precision, for offline re-thresholding."""
    with open(path, "w") as fh:
        for v in sups:
            fh.write(f"{float(v):.17g}\n")
