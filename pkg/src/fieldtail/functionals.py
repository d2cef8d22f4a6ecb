"""Score field and the local functionals entering the tail approximation.

For a grid of pixels u with kernel weights theta_u(t), the standardized score
at t is Z(t) = sum_u beta_u(t) W_u with beta_u = theta_u / sqrt(info(t)) and
info(t) = sum_u theta_u^2. This module computes Z, its t-gradient, the
gradient-covariance matrix, and the exponential-tilt corrections (delta, r,
sigma2) evaluated at tilt amplitude xi = x / sqrt(info(t)).
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError
from .families import FamilySpec, cumulant_triple
from .geometry import Grid, SignalParams, kernel_values

STANDARDIZED = "standardized"
RAW = "raw"

# positive-definiteness guards, relative to matrix scale where meaningful
_MIN_EIG = 1e-10
_DET_REL = 1e-14


class FieldContext:
    """Grid + family + kernel scale, with a one-slot kernel cache.

    The cache holds theta and its gradients for the most recent parameter
    point. Not shared across threads; workers build their own context.
    """

    def __init__(self, grid, family, D, tilt_convention=STANDARDIZED, theta_floor=0.0):
        if not isinstance(grid, Grid):
            raise TypeError("grid must be a Grid")
        if not isinstance(family, FamilySpec):
            raise TypeError("family must be a FamilySpec")
        if not D > 0:
            raise ValueError("kernel scale D must be positive")
        if tilt_convention not in (STANDARDIZED, RAW):
            raise ValueError(f"unknown tilt convention {tilt_convention!r}")
        if tilt_convention == RAW and family.is_gaussian:
            raise ValueError("raw tilt convention applies to the Bernoulli family only")
        self.grid = grid
        self.family = family
        self.D = float(D)
        self.tilt_convention = tilt_convention
        self.theta_floor = float(theta_floor)
        self._cache_key = None
        self._cache_val = None

    @property
    def n(self):
        return self.grid.n

    def signal(self, t):
        if isinstance(t, SignalParams):
            if t.D != self.D:
                raise ValueError("SignalParams kernel scale disagrees with context")
            return t
        return SignalParams(float(t[0]), float(t[1]), self.D)

    def kernel_at(self, t):
        """theta, dtheta/dt1, dtheta/dt2 arrays at t, cached for the last t."""
        sig = self.signal(t)
        key = (sig.t1, sig.t2)
        if key != self._cache_key:
            th, td1, td2 = kernel_values(
                self.grid.points, sig.t1, sig.t2, self.D, floor=self.theta_floor
            )
            self._cache_key = key
            self._cache_val = (th, td1, td2)
        return self._cache_val

    def tilt_eta(self, xi_theta):
        """Natural parameter handed to the cumulant, per the tilt convention.

        The standardized convention passes xi*theta through unchanged; the raw
        convention reads the tilt as acting on the raw Bernoulli, which scales
        the standardized natural parameter by s. Sensitivity knob only; the
        standardized form is the internally consistent one.
        """
        if self.tilt_convention == RAW:
            return self.family.scale * xi_theta
        return xi_theta


@dataclass(frozen=True)
class LocalFunctionals:
    """Everything the tail integrands need at one (t, x)."""

    t: np.ndarray
    x: float
    info: float          # sum theta^2
    xi: float            # x / sqrt(info)
    jvec: np.ndarray     # sum theta * theta_dot (half the info gradient)
    lam: np.ndarray      # covariance of the score gradient, 2x2
    delta: float         # quadratic-vs-true cumulant gap at the tilt
    r: float             # tilted mean of Z minus x
    sig_mat: np.ndarray  # psi''-weighted gradient covariance, 2x2
    rho: np.ndarray      # psi''-weighted cross term beta . beta_dot
    sigma2: float        # residual variance of Z given its gradient


def fisher_info(ctx, t):
    th, _, _ = ctx.kernel_at(t)
    return float(np.sum(th * th))


def score(ctx, t, W):
    """Z(t) = sum_u beta_u(t) W_u."""
    W = np.asarray(W, dtype=float)
    if W.shape != (ctx.n,):
        raise ValueError(f"observation vector must have length {ctx.n}")
    th, _, _ = ctx.kernel_at(t)
    info = np.sum(th * th)
    return float(np.sum(th * W) / np.sqrt(info))


def score_grad(ctx, t, W):
    """Z(t) and its analytic t-gradient in one pass."""
    W = np.asarray(W, dtype=float)
    if W.shape != (ctx.n,):
        raise ValueError(f"observation vector must have length {ctx.n}")
    th, td1, td2 = ctx.kernel_at(t)
    info = np.sum(th * th)
    sqrt_info = np.sqrt(info)
    j1 = np.sum(th * td1)
    j2 = np.sum(th * td2)
    zw = np.sum(th * W)
    g1 = np.sum(td1 * W) / sqrt_info - j1 * zw / (info * sqrt_info)
    g2 = np.sum(td2 * W) / sqrt_info - j2 * zw / (info * sqrt_info)
    return float(zw / sqrt_info), np.array([g1, g2])


def lambda_matrix(ctx, t):
    """Covariance matrix of the score gradient.

    lam = sum(theta_dot x theta_dot)/info - (J x J)/info^2. Equal, exactly, to
    sum(beta_dot x beta_dot); the difference form avoids building beta_dot.
    """
    th, td1, td2 = ctx.kernel_at(t)
    info = np.sum(th * th)
    j1 = np.sum(th * td1)
    j2 = np.sum(th * td2)
    l11 = np.sum(td1 * td1) / info - (j1 / info) ** 2
    l12 = np.sum(td1 * td2) / info - j1 * j2 / info**2
    l22 = np.sum(td2 * td2) / info - (j2 / info) ** 2
    lam = np.array([[l11, l12], [l12, l22]])
    tr = l11 + l22
    disc = (l11 - l22) ** 2 + 4.0 * l12 * l12
    if 0.5 * (tr - np.sqrt(max(disc, 0.0))) < _MIN_EIG:
        raise DegeneracyError(
            f"gradient covariance nearly singular at t={tuple(ctx.signal(t).t)}"
        )
    return lam


def local_functionals(ctx, t, x):
    """The full bundle at one (t, x). See LocalFunctionals for the fields."""
    if not x > 0:
        raise ValueError("threshold x must be positive")
    sig = ctx.signal(t)
    th, td1, td2 = ctx.kernel_at(sig)
    info = np.sum(th * th)
    sqrt_info = np.sqrt(info)
    j1 = np.sum(th * td1)
    j2 = np.sum(th * td2)
    lam = lambda_matrix(ctx, sig)

    xi = x / sqrt_info
    beta = th / sqrt_info
    bd1 = td1 / sqrt_info - j1 * th / (info * sqrt_info)
    bd2 = td2 / sqrt_info - j2 * th / (info * sqrt_info)

    if ctx.family.is_gaussian:
        # identically zero corrections: psi(eta) = eta^2/2 makes the quadratic
        # gap vanish term by term, and sum(beta*beta_dot) = 0
        return LocalFunctionals(
            t=sig.t, x=float(x), info=float(info), xi=float(xi),
            jvec=np.array([j1, j2]), lam=lam, delta=0.0, r=0.0,
            sig_mat=lam.copy(), rho=np.zeros(2), sigma2=1.0,
        )

    xith = xi * th
    eta = ctx.tilt_eta(xith)
    psi, psi1, psi2 = cumulant_triple(ctx.family, eta)
    # per-pixel quadratic gap; summing the difference avoids the x^2/2 cancellation
    delta = float(np.sum(0.5 * xith * xith - psi))
    r = float(np.sum(beta * (psi1 - xith)))
    s11 = np.sum(psi2 * bd1 * bd1)
    s12 = np.sum(psi2 * bd1 * bd2)
    s22 = np.sum(psi2 * bd2 * bd2)
    rho1 = np.sum(psi2 * beta * bd1)
    rho2 = np.sum(psi2 * beta * bd2)
    det_s = s11 * s22 - s12 * s12
    scale = max(abs(s11), abs(s22), abs(s12))
    if det_s <= _DET_REL * scale * scale or s11 <= 0:
        raise DegeneracyError(f"tilted gradient covariance not positive definite at t={tuple(sig.t)}")
    quad = (s22 * rho1 * rho1 - 2.0 * s12 * rho1 * rho2 + s11 * rho2 * rho2) / det_s
    sigma2 = 1.0 - quad
    if sigma2 <= 0:
        raise DegeneracyError(f"residual variance non-positive at t={tuple(sig.t)}")
    return LocalFunctionals(
        t=sig.t, x=float(x), info=float(info), xi=float(xi),
        jvec=np.array([j1, j2]), lam=lam, delta=delta, r=r,
        sig_mat=np.array([[s11, s12], [s12, s22]]), rho=np.array([rho1, rho2]),
        sigma2=float(sigma2),
    )


def local_fields_batch(ctx, ts, xs, chunk=1024):
    """Vectorized functionals for quadrature nodes.

    ts: (N,2) parameter points, xs: (k,) thresholds. Returns a dict with the
    gradient-covariance entries (N,) and, per threshold, delta/r/sigma2 as
    (N,k) arrays (all zeros/ones for the Gaussian family). No degeneracy
    checks here beyond positivity clamps; callers integrating over smooth
    regions hit the scalar path first if they need hard errors.
    """
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    N, k = ts.shape[0], xs.shape[0]
    out = {
        "l11": np.empty(N), "l12": np.empty(N), "l22": np.empty(N),
        "det": np.empty(N),
        "delta": np.zeros((N, k)), "r": np.zeros((N, k)), "sigma2": np.ones((N, k)),
    }
    gaussian = ctx.family.is_gaussian
    # out-of-regime inputs (e.g. an absurd kernel scale underflowing the info)
    # may produce NaN here; the quadrature driver turns that into a hard error
    with np.errstate(divide="ignore", invalid="ignore"):
        _fill_batch(ctx, ts, xs, chunk, out, gaussian)
    return out


def _fill_batch(ctx, ts, xs, chunk, out, gaussian):
    N = ts.shape[0]
    points = ctx.grid.points
    for lo in range(0, N, chunk):
        sl = slice(lo, min(lo + chunk, N))
        t1 = ts[sl, 0:1]
        t2 = ts[sl, 1:2]
        th, td1, td2 = kernel_values(points, t1, t2, ctx.D, floor=ctx.theta_floor)
        info = np.sum(th * th, axis=1)
        j1 = np.sum(th * td1, axis=1)
        j2 = np.sum(th * td2, axis=1)
        l11 = np.sum(td1 * td1, axis=1) / info - (j1 / info) ** 2
        l12 = np.sum(td1 * td2, axis=1) / info - j1 * j2 / info**2
        l22 = np.sum(td2 * td2, axis=1) / info - (j2 / info) ** 2
        out["l11"][sl] = l11
        out["l12"][sl] = l12
        out["l22"][sl] = l22
        out["det"][sl] = l11 * l22 - l12 * l12
        if gaussian:
            continue
        sqrt_info = np.sqrt(info)
        beta = th / sqrt_info[:, None]
        bd1 = td1 / sqrt_info[:, None] - j1[:, None] * th / (info * sqrt_info)[:, None]
        bd2 = td2 / sqrt_info[:, None] - j2[:, None] * th / (info * sqrt_info)[:, None]
        for jx, x in enumerate(xs):
            xith = (x / sqrt_info)[:, None] * th
            eta = ctx.tilt_eta(xith)
            psi, psi1, psi2 = cumulant_triple(ctx.family, eta)
            out["delta"][sl, jx] = np.sum(0.5 * xith * xith - psi, axis=1)
            out["r"][sl, jx] = np.sum(beta * (psi1 - xith), axis=1)
            s11 = np.sum(psi2 * bd1 * bd1, axis=1)
            s12 = np.sum(psi2 * bd1 * bd2, axis=1)
            s22 = np.sum(psi2 * bd2 * bd2, axis=1)
            rho1 = np.sum(psi2 * beta * bd1, axis=1)
            rho2 = np.sum(psi2 * beta * bd2, axis=1)
            det_s = s11 * s22 - s12 * s12
            quad = (s22 * rho1 * rho1 - 2.0 * s12 * rho1 * rho2 + s11 * rho2 * rho2) / det_s
            out["sigma2"][sl, jx] = 1.0 - quad
    return out
