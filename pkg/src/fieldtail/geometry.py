"""Pixel grid and line-segment signal geometry.

A signal is the straight segment joining (0, t1) to (1, t2); the kernel weight
of a pixel u is exp(-D * dist(u, segment)^2 / 2). The segment is parameterized
as point(p) = p*(0, t1) + (1-p)*(1, t2), so p = 1 is the left endpoint.
"""
from dataclasses import dataclass, field
import math

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Dyadic pixel grid on the unit square: (i/2^m, j/2^m), 0 <= i,j <= 2^m."""

    m: int
    points: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.m < 0 or self.m != int(self.m):
            raise ValueError("dyadic level m must be a nonnegative integer")
        if self.points is None:
            k = 2**self.m + 1
            axis = np.arange(k) / 2.0**self.m
            ii, jj = np.meshgrid(axis, axis, indexing="ij")
            object.__setattr__(self, "points", np.column_stack([ii.ravel(), jj.ravel()]))
        self.points.setflags(write=False)

    @property
    def n(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class SignalParams:
    t1: float
    t2: float
    D: float

    def __post_init__(self):
        if not (0.0 <= self.t1 <= 1.0 and 0.0 <= self.t2 <= 1.0):
            raise ValueError("segment heights must lie in [0,1]")
        if not self.D > 0:
            raise ValueError("kernel scale D must be positive")

    @property
    def t(self):
        return np.array([self.t1, self.t2])


def _closest_param(ux, uy, t1, t2):
    # minimizer of |u - point(p)|^2; the quadratic in p has leading
    # coefficient 1 + (t1-t2)^2 > 0, so the unclamped minimum is unique
    dt = t1 - t2
    p = ((1.0 - ux) + dt * (uy - t2)) / (1.0 + dt * dt)
    return np.clip(p, 0.0, 1.0)


def segment_distance(u, t):
    """Euclidean distance from pixel u to the signal segment of t.

    Returns (distance, p) where p in [0,1] is the clamped location of the
    closest point, kept for gradient reuse.
    """
    ux, uy = float(u[0]), float(u[1])
    p = float(_closest_param(ux, uy, t.t1, t.t2))
    qx = 1.0 - p
    qy = t.t2 + p * (t.t1 - t.t2)
    return math.hypot(ux - qx, uy - qy), p


def theta(u, t):
    """Kernel weight exp(-D d^2 / 2); equals 1 exactly when u is on the segment."""
    d, _ = segment_distance(u, t)
    return math.exp(-0.5 * t.D * d * d)


def theta_grad(u, t):
    """Gradient of theta in (t1, t2).

    The squared distance is differentiable in t with the clamped closest-point
    parameter held fixed (envelope argument): d(d^2)/dt1 = 2 p (qy - uy) and
    d(d^2)/dt2 = 2 (1-p) (qy - uy), q the closest point.
    """
    ux, uy = float(u[0]), float(u[1])
    p = float(_closest_param(ux, uy, t.t1, t.t2))
    qy = t.t2 + p * (t.t1 - t.t2)
    resid = qy - uy
    th = math.exp(-0.5 * t.D * ((ux - (1.0 - p)) ** 2 + resid * resid))
    g = np.array([2.0 * p * resid, 2.0 * (1.0 - p) * resid])
    return -0.5 * t.D * th * g


def kernel_values(points, t1, t2, D, with_grad=True, floor=0.0):
    """theta (and optionally its t-gradient) for a whole pixel array at once.

    t1, t2 may be scalars or (N,1) columns; the result then broadcasts to
    (N, n). Values below `floor` are zeroed when a positive floor is given
    (speed knob, off by default).
    """
    points = np.asarray(points, dtype=float)
    ux = points[:, 0]
    uy = points[:, 1]
    dt = np.asarray(t1) - np.asarray(t2)
    p = ((1.0 - ux) + dt * (uy - t2)) / (1.0 + dt * dt)
    p = np.clip(p, 0.0, 1.0)
    qx = 1.0 - p
    qy = t2 + p * dt
    dx = ux - qx
    dy = uy - qy
    th = np.exp(-0.5 * D * (dx * dx + dy * dy))
    if floor > 0.0:
        th = np.where(th < floor, 0.0, th)
    if not with_grad:
        return th, None, None
    resid = qy - uy
    half_d = -0.5 * D * th
    return th, half_d * (2.0 * p * resid), half_d * (2.0 * (1.0 - p) * resid)
