"""Observation families for the pixel variables.

Two families are supported: the standardized Bernoulli (a two-point law shifted
and scaled to mean 0, variance 1) and the standard Gaussian. Both expose the
cumulant function of the standardized variable and its first two derivatives,
normalized so that psi(0) = psi'(0) = 0 and psi''(0) = 1.
"""
from dataclasses import dataclass
import math

import numpy as np

BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    p0: float | None = None

    def __post_init__(self):
        if self.kind == BERNOULLI:
            if self.p0 is None or not (0.0 < self.p0 < 1.0):
                raise ValueError("Bernoulli family needs a success probability in (0,1)")
        elif self.kind == GAUSSIAN:
            if self.p0 is not None:
                raise ValueError("Gaussian family takes no success probability")
        else:
            raise ValueError(f"unknown family kind {self.kind!r}")

    @classmethod
    def bernoulli(cls, p0):
        return cls(BERNOULLI, float(p0))

    @classmethod
    def gaussian(cls):
        return cls(GAUSSIAN)

    @property
    def scale(self):
        """Standard deviation of the raw Bernoulli, sqrt(p0*(1-p0))."""
        if self.kind != BERNOULLI:
            raise AttributeError("scale is defined for the Bernoulli family only")
        return math.sqrt(self.p0 * (1.0 - self.p0))

    @property
    def is_gaussian(self):
        return self.kind == GAUSSIAN


def tilted_success_prob(p0, eta):
    """Success probability of the Bernoulli law after an exponential tilt with
    natural parameter eta on the raw variable: p0 / (p0 + (1-p0) e^{-eta}).

    Written in two branches so that neither tail overflows.
    """
    if not (0.0 < p0 < 1.0):
        raise ValueError("p0 must lie in (0,1)")
    eta = np.asarray(eta, dtype=float)
    q0 = 1.0 - p0
    out = np.where(
        eta >= 0,
        p0 / (p0 + q0 * np.exp(np.where(eta >= 0, -eta, 0.0))),
        p0 * np.exp(np.where(eta >= 0, 0.0, eta))
        / (p0 * np.exp(np.where(eta >= 0, 0.0, eta)) + q0),
    )
    return float(out) if out.ndim == 0 else out


def cumulant_triple(family, eta):
    """psi, psi', psi'' of the standardized variable at natural parameter eta.

    Vectorized over eta. For the Bernoulli family the standardized variable is
    W = (B - p0)/s with s = sqrt(p0 q0), so the raw natural parameter is eta/s
    and psi(eta) = log(q0 + p0 exp(eta/s)) - eta p0 / s. Evaluated through
    log1p/expm1 so large positive and negative tilts stay finite.
    """
    eta = np.asarray(eta, dtype=float)
    if family.is_gaussian:
        return 0.5 * eta * eta, eta.copy(), np.ones_like(eta)

    p0 = family.p0
    q0 = 1.0 - p0
    s = family.scale
    z = eta / s
    pos = z > 0
    # psi = log(q0 + p0 e^z) - p0 z, rearranged per sign of z
    psi = np.where(
        pos,
        q0 * z + np.log1p(q0 * np.expm1(np.where(pos, -z, 0.0))),
        np.log1p(p0 * np.expm1(np.where(pos, 0.0, z))) - p0 * z,
    )
    p1 = np.asarray(tilted_success_prob(p0, z))
    psi1 = (p1 - p0) / s
    psi2 = p1 * (1.0 - p1) / (s * s)
    return psi, psi1, psi2


def cumulant(family, eta, order=0):
    """Cumulant function of the standardized variable, or one of its first two
    derivatives (order 0, 1 or 2)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    eta_arr = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta_arr)):
        raise ValueError("eta must be finite")
    out = np.asarray(cumulant_triple(family, eta_arr)[order])
    return float(out) if out.ndim == 0 else out
