"""Random draws: counter-based streams and the inverse Gaussian sampler.

Streams are Philox counter-based generators keyed by (seed, stream_id),
so the draw sequence of a stream depends only on that pair, never on
platform or scheduling.  Simulations consume one stream and draw whole
path-vectors per step in a fixed order; independent purposes (e.g. a
benchmark run) take a different stream_id of the same master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RngStream",
    "sample_standard_normal",
    "sample_inverse_gaussian",
    "correlated_pair",
]


@dataclass
class RngStream:
    """Deterministic random stream keyed by (seed, stream_id)."""

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be >= 0")
        key = (int(self.seed) & (2**64 - 1)) | (int(self.stream_id) << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)


def sample_standard_normal(stream: RngStream, size=None):
    """Standard normal draws from the stream."""
    return stream.normal(size)


def sample_inverse_gaussian(stream: RngStream, mu, gamma, size=None):
    """Inverse Gaussian IG(mu, gamma) draws by the transformation method.

    The density is sqrt(gamma / (2 pi x^3)) exp(-gamma (x - mu)^2 /
    (2 mu^2 x)) on x > 0, with mean mu and variance mu^3 / gamma.  One
    squared standard normal y gives the smaller root of the defining
    quadratic,

        x_minus = mu / (1 + w/2 + sqrt(w + w^2/4)),   w = mu y / gamma,

    (the algebraically equivalent mu (1 + w/2 - sqrt(w + w^2/4)) suffers
    cancellation for large w; the roots multiply to mu^2), and a uniform
    picks x_minus with probability mu / (mu + x_minus), else mu^2 / x_minus.

    ``mu`` and ``gamma`` must be positive; both broadcast against ``size``
    so each draw can carry its own parameters.
    """
    mu = np.asarray(mu, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(mu <= 0.0) or np.any(gamma <= 0.0):
        raise ValueError("mu and gamma must be > 0")
    y = np.square(stream.normal(size))
    w = mu * y / gamma
    x_minus = mu / (1.0 + 0.5 * w + np.sqrt(w + 0.25 * np.square(w)))
    pick = stream.uniform(size)
    take_minus = pick <= mu / (mu + x_minus)
    out = np.where(take_minus, x_minus, np.square(mu) / x_minus)
    return float(out) if out.ndim == 0 else out


def correlated_pair(stream: RngStream, rho: float, size=None):
    """Pair (z1, z2) of standard normals with corr(z1, z2) = rho.

    z2 drives the variance; z1 = rho * z2 + sqrt(1 - rho^2) * z_perp
    drives the price.  Draw order is (z_perp, z2), so rho = 1 collapses
    z1 onto z2 exactly.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    z_perp = stream.normal(size)
    z2 = stream.normal(size)
    z1 = rho * z2 + np.sqrt(1.0 - rho * rho) * z_perp
    return z1, z2
