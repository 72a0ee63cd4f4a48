"""Location-dependent detector quality and the sample-size learning curve."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lpmv

from ..rng import RngStream, StreamBatch


def _sh_terms(degree: int):
    """(l, m) pairs for degrees 1..degree, m in -l..l."""
    return [(l, m) for l in range(1, degree + 1) for m in range(-l, l + 1)]


def real_sph_harm(l: int, m: int, lat_deg, lon_deg) -> np.ndarray:
    """Orthonormal real spherical harmonic on latitude/longitude in degrees."""
    lat = np.radians(np.asarray(lat_deg, dtype=np.float64))
    lon = np.radians(np.asarray(lon_deg, dtype=np.float64))
    am = abs(m)
    norm = math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am))
    leg = lpmv(am, l, np.sin(lat))  # cos(colatitude) == sin(latitude)
    if m == 0:
        return norm * leg
    if m > 0:
        return math.sqrt(2.0) * norm * leg * np.cos(am * lon)
    return math.sqrt(2.0) * norm * leg * np.sin(am * lon)


@dataclass(frozen=True)
class PerformanceField:
    """f(lat, lon) in [0, 1]: base level, polar degradation, a smooth random
    spherical-harmonic surface and piecewise-constant longitude patches."""

    base: float
    lat_gradient: float
    sh_coefs: tuple[float, ...]
    sh_degree: int
    sh_amplitude: float
    patches: tuple[float, ...]
    patch_block_deg: float
    noise_sd: float

    @classmethod
    def from_seed(cls, seed: int, base=0.95, lat_gradient=0.35, sh_degree=4, sh_amplitude=0.04,
                  lon_patchiness=0.25, patch_block_deg=20.0, noise_sd=0.05) -> "PerformanceField":
        root = RngStream(seed, "field")
        n_coef = len(_sh_terms(sh_degree))
        coefs = StreamBatch.children(root, [f"sh:{i}" for i in range(n_coef)]).normal() if n_coef else []
        n_blocks = int(round(360.0 / patch_block_deg))
        u = StreamBatch.children(root, [f"patch:{b}" for b in range(n_blocks)]).uniform()
        patches = lon_patchiness * (2.0 * u - 1.0)
        return cls(float(base), float(lat_gradient), tuple(float(c) for c in coefs), int(sh_degree),
                   float(sh_amplitude), tuple(float(p) for p in patches), float(patch_block_deg),
                   float(noise_sd))

    @classmethod
    def from_config(cls, seed: int, cfg: dict) -> "PerformanceField":
        return cls.from_seed(seed, **cfg)

    @classmethod
    def constant(cls, value: float = 1.0) -> "PerformanceField":
        return cls(float(value), 0.0, (), 0, 0.0, (0.0,), 360.0, 0.0)

    def smooth(self, lat, lon) -> np.ndarray:
        lat = np.asarray(lat, dtype=np.float64)
        out = np.zeros(lat.shape)
        terms = _sh_terms(self.sh_degree)
        if not terms or self.sh_amplitude == 0:
            return out
        for c, (l, m) in zip(self.sh_coefs, terms):
            out = out + c * real_sph_harm(l, m, lat, lon)
        # unit RMS over the sphere in expectation, then scale
        return self.sh_amplitude * out / math.sqrt(len(terms) / (4 * math.pi))

    def patch(self, lon) -> np.ndarray:
        lon = np.asarray(lon, dtype=np.float64) % 360.0
        idx = np.clip((lon // self.patch_block_deg).astype(np.int64), 0, len(self.patches) - 1)
        return np.asarray(self.patches)[idx]

    def __call__(self, lat, lon) -> np.ndarray:
        lat = np.asarray(lat, dtype=np.float64)
        val = (self.base - self.lat_gradient * np.abs(lat) / 90.0
               + self.smooth(lat, lon) + self.patch(lon))
        return np.clip(val, 0.0, 1.0)


@dataclass(frozen=True)
class LearningCurve:
    """q(n) = q_inf - (q_inf - q0) exp(-n / tau)."""

    q0: float
    q_inf: float
    tau: float

    def __post_init__(self):
        if not self.q_inf > self.q0:
            raise ValueError("q_inf must exceed q0")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def __call__(self, n) -> float:
        return self.q_inf - (self.q_inf - self.q0) * math.exp(-float(n) / self.tau)
