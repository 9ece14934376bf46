"""Experiment definitions: channel, focused ultrasound, manufactured case.

Bundles the initial data / boundary sources of the two physical studies
(water medium throughout) and the closed-form fields of the linear
manufactured-solution verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import channel_mesh, focus_mesh, interval_mesh
from .wavesolver import MaterialParams, WATER


@dataclass(frozen=True)
class ChannelData:
    """Gaussian pressure/velocity initial pulses of the channel study."""

    A1: float = 1.2e8       # Pa
    A2: float = -1e11       # Pa
    sigma1: float = 0.015
    sigma2: float = 0.02
    mu: float = 0.1         # m

    def u0(self, x):
        d = x - self.mu
        return self.A1 * np.exp(-d * d / (2.0 * self.sigma1 ** 2))

    def grad_u0(self, x):
        d = x - self.mu
        return -self.A1 * d / self.sigma1 ** 2 \
            * np.exp(-d * d / (2.0 * self.sigma1 ** 2))

    def u1(self, x):
        d = x - self.mu
        return self.A2 * d * np.exp(-d * d / (2.0 * self.sigma2 ** 2))

    def grad_u1(self, x):
        d = x - self.mu
        s2 = self.sigma2 ** 2
        return self.A2 * (1.0 - d * d / s2) * np.exp(-d * d / (2.0 * s2))


@dataclass(frozen=True)
class FocusSource:
    """Modulated sinusoidal transducer flux of the focus study."""

    g0: float = 1e7         # Pa/m
    freq: float = 60e3      # Hz

    @property
    def omega(self):
        return 2.0 * math.pi * self.freq

    def __call__(self, t):
        w = self.omega
        wt = w * t
        if t > 2.0 * math.pi / w:
            return self.g0 * math.sin(wt) * (1.0 + math.sin(wt / 4.0))
        return self.g0 * math.sin(wt)


class MmsCase:
    """Manufactured linear problem with exact u = sin(pi x)(1+t^2)e^-t.

    The variable coefficients are alpha = 1 + 0.5 sin(pi x) cos t and
    beta = 0.5 cos(pi x); the source follows from substituting the exact
    solution into  alpha u_tt - c^2 u_xx - b u_xx t + beta u_t = f.
    The domain is the unit interval with homogeneous Dirichlet ends.
    """

    def __init__(self, c=1.0, b=1e-2):
        self.material = MaterialParams(c=c, rho=1.0, b=b, beta_a=0.0)

    @staticmethod
    def time_factor(t):
        return (1.0 + t * t) * math.exp(-t)

    @staticmethod
    def time_factor_dt(t):
        return -(t - 1.0) ** 2 * math.exp(-t)

    @staticmethod
    def time_factor_dtt(t):
        return (t - 1.0) * (t - 3.0) * math.exp(-t)

    @staticmethod
    def alpha(x, t):
        return 1.0 + 0.5 * np.sin(np.pi * x) * math.cos(t)

    @staticmethod
    def beta(x, t):
        return 0.5 * np.cos(np.pi * x)

    def source(self, x, t):
        pi2 = np.pi ** 2
        s = np.sin(np.pi * x)
        c2 = self.material.c ** 2
        return (self.alpha(x, t) * s * self.time_factor_dtt(t)
                + c2 * pi2 * s * self.time_factor(t)
                + self.material.b * pi2 * s * self.time_factor_dt(t)
                + self.beta(x, t) * s * self.time_factor_dt(t))

    def grad_u0(self, x):
        return np.pi * np.cos(np.pi * x) * self.time_factor(0.0)

    def grad_u1(self, x):
        return np.pi * np.cos(np.pi * x) * self.time_factor_dt(0.0)

    def exact_at_quadpoints(self, space):
        """Callable t -> (u, grad u, u_t, grad u_t, u_tt) at quad points."""
        xq = space.qp_phys[..., 0]
        sin_q = np.sin(np.pi * xq)
        cos_q = np.pi * np.cos(np.pi * xq)

        def exact(t):
            g, dg, ddg = (self.time_factor(t), self.time_factor_dt(t),
                          self.time_factor_dtt(t))
            return (sin_q * g, (cos_q * g)[..., None], sin_q * dg,
                    (cos_q * dg)[..., None], sin_q * ddg)

        return exact


def study_mesh(kind, level):
    """Level-N mesh of a named study family."""
    if kind == "channel":
        return channel_mesh(level)
    if kind == "focus":
        return focus_mesh(level)
    if kind == "mms":
        if level < 1:
            raise ValueError("level must be at least 1")
        return interval_mesh(1.0, 2 ** level)
    raise ValueError(f"unknown study kind {kind!r}")


WATER_PARAMS = WATER
