"""Self-similar source-type solutions of the porous medium equation, used as solver oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class Barenblatt:
    """u(t, x) = t^-alpha (C - k |x|^2 t^(-2 beta))_+^(1/(m-1)) for du/dt = Lap(u^m), m > 1.

    alpha = d / (d(m-1) + 2), beta = alpha / d, k = alpha (m-1) / (2 m d).
    """

    d: int
    m: float
    C: float

    def __post_init__(self):
        if self.d < 1 or not (self.m > 1) or not (self.C > 0):
            raise InvalidParameter("need d >= 1, m > 1 and C > 0")

    @property
    def alpha(self) -> float:
        return self.d / (self.d * (self.m - 1.0) + 2.0)

    @property
    def beta(self) -> float:
        return self.alpha / self.d

    @property
    def k(self) -> float:
        return self.alpha * (self.m - 1.0) / (2.0 * self.m * self.d)

    def __call__(self, t, rho):
        rho = np.asarray(rho, dtype=float)
        base = self.C - self.k * rho**2 * t ** (-2.0 * self.beta)
        return t ** (-self.alpha) * np.maximum(base, 0.0) ** (1.0 / (self.m - 1.0))

    def front(self, t) -> float:
        """Radius of the support at time t."""
        return float(np.sqrt(self.C / self.k) * t**self.beta)
