"""Local polynomial regression with tricube weights and pointwise confidence bands."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ValidationError

Z95 = 1.96


@dataclass
class Loess:
    """A fitted LOESS smoother.

    Each evaluation at ``x0`` is a weighted least-squares polynomial fit of
    ``degree`` in ``x - x0`` over the ``floor(span * n)`` nearest points, with
    tricube weights scaled by the distance to the farthest of them (for
    ``span > 1`` the maximum distance is stretched by ``span``). The estimate
    is linear in ``y``, ``yhat(x0) = l(x0) . y``; the residual scale uses the
    equivalent degrees of freedom ``delta1 = tr((I - L)^T (I - L))``.
    """

    x: np.ndarray
    y: np.ndarray
    span: float = 0.75
    degree: int = 2
    sigma: float = float("nan")
    delta1: float = float("nan")

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.x.size != self.y.size:
            raise ValidationError("x and y differ in length")
        if self.degree not in (0, 1, 2):
            raise ValidationError("degree must be 0, 1 or 2")
        if self.span <= 0:
            raise ValidationError("span must be positive")
        n = self.x.size
        self._q = min(n, int(math.floor(n * self.span))) if self.span <= 1 else n
        if n < self.degree + 1 or self._q < self.degree + 1:
            raise InsufficientDataError(f"{n} points (neighbourhood {self._q}) cannot support "
                                        f"a local polynomial of degree {self.degree}")
        L = np.vstack([self._weights_row(x0) for x0 in self.x])
        resid = self.y - L @ self.y
        IL = np.eye(n) - L
        self.delta1 = float(np.sum(IL * IL))
        self.sigma = math.sqrt(resid @ resid / self.delta1) if self.delta1 > 1e-12 else 0.0

    def _weights_row(self, x0: float) -> np.ndarray:
        d = np.abs(self.x - x0)
        if self.span <= 1:
            h = np.partition(d, self._q - 1)[self._q - 1]
        else:
            h = d.max() * self.span
        if h <= 0:
            h = max(np.ptp(self.x), 1.0) * 1e-12
        h *= 1.0 + 1e-10
        u = np.clip(d / h, 0.0, 1.0)
        w = (1.0 - u ** 3) ** 3
        use = np.flatnonzero(w > 0)
        t = (self.x[use] - x0) / h
        V = np.vander(t, self.degree + 1, increasing=True)
        sw = np.sqrt(w[use])
        pinv = np.linalg.pinv(V * sw[:, None])
        row = np.zeros(self.x.size)
        row[use] = pinv[0] * sw
        return row

    def operator(self, x_eval) -> np.ndarray:
        return np.vstack([self._weights_row(float(x0)) for x0 in np.atleast_1d(x_eval)])

    def predict(self, x_eval, se: bool = False):
        L = self.operator(x_eval)
        fit = L @ self.y
        if not se:
            return fit
        return fit, self.sigma * np.sqrt(np.sum(L * L, axis=1))

    def band(self, x_eval, z: float = Z95):
        """Mean and pointwise ``z``-sigma band: (fit, lower, upper)."""
        fit, s = self.predict(x_eval, se=True)
        return fit, fit - z * s, fit + z * s
