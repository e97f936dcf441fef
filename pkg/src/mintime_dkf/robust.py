"""Nearest rank-deficient Hankel matrix and the robust limit estimate.

For a noisy, full-rank difference Hankel matrix ``gamma`` with smallest
singular triplet ``(sigma, u, v)``, a Hankel matrix ``D`` with ``D v = v``
and ``||D||_2 <= 1`` yields the Hankel, singular ``gamma - s sigma D`` at
spectral distance exactly ``sigma`` (``s = u'v = +-1`` since ``gamma`` is
symmetric). ``D`` comes from the minimum-norm solution of a circulant
system built from ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateKernel, PropertyViolation, ZeroVector
from .mintime import KERNEL_TOL, Detection, final_value, hankel_of_differences

DIRECTION_TOL = 1e-8


def build_cx(v: np.ndarray) -> np.ndarray:
    """Circulant ``(2s-1) x (2s-1)`` matrix whose row ``i`` is ``[v, 0...]``
    rotated right by ``i``.

    Row ``i`` holds the coefficients of ``(Htilde [v; 0])_i`` in the entries of
    the wrapped Hankel matrix ``Htilde[i, j] = h[(i + j) mod (2s-1)]``.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0 or not np.any(v):
        raise ZeroVector("kernel candidate must be non-zero")
    size = 2 * v.size - 1
    first = np.zeros(size)
    first[: v.size] = v
    return np.stack([np.roll(first, i) for i in range(size)])


def hvec(h: np.ndarray) -> np.ndarray:
    """Distinct anti-diagonal values of a square Hankel matrix (length ``2s-1``)."""
    s = h.shape[0]
    return np.concatenate([h[0, :], h[1:, s - 1]])


def hankel_from_hvec(vec: np.ndarray) -> np.ndarray:
    return hankel_of_differences(vec)


def unit_hankel_direction(v: np.ndarray) -> np.ndarray:
    """Hankel ``D`` with ``D v = v`` and ``||D||_2 <= 1`` for unit ``v``."""
    cx = build_cx(v)
    e1 = np.zeros(cx.shape[0])
    e1[0] = 1.0
    # minimum-norm solution of cx h = cx' e1, i.e. h = pinv(cx) cx' e1, without
    # forming the pseudo-inverse (cx can be nearly singular)
    return hankel_from_hvec(np.linalg.lstsq(cx, cx.T @ e1, rcond=None)[0])


def check_direction(d: np.ndarray, v: np.ndarray, tol: float = DIRECTION_TOL) -> None:
    if np.max(np.abs(d @ v - v)) > tol:
        raise PropertyViolation(f"D v != v (residual {np.max(np.abs(d @ v - v)):.2e})")
    if np.linalg.norm(d, 2) > 1.0 + tol:
        raise PropertyViolation(f"||D||_2 = {np.linalg.norm(d, 2):.12f} exceeds 1")
    if not np.allclose(d, hankel_from_hvec(hvec(d)), rtol=0, atol=tol):
        raise PropertyViolation("D is not Hankel")


@dataclass(frozen=True, eq=False)
class RobustApproximation:
    gamma_hat: np.ndarray
    d_mat: np.ndarray
    sigma_min: float
    v_min: np.ndarray
    rho: float
    sign: float = 1.0


def nearest_defective_hankel(gamma: np.ndarray, rho: float) -> RobustApproximation | None:
    """Rank-deficient Hankel approximation of ``gamma``, or ``None`` while the
    smallest singular value still exceeds ``rho`` (grow the matrix and retry)."""
    gamma = np.asarray(gamma, dtype=float)
    u, sv, vt = np.linalg.svd(gamma)
    sigma, v = float(sv[-1]), vt[-1]
    if sigma > rho:
        return None
    sign = 1.0 if float(u[:, -1] @ v) >= 0 else -1.0
    d = unit_hankel_direction(v)
    check_direction(d, v)
    return RobustApproximation(gamma - sign * sigma * d, d, sigma, v, rho, sign)


def robust_final_value(history, approx: RobustApproximation) -> float:
    """Limit from the kernel of the corrected matrix applied to the observed history."""
    v = approx.v_min
    if abs(v[-1]) < KERNEL_TOL:
        raise DegenerateKernel("kernel vector has a vanishing last component")
    return float(final_value(history, v / v[-1]))


def default_rho(noise_std: float, size: int) -> float:
    """``10 * noise_std * sqrt(size)`` for a ``size x size`` Hankel matrix."""
    return 10.0 * noise_std * np.sqrt(size)


class RobustDetector:
    """Drop-in replacement for :class:`MinTimeDetector` on noisy signals.

    ``rho`` fixes the acceptance threshold; otherwise it follows
    :func:`default_rho` from ``noise_std``, falling back to the relative
    ``sigma_threshold`` test when no noise level is known. No acceptance test
    is made before ``min_rounds`` differences have been observed: with noise,
    a signal that has not started moving yet cannot be told apart from a
    constant one by its values alone.
    """

    def __init__(
        self,
        rho: float | None = None,
        noise_std: float = 0.0,
        sigma_threshold: float = 1e-8,
        min_rounds: int = 0,
    ):
        self.rho = rho
        self.min_rounds = int(min_rounds)
        self.noise_std = noise_std
        self.sigma_threshold = sigma_threshold
        self.history: list[float] = []
        self.diffs: list[float] = []
        self.result: Detection | None = None
        self.approx: RobustApproximation | None = None

    @property
    def detected(self) -> bool:
        return self.result is not None

    def _rho_for(self, gamma: np.ndarray) -> float:
        if self.rho is not None:
            return self.rho
        if self.noise_std > 0:
            return default_rho(self.noise_std, gamma.shape[0])
        return self.sigma_threshold * max(1.0, np.linalg.norm(gamma, 2))

    def push(self, y) -> Detection | None:
        if self.result is not None:
            return self.result
        y = float(y)
        if self.history:
            self.diffs.append(y - self.history[-1])
        self.history.append(y)
        if len(self.history) % 2 == 0 and len(self.diffs) >= self.min_rounds:
            gamma = hankel_of_differences(self.diffs)
            approx = nearest_defective_hankel(gamma, self._rho_for(gamma))
            if approx is not None:
                phi = robust_final_value(self.history, approx)
                v = approx.v_min
                self.approx = approx
                self.result = Detection(tuple(float(b) for b in v / v[-1]), phi, len(self.history) - 1, approx.sigma_min)
        return self.result
