"""Process dynamics, per-node sensing models and their information terms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import ValidationError


def _matrix(x, name) -> np.ndarray:
    a = np.atleast_2d(np.array(x, dtype=float))
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be a finite 2-D matrix")
    return a


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class ProcessModel:
    """Discrete dynamics ``x(k+1) = a x(k) + b w(k)`` with ``w ~ N(0, q_cov)``."""

    a: np.ndarray
    b: np.ndarray
    q_cov: np.ndarray

    def __post_init__(self):
        a, b, q = _matrix(self.a, "a"), _matrix(self.b, "b"), _matrix(self.q_cov, "q_cov")
        m = a.shape[0]
        if a.shape != (m, m) or b.shape[0] != m or q.shape != (b.shape[1],) * 2:
            raise ValidationError("process model dimensions are inconsistent")
        if not np.allclose(q, q.T) or np.linalg.eigvalsh(q).min() < -1e-12 * max(1.0, np.abs(q).max()):
            raise ValidationError("q_cov must be symmetric positive semidefinite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "q_cov", q)

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    """Continuous dynamics ``dx/dt = f x + g w`` with white-noise intensity ``q_cov``."""

    f: np.ndarray
    g: np.ndarray
    q_cov: np.ndarray

    def __post_init__(self):
        f, g, q = _matrix(self.f, "f"), _matrix(self.g, "g"), _matrix(self.q_cov, "q_cov")
        m = f.shape[0]
        if f.shape != (m, m) or g.shape[0] != m or q.shape != (g.shape[1],) * 2:
            raise ValidationError("continuous model dimensions are inconsistent")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "q_cov", q)


@dataclass(frozen=True, eq=False)
class SensorModel:
    """Linear sensor ``z = h x + v`` with ``v ~ N(0, r_cov)``."""

    h: np.ndarray
    r_cov: np.ndarray
    r_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h, r = _matrix(self.h, "h"), _matrix(self.r_cov, "r_cov")
        p = h.shape[0]
        if r.shape != (p, p):
            raise ValidationError(f"r_cov must be {p}x{p} to match h")
        if not np.allclose(r, r.T, rtol=0, atol=1e-12 * max(1.0, np.abs(r).max())):
            raise ValidationError("r_cov must be symmetric")
        try:
            chol = np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            raise ValidationError("r_cov must be positive definite") from None
        linv = np.linalg.inv(chol)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "r_cov", r)
        object.__setattr__(self, "r_inv", linv.T @ linv)
        object.__setattr__(self, "_r_chol", chol)


def discretize(cm: ContinuousModel, dt: float) -> ProcessModel:
    """Exact zero-order-hold discretization.

    ``a = expm(f dt)`` and ``b = (int_0^dt expm(f s) ds) g``, the latter read
    off the upper-right block of ``expm([[f, g], [0, 0]] dt)``. The noise
    covariance is carried over unchanged.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    m, q = cm.g.shape
    aug = np.zeros((m + q, m + q))
    aug[:m, :m] = cm.f
    aug[:m, m:] = cm.g
    e = expm(aug * dt)
    return ProcessModel(e[:m, :m], e[:m, m:], cm.q_cov.copy())


def step_process(pm: ProcessModel, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    w = _psd_sqrt(pm.q_cov) @ rng.standard_normal(pm.q_cov.shape[0])
    return pm.a @ x + pm.b @ w


def measure(sm: SensorModel, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v = sm._r_chol @ rng.standard_normal(sm.r_cov.shape[0])
    return sm.h @ x + v


def information_terms(sm: SensorModel, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(h' R^-1 h, h' R^-1 z)`` for one node."""
    ht_rinv = sm.h.T @ sm.r_inv
    u_mat = ht_rinv @ sm.h
    return 0.5 * (u_mat + u_mat.T), ht_rinv @ np.asarray(z, dtype=float)


def noise_rng(run_seed: int, *key: int) -> np.random.Generator:
    """Generator keyed by ``(run_seed, *key)``, e.g. ``(seed, stream, node, step)``."""
    return np.random.default_rng([int(run_seed), *(int(k) for k in key)])
