"""Centralized Kalman filter and the per-node distributed update.

Both filters are written in information form. The node update broadcasts
over any leading axes, so a whole network can be updated in one call by
stacking node states along axis 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SingularCovariance
from .sysmodel import ProcessModel, SensorModel

PIVOT_TOL = 1e-12


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of a (batch of) symmetric positive-definite matrices.

    Raises SingularCovariance when the Cholesky factorization fails or a
    squared pivot falls below ``PIVOT_TOL`` relative to the largest.
    """
    m = _sym(np.asarray(m, dtype=float))
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise SingularCovariance("matrix is not positive definite") from None
    piv = np.diagonal(chol, axis1=-2, axis2=-1) ** 2
    if np.any(piv <= PIVOT_TOL * np.max(piv, axis=-1, keepdims=True)):
        raise SingularCovariance("matrix is numerically singular")
    linv = np.linalg.inv(chol)
    return np.swapaxes(linv, -1, -2) @ linv


@dataclass(frozen=True, eq=False)
class CkfState:
    x_prior: np.ndarray
    p_prior: np.ndarray
    x_post: np.ndarray | None = None
    m_post: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class DkfNodeState:
    """Local filter state; ``p_kf`` and ``m_kf`` are ``n`` times their CKF
    counterparts and ``q_scaled`` is ``n * Q``."""

    x_prior: np.ndarray
    p_kf: np.ndarray
    q_scaled: np.ndarray
    x_post: np.ndarray | None = None
    m_kf: np.ndarray | None = None


def initial_ckf(m: int, n: int, p0: float = 10.0) -> CkfState:
    return CkfState(np.zeros(m), p0 * np.eye(m) / n)


def initial_dkf(pm: ProcessModel, n: int, p0: float = 10.0, nodes: int | None = None) -> DkfNodeState:
    """Prior shared with ``initial_ckf`` under the ``P_i = n P_c`` scaling.

    With ``nodes`` given, the state is stacked along a leading node axis.
    """
    m = pm.dim
    x, p, q = np.zeros(m), p0 * np.eye(m), n * pm.q_cov
    if nodes is not None:
        x = np.tile(x, (nodes, 1))
        p = np.tile(p, (nodes, 1, 1))
    return DkfNodeState(x, p, q)


def stack_sensors(models: list[SensorModel]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H_c, R_c^-1)`` for the stacked measurement."""
    h_c = np.vstack([s.h for s in models])
    sizes = [s.r_inv.shape[0] for s in models]
    r_inv = np.zeros((sum(sizes), sum(sizes)))
    k = 0
    for s, p in zip(models, sizes):
        r_inv[k:k + p, k:k + p] = s.r_inv
        k += p
    return h_c, r_inv


def ckf_step(st: CkfState, models: list[SensorModel], pm: ProcessModel, z_all) -> CkfState:
    """One measurement update of the centralized filter followed by prediction."""
    h_c, r_inv = stack_sensors(models)
    z_c = np.concatenate([np.atleast_1d(z) for z in z_all])
    info = h_c.T @ r_inv @ h_c
    m_c = _sym(spd_inverse(spd_inverse(st.p_prior) + info))
    x_post = st.x_prior + m_c @ (h_c.T @ r_inv @ z_c - info @ st.x_prior)
    bqb = pm.b @ pm.q_cov @ pm.b.T
    return CkfState(
        x_prior=pm.a @ x_post,
        p_prior=_sym(pm.a @ m_c @ pm.a.T + bqb),
        x_post=x_post,
        m_post=m_c,
    )


def dkf_local_update(st: DkfNodeState, g: np.ndarray, s: np.ndarray, pm: ProcessModel) -> DkfNodeState:
    """Local Kalman update driven by consensus estimates ``g`` and ``s``.

    ``M = (P^-1 + s)^-1``, ``x_post = x_prior + M (g - s x_prior)``, then
    ``P <- A M A' + B (nQ) B'`` and ``x_prior <- A x_post``.
    """
    m_kf = _sym(spd_inverse(spd_inverse(st.p_kf) + s))
    innov = g - (s @ st.x_prior[..., None])[..., 0]
    x_post = st.x_prior + (m_kf @ innov[..., None])[..., 0]
    bqb = pm.b @ st.q_scaled @ pm.b.T
    return replace(
        st,
        x_prior=x_post @ pm.a.T,
        p_kf=_sym(pm.a @ m_kf @ pm.a.T + bqb),
        x_post=x_post,
        m_kf=m_kf,
    )


def exact_averages(models: list[SensorModel], z_all) -> tuple[np.ndarray, np.ndarray]:
    """Network averages ``(S^c, g^c)`` of the per-node information terms."""
    n = len(models)
    s_c = sum(s.h.T @ s.r_inv @ s.h for s in models) / n
    g_c = sum(s.h.T @ s.r_inv @ np.atleast_1d(z) for s, z in zip(models, z_all)) / n
    return _sym(s_c), g_c
