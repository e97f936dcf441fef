"""Low-pass and band-pass consensus filters and their stacked linear form.

Node states are arrays whose first axis indexes nodes; the filters act
elementwise on any trailing shape (vectors for the low-pass filter, ``m x m``
matrices for the band-pass filter). Every node reads the same pre-step
snapshot, so one call is one synchronous round.

The band-pass filter keeps an internal state ``p_band`` that diffuses the
input differences. With ``feed="highpass"`` (the default) the output stage
consumes the high-pass signal ``p_band + U``, whose consensus value is the
network mean of ``U``; ``feed="literal"`` consumes ``p_band`` alone, which
converges to a node-dependent value whenever the inputs differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import StepSizeTooLarge, ValidationError
from .graph import Graph, derive_matrices

FEEDS = ("highpass", "literal")


def _check_eps(graph: Graph, eps: float) -> None:
    if not eps > 0:
        raise StepSizeTooLarge(f"step size must be positive, got {eps}")
    if graph.edges:
        bound = 1.0 / max(derive_matrices(graph)[1].diagonal())
        if eps >= bound:
            raise StepSizeTooLarge(f"step size {eps} violates 0 < eps < {bound}")


def _flat(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(x.shape[0], -1)


def lowpass_step(g: np.ndarray, graph: Graph, inputs: np.ndarray, eps: float) -> np.ndarray:
    """``g_i + eps [sum_{N_i} (g_j - g_i) + sum_{N_i + i} (u_j - g_i)]`` for all i."""
    _check_eps(graph, eps)
    adj, deg, lap = derive_matrices(graph)
    eye = np.eye(graph.n)
    gf, uf = _flat(g), _flat(inputs)
    out = gf + eps * (-lap @ gf + (adj + eye) @ uf - (deg + eye) @ gf)
    return out.reshape(np.shape(g))


def bandpass_step(s, p_band, graph: Graph, inputs, eps: float, feed: str = "highpass"):
    """One synchronous round of the band-pass filter; returns ``(s, p_band)``.

    ``p_i <- p_i + eps sum_{N_i} [(p_j - p_i) + (U_j - U_i)]`` and
    ``s_i <- s_i + eps [sum_{N_i} (s_j - s_i) + sum_{N_i + i} (q_j - s_i)]``
    with ``q = p + U`` (highpass) or ``q = p`` (literal).
    """
    if feed not in FEEDS:
        raise ValidationError(f"feed must be one of {FEEDS}")
    _check_eps(graph, eps)
    adj, deg, lap = derive_matrices(graph)
    eye = np.eye(graph.n)
    sf, pf, uf = _flat(s), _flat(p_band), _flat(inputs)
    q = pf + uf if feed == "highpass" else pf
    s_new = sf + eps * (-lap @ sf + (adj + eye) @ q - (deg + eye) @ sf)
    p_new = pf - eps * (lap @ (pf + uf))
    return s_new.reshape(np.shape(s)), p_new.reshape(np.shape(p_band))


def initial_bandpass(inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Output state starts at each node's own input, internal state at zero."""
    inputs = np.asarray(inputs, dtype=float)
    return inputs.copy(), np.zeros_like(inputs)


class ExactBandpass:
    """Band-pass filter evolved in exact rational arithmetic.

    Floats in the graph weights, step size and inputs are converted exactly
    (every double is a dyadic rational), so the trajectory is the exact
    evolution of the float-specified filter. Used to feed detectors whose
    Hankel tests must not be polluted by rounding.
    """

    def __init__(self, graph: Graph, inputs: np.ndarray, eps: float, feed: str = "highpass"):
        from flint import fmpq_mat

        if feed not in FEEDS:
            raise ValidationError(f"feed must be one of {FEEDS}")
        _check_eps(graph, eps)
        adj, deg, lap = derive_matrices(graph)
        n = graph.n
        self.shape = np.shape(inputs)
        uf = _flat(inputs)
        k = uf.shape[1]
        e = to_fmpq(eps)
        eye = _qmat(np.eye(n))
        a_q, d_q = _qmat(adj), _qmat(deg)
        l_q = d_q - a_q
        self._m_ss = eye - (l_q + d_q + eye) * e
        self._m_sq = (a_q + eye) * e
        self._m_pp = eye - l_q * e
        self._m_pu = -(l_q * e)
        self._u = _qmat(uf)
        self._highpass = feed == "highpass"
        self.s = _qmat(uf)
        self.p = fmpq_mat(n, k)

    def step(self) -> None:
        q = self.p + self._u if self._highpass else self.p
        self.s, self.p = self._m_ss * self.s + self._m_sq * q, self._m_pp * self.p + self._m_pu * self._u

    def s_entries(self) -> list[list]:
        """Exact output state as nested lists ``[node][flat element]``."""
        return [list(r) for r in self.s.table()]

    def s_float(self) -> np.ndarray:
        return _float_mat(self.s).reshape(self.shape)

    def p_float(self) -> np.ndarray:
        return _float_mat(self.p).reshape(self.shape)


def to_fmpq(x):
    """Exact rational for a float, int, Fraction or fmpq."""
    from flint import fmpq

    if isinstance(x, fmpq):
        return x
    f = Fraction(x) if not isinstance(x, Fraction) else x
    return fmpq(f.numerator, f.denominator)


def fmpq_to_float(x) -> float:
    return int(x.p) / int(x.q)


def _qmat(a: np.ndarray):
    from flint import fmpq_mat

    a = np.atleast_2d(np.asarray(a, dtype=float))
    return fmpq_mat(a.shape[0], a.shape[1], [to_fmpq(float(v)) for v in a.ravel()])


def _float_mat(m) -> np.ndarray:
    return np.array([[fmpq_to_float(v) for v in row] for row in m.table()])


@dataclass(frozen=True, eq=False)
class StackedConsensusSystem:
    """Per-element linear form ``x(k+1) = a_mat x(k) + b_mat u``, ``y = c_row x``
    with state ``x = [s; p]`` over all nodes."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    c_row: np.ndarray
    form: str


STACKED_FORMS = ("printed", "literal", "highpass")


def build_stacked_system(graph: Graph, eps: float, node: int, form: str = "printed") -> StackedConsensusSystem:
    """Assemble the ``2n x 2n`` stacked system for one matrix element.

    ``printed`` uses the blocks ``[I - eps L - eps D, eps A; 0, I - eps L]``
    and input ``[0; -eps L]``. ``literal`` and ``highpass`` are the exact
    vectorizations of :func:`bandpass_step` for the corresponding feed; they
    share the system matrix ``[I - eps (L + D + I), eps (A + I); 0, I - eps L]``.
    """
    if form not in STACKED_FORMS:
        raise ValidationError(f"form must be one of {STACKED_FORMS}")
    adj, deg, lap = derive_matrices(graph)
    n = graph.n
    eye, zero = np.eye(n), np.zeros((n, n))
    if form == "printed":
        a_mat = np.block([[eye - eps * lap - eps * deg, eps * adj], [zero, eye - eps * lap]])
        b_mat = np.vstack([zero, -eps * lap])
    else:
        a_mat = np.block([[eye - eps * (lap + deg + eye), eps * (adj + eye)], [zero, eye - eps * lap]])
        top = eps * (adj + eye) if form == "highpass" else zero
        b_mat = np.vstack([top, -eps * lap])
    c_row = np.zeros(2 * n)
    c_row[node] = 1.0
    return StackedConsensusSystem(a_mat, b_mat, c_row, form)


@dataclass(frozen=True)
class SpectrumReport:
    unit_eigs: int
    stable: bool
    max_other_modulus: float


def spectrum_check(sys: StackedConsensusSystem, tol: float = 1e-9) -> SpectrumReport:
    """Classify eigenvalues: how many sit at 1, and whether the rest lie in the
    closed unit disk."""
    ev = np.linalg.eigvals(sys.a_mat)
    at_one = np.abs(ev - 1.0) <= tol
    others = np.abs(ev[~at_one])
    max_other = float(others.max()) if others.size else 0.0
    stable = bool(at_one.sum() == 1 and np.all(np.abs(ev) <= 1.0 + tol))
    return SpectrumReport(int(at_one.sum()), stable, max_other)
