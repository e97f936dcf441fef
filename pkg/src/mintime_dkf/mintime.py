"""Minimum-time consensus detection from a node's own output history.

A scalar signal produced by a stable linear iteration with one unit
eigenvalue satisfies a linear recurrence. Its first differences then lose
Hankel rank once enough samples have been seen; the kernel vector ``beta``
of the defective Hankel matrix gives the limit in closed form,

    phi = sum_i y(i) beta_i / sum_i beta_i.

Two arithmetic modes are offered. The float mode follows the usual
numerical recipe (SVD, relative singular-value threshold). The exact mode
takes rational observations and tests exact singularity, which is the only
way to see the true minimal recurrence of long sequences: the Hankel
matrices of a 20-node network have condition numbers far beyond 1e16.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateKernel, NoRootAtOne, NumericalFailure, WrongLength

KERNEL_TOL = 1e-12
DENOM_TOL = 1e-12


def hankel_of_differences(diffs: Sequence[float]) -> np.ndarray:
    """Square Hankel matrix with entry ``(i, j) = diffs[i + j]``."""
    diffs = np.asarray(diffs, dtype=float)
    if diffs.size % 2 != 1:
        raise WrongLength(f"need an odd number of differences, got {diffs.size}")
    k = diffs.size // 2
    idx = np.add.outer(np.arange(k + 1), np.arange(k + 1))
    return diffs[idx]


def final_value(history: Sequence, beta: Sequence):
    """``sum(history[:d+1] * beta) / sum(beta)``; works for floats and rationals."""
    beta = list(beta)
    ys = list(history)[: len(beta)]
    if len(ys) < len(beta):
        raise WrongLength("history shorter than the kernel vector")
    denom = sum(beta)
    if abs(float(denom)) < DENOM_TOL:
        raise NumericalFailure(f"kernel sums to {float(denom):.3e}; final value undefined")
    return sum(y * b for y, b in zip(ys, beta)) / denom


def beta_from_alpha(alpha: Sequence[float]) -> np.ndarray:
    """Coefficients of ``q(t) / (t - 1)`` for monic ``q`` with lower
    coefficients ``alpha[0..d]``.

    ``beta_j = 1 + sum_{i > j} alpha_i`` for ``j < d`` and ``beta_d = 1``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if abs(1.0 + alpha.sum()) > 1e-9:
        raise NoRootAtOne(f"q(1) = {1.0 + alpha.sum():.3e}, expected 0")
    tail = np.concatenate([np.cumsum(alpha[::-1])[::-1][1:], [0.0]])
    return 1.0 + tail


@dataclass(frozen=True)
class Detection:
    beta: tuple
    phi: float
    detected_at: int
    sigma_min: float = 0.0
    exact_phi: object = None


class MinTimeDetector:
    """Accumulates one scalar signal and reports its limit once the
    difference Hankel matrix becomes (numerically) singular.

    Parameters
    ----------
    sigma_threshold : float
        Rank loss is declared when ``sigma_min <= sigma_threshold * max(1, sigma_max)``.
        Ignored in exact mode.
    exact : bool
        Accept rational observations (``fmpq``, ``Fraction``, ints, or floats
        converted exactly) and test exact singularity.
    quiet_rounds : int
        With the default 0, a zero first difference is an immediate detection
        of a constant signal. With ``q > 0``, leading zero differences are
        treated as "nothing has arrived yet": they are dropped (the recurrence
        is shift invariant) and the signal is only declared constant after
        ``q`` of them. In a network, ``q = n - 1`` bounds the rounds it takes
        every node's input to reach every other node.

    Attributes
    ----------
    offset : int
        Number of leading observations dropped; ``history`` starts at
        observation ``offset``.
    """

    def __init__(self, sigma_threshold: float = 1e-8, exact: bool = False, quiet_rounds: int = 0):
        self.sigma_threshold = sigma_threshold
        self.exact = exact
        self.quiet_rounds = int(quiet_rounds)
        self.history: list = []
        self.diffs: list = []
        self.offset = 0
        self._moved = False
        self.result: Detection | None = None

    @property
    def detected(self) -> bool:
        return self.result is not None

    def push(self, y) -> Detection | None:
        """Append one observation; returns the detection once available."""
        if self.result is not None:
            return self.result
        if self.exact:
            from .confilter import to_fmpq

            y = to_fmpq(y)
        else:
            y = float(y)
        if self.history and not self._moved and self.quiet_rounds > 0 and y == self.history[-1]:
            self.offset += 1
            self.history[-1] = y
            if self.offset >= self.quiet_rounds:
                phi = float(y) if not self.exact else _fmpq_float(y)
                self.result = Detection((1.0,), phi, self.offset, 0.0, y if self.exact else None)
            return self.result
        if self.history:
            self._moved = True
            self.diffs.append(y - self.history[-1])
        self.history.append(y)
        if len(self.history) % 2 == 0:
            self.result = self._exact_check() if self.exact else self._float_check()
        return self.result

    @property
    def observations(self) -> int:
        """Number of observations pushed so far, including dropped ones."""
        return self.offset + len(self.history)

    def _float_check(self) -> Detection | None:
        gamma = hankel_of_differences(self.diffs)
        _, sv, vt = np.linalg.svd(gamma)
        if sv[-1] > self.sigma_threshold * max(1.0, sv[0]):
            return None
        v = vt[-1]
        if abs(v[-1]) < KERNEL_TOL:
            raise DegenerateKernel("kernel vector has a vanishing last component")
        beta = v / v[-1]
        phi = final_value(self.history, beta)
        return Detection(tuple(float(b) for b in beta), float(phi), self.observations - 1, float(sv[-1]))

    def _exact_check(self) -> Detection | None:
        from flint import fmpq, fmpq_mat

        k = len(self.diffs) // 2
        d = self.diffs
        if k == 0:
            if d[0] != 0:
                return None
            beta = [fmpq(1)]
        else:
            if _nonsingular_mod_prime(d, k + 1):
                return None
            # The leading k x k block is the previous Hankel matrix, which was
            # non-singular (otherwise we would have stopped earlier). The full
            # matrix is singular iff its Schur complement vanishes, and then
            # the kernel is [lead^{-1}(-col); 1].
            lead = fmpq_mat(k, k, [d[i + j] for i in range(k) for j in range(k)])
            rhs = fmpq_mat(k, 1, [-d[i + k] for i in range(k)])
            try:
                sol = lead.solve(rhs)
            except ZeroDivisionError:
                raise DegenerateKernel("leading Hankel block is singular") from None
            schur = d[2 * k] + sum((d[k + i] * sol[i, 0] for i in range(k)), fmpq(0))
            if schur != 0:
                return None
            beta = [sol[i, 0] for i in range(k)] + [fmpq(1)]
        denom = sum(beta, fmpq(0))
        if denom == 0:
            raise NumericalFailure("kernel sums to zero; final value undefined")
        phi = sum((y * b for y, b in zip(self.history, beta)), fmpq(0)) / denom
        from .confilter import fmpq_to_float

        return Detection(
            tuple(fmpq_to_float(b) for b in beta),
            fmpq_to_float(phi),
            self.observations - 1,
            0.0,
            phi,
        )


def _fmpq_float(x) -> float:
    from .confilter import fmpq_to_float

    return fmpq_to_float(x)


_PRIME = (1 << 61) - 1


def _nonsingular_mod_prime(d, size: int) -> bool:
    """Cheap sufficient test for non-singularity of the exact Hankel matrix.

    A rational matrix whose reduction modulo a prime is non-singular is itself
    non-singular, so the expensive exact rank is only needed when this fails.
    """
    from flint import nmod_mat

    red = []
    for x in d[: 2 * size - 1]:
        q = int(x.q) % _PRIME
        if q == 0:
            return False
        red.append(int(x.p) % _PRIME * pow(q, -1, _PRIME) % _PRIME)
    mat = nmod_mat(size, size, [red[i + j] for i in range(size) for j in range(size)], _PRIME)
    return mat.rank() == size


def symmetric_elements(m: int) -> list[tuple[int, int]]:
    return [(h, l) for h in range(m) for l in range(h, m)]


def all_elements(m: int) -> list[tuple[int, int]]:
    return [(h, l) for h in range(m) for l in range(m)]


class MatrixConsensus:
    """One detector per matrix element of an ``m x m`` signal.

    In symmetric mode only ``h <= l`` is tracked and the assembled matrix is
    mirrored. ``factory`` builds a fresh detector; any object with
    ``push(y) -> Detection | None`` works.
    """

    def __init__(self, m: int, factory: Callable[[], MinTimeDetector] | None = None, symmetric: bool = True):
        self.m = m
        self.symmetric = symmetric
        factory = factory or MinTimeDetector
        self.elements = symmetric_elements(m) if symmetric else all_elements(m)
        self.detectors = {e: factory() for e in self.elements}

    @property
    def done(self) -> bool:
        return all(d.detected for d in self.detectors.values())

    def push(self, entries) -> bool:
        """Feed one matrix observation; ``entries[h][l]`` must be indexable."""
        for (h, l), det in self.detectors.items():
            if not det.detected:
                det.push(entries[h][l])
        return self.done

    @property
    def done_at(self) -> int | None:
        if not self.done:
            return None
        return max(d.result.detected_at for d in self.detectors.values())

    def assemble(self) -> np.ndarray:
        if not self.done:
            raise NumericalFailure("not every element has been detected yet")
        out = np.zeros((self.m, self.m))
        for (h, l), det in self.detectors.items():
            out[h, l] = det.result.phi
            if self.symmetric:
                out[l, h] = det.result.phi
        return out


def matrix_consensus(mc: MatrixConsensus) -> tuple[np.ndarray, int]:
    """Assembled limit matrix and the step by which every element was detected."""
    return mc.assemble(), mc.done_at
