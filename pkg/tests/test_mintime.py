from fractions import Fraction

import numpy as np
import pytest
from flint import fmpq
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mintime_dkf.confilter import ExactBandpass, bandpass_step, initial_bandpass
from mintime_dkf.errors import DegenerateKernel, NoRootAtOne, NumericalFailure, WrongLength
from mintime_dkf.graph import random_connected_graph
from mintime_dkf.mintime import (
    MatrixConsensus,
    MinTimeDetector,
    beta_from_alpha,
    final_value,
    hankel_of_differences,
    matrix_consensus,
)


def run(det, seq):
    for y in seq:
        res = det.push(y)
        if res is not None:
            return res
    return None


def exponential_mix(c, amps, roots, count):
    """``y(k) = c + sum_j amps_j roots_j^k`` for ``k < count``."""
    return [c + sum(a * r**k for a, r in zip(amps, roots)) for k in range(count)]


def test_hankel_layout():
    np.testing.assert_array_equal(hankel_of_differences([4.0]), [[4.0]])
    np.testing.assert_array_equal(hankel_of_differences([1.0, 2.0, 3.0]), [[1, 2], [2, 3]])
    np.testing.assert_array_equal(hankel_of_differences([0, 0, 0]), np.zeros((2, 2)))
    h = hankel_of_differences(np.arange(7.0))
    assert h.shape == (4, 4)
    np.testing.assert_array_equal(h, h.T)
    with pytest.raises(WrongLength):
        hankel_of_differences([1.0, 2.0])


@pytest.mark.parametrize("exact", [False, True])
def test_constant_sequence(exact):
    res = run(MinTimeDetector(exact=exact), [3.5] * 5)
    assert res.detected_at == 1
    assert res.beta == (1.0,)
    assert res.phi == 3.5


@pytest.mark.parametrize("exact", [False, True])
def test_geometric_sequence(exact):
    res = run(MinTimeDetector(exact=exact), [2.0, 1.5, 1.25, 1.125, 1.0625])
    assert res.detected_at == 3
    np.testing.assert_allclose(res.beta, [-0.5, 1.0], atol=1e-12)
    assert res.phi == pytest.approx(1.0, abs=1e-12)


def test_push_after_detection_is_noop():
    det = MinTimeDetector()
    first = run(det, [1.0, 1.0])
    assert det.push(99.0) is first
    assert len(det.history) == 2


def test_detection_invariants():
    seq = exponential_mix(2.0, [1.0, -0.7], [0.5, -0.25], 12)
    det = MinTimeDetector(sigma_threshold=1e-10)
    res = run(det, seq)
    assert res.beta[-1] == 1.0
    gamma = hankel_of_differences(det.diffs)
    assert len(det.diffs) == len(det.history) - 1
    assert np.abs(gamma @ np.array(res.beta)).max() <= 1e-10 * np.linalg.norm(gamma, 2) * np.abs(res.beta).max()


def test_final_value_examples():
    assert final_value([7.0], [1.0]) == 7.0
    assert final_value([2.0, 1.5], [-0.5, 1.0]) == pytest.approx(1.0)
    assert final_value([4.0, 4.0, 4.0], [0.3, -2.0, 1.0]) == pytest.approx(4.0)
    assert final_value([Fraction(2), Fraction(3, 2)], [Fraction(-1, 2), Fraction(1)]) == 1
    with pytest.raises(NumericalFailure):
        final_value([1.0, 2.0], [-1.0, 1.0])
    with pytest.raises(WrongLength):
        final_value([1.0], [0.5, 1.0])


def test_beta_from_alpha_examples():
    np.testing.assert_allclose(beta_from_alpha([-1.0]), [1.0])
    np.testing.assert_allclose(beta_from_alpha([0.5, -1.5]), [-0.5, 1.0])
    a, b = 0.3, -0.6
    q = np.poly([1.0, a, b])  # highest power first
    np.testing.assert_allclose(beta_from_alpha(q[::-1][:-1]), np.poly([a, b])[::-1], atol=1e-12)
    with pytest.raises(NoRootAtOne):
        beta_from_alpha([0.5, -1.0])


@settings(max_examples=60, deadline=None)
@given(roots=st.lists(st.floats(-0.99, 0.99), min_size=0, max_size=6))
def test_beta_from_alpha_divides_out_unit_root(roots):
    q = np.poly([1.0, *roots])[::-1]  # lowest power first, monic
    beta = beta_from_alpha(q[:-1])
    np.testing.assert_allclose(np.convolve(beta, [-1.0, 1.0]), q, atol=1e-9)


rational_root = st.fractions(min_value=Fraction(-9, 10), max_value=Fraction(9, 10), max_denominator=50)


@settings(max_examples=40, deadline=None)
@given(
    roots=st.lists(rational_root, min_size=1, max_size=5, unique=True),
    amps=st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=20), min_size=5, max_size=5),
    c=st.fractions(min_value=-10, max_value=10, max_denominator=20),
)
def test_exact_minimality(roots, amps, c):
    assume(all(r != 0 for r in roots))
    amps = amps[: len(roots)]
    assume(all(a != 0 for a in amps))
    r = len(roots)
    seq = exponential_mix(c, amps, roots, 2 * r + 6)
    res = run(MinTimeDetector(exact=True), seq)
    # r modes plus the unit root: the (r+1)-size Hankel is the first singular one
    assert res.detected_at == 2 * r + 1
    assert res.exact_phi == fmpq(c.numerator, c.denominator)


@pytest.mark.parametrize(
    "roots,amps",
    [([0.5], [1.0]), ([0.5, -0.3], [2.0, 1.0]), ([0.8, 0.2, -0.5], [1.0, -1.0, 0.5])],
)
def test_float_minimality_well_conditioned(roots, amps):
    r = len(roots)
    seq = exponential_mix(3.0, amps, roots, 2 * r + 8)
    res = run(MinTimeDetector(sigma_threshold=1e-10), seq)
    assert res.detected_at in (2 * r + 1, 2 * r + 3)
    assert abs(res.phi - 3.0) <= 1e-8 * max(1.0, abs(res.phi))


def test_shift_invariance():
    seq = exponential_mix(Fraction(1, 3), [Fraction(2), Fraction(-1)], [Fraction(1, 2), Fraction(-1, 3)], 20)
    base = run(MinTimeDetector(exact=True), seq).exact_phi
    for shift in range(1, 5):
        assert run(MinTimeDetector(exact=True), seq[shift:]).exact_phi == base


def test_exact_mode_accepts_mixed_input_types():
    seq = [2, Fraction(3, 2), 1.25, fmpq(9, 8)]
    res = run(MinTimeDetector(exact=True), seq)
    assert res.exact_phi == 1


def test_ramp_has_no_final_value():
    with pytest.raises(NumericalFailure):
        run(MinTimeDetector(), [0.0, 1.0, 2.0, 3.0])


def test_degenerate_kernel():
    det = MinTimeDetector()
    det.history = [0.0, 1e-20, 1e-20, 1.0 + 1e-20]
    det.diffs = [1e-20, 0.0, 1.0]
    with pytest.raises(DegenerateKernel):
        det._float_check()


def test_quiet_rounds_drop_leading_zero_differences():
    tail = exponential_mix(Fraction(5), [Fraction(1)], [Fraction(1, 2)], 8)
    seq = [tail[0]] * 3 + tail
    det = MinTimeDetector(exact=True, quiet_rounds=4)
    res = run(det, seq)
    assert det.offset == 3
    assert res.exact_phi == 5
    assert res.detected_at == 3 + 3
    # without quiet rounds the leading zero difference is read as a constant
    assert run(MinTimeDetector(exact=True), seq).phi == float(tail[0])


def test_quiet_rounds_declare_constant():
    det = MinTimeDetector(quiet_rounds=4)
    res = run(det, [2.0] * 10)
    assert res.detected_at == 4
    assert res.phi == 2.0


def test_bandpass_detection_within_bound_exact():
    n = 6
    g = random_connected_graph(n, 0.4, 3)
    u = np.random.default_rng(0).integers(1, 9, size=(n, 1)).astype(float)
    ex = ExactBandpass(g, u, 0.125)
    dets = [MinTimeDetector(exact=True, quiet_rounds=n - 1) for _ in range(n)]
    for _ in range(4 * n + 2):
        rows = ex.s_entries()
        for det, row in zip(dets, rows):
            det.push(row[0])
        ex.step()
    mean = sum((fmpq(int(v)) for v in u[:, 0]), fmpq(0)) / n
    for det in dets:
        assert det.detected
        assert det.result.detected_at + 1 <= 4 * n + 2
        assert det.result.exact_phi == mean


def test_bandpass_detection_float_matches_long_run_limit():
    n = 3
    g = random_connected_graph(n, 1.0, 0)
    u = np.array([1.0, 2.0, 6.0])
    s, p = initial_bandpass(u)
    det = MinTimeDetector(sigma_threshold=1e-10)
    res = det.push(s[0])
    while res is None:
        s, p = bandpass_step(s, p, g, u, 0.2)
        res = det.push(s[0])
    for _ in range(100_000):
        s, p = bandpass_step(s, p, g, u, 0.2)
    assert res.detected_at + 1 <= 4 * n + 2
    assert res.phi == pytest.approx(s[0], rel=1e-8)


def test_matrix_consensus_symmetric_assembly():
    mc = MatrixConsensus(2)
    assert len(mc.detectors) == 3
    for k in range(8):
        a = 1 + 0.5**k
        mc.push([[a, 2.0], [2.0, 3 - 0.25**k]])
    s, done_at = matrix_consensus(mc)
    np.testing.assert_allclose(s, [[1.0, 2.0], [2.0, 3.0]], atol=1e-12)
    np.testing.assert_array_equal(s, s.T)
    assert done_at == 3


def test_matrix_consensus_scalar_and_full_modes():
    mc = MatrixConsensus(1)
    mc.push([[4.0]])
    mc.push([[4.0]])
    assert matrix_consensus(mc) == (np.array([[4.0]]), 1)
    full = MatrixConsensus(2, symmetric=False)
    assert len(full.detectors) == 4
    with pytest.raises(NumericalFailure):
        full.assemble()
    assert full.done_at is None
