"""Scenario orchestration: truth, CKF and the distributed variants side by side.

Algorithms
----------
``ckf``  centralized filter on the stacked measurements (always computed, it
         is the reference for every error trace).
``a0``   local filters driven by the asymptotic consensus filters.
``a1``   as ``a0`` until every element of the node's band-pass output has been
         detected by :class:`~mintime_dkf.mintime.MinTimeDetector`, then the
         detected limit replaces the filter output.
``a2``   as ``a1`` with :class:`~mintime_dkf.robust.RobustDetector`.

All algorithms share the truth trajectory, the measurement noise and the
consensus-filter trajectory, so their differences come only from how the
inverse-covariance average is obtained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .confilter import ExactBandpass, bandpass_step, initial_bandpass, lowpass_step
from .errors import DKFError, NeverConverged, StepSizeTooLarge, ValidationError
from .graph import Graph, default_step_size, max_step_size, random_connected_graph, stable_step_size
from .kalman import (
    ckf_step,
    dkf_local_update,
    exact_averages,
    initial_ckf,
    initial_dkf,
    spd_inverse,
)
from .mintime import MatrixConsensus, MinTimeDetector
from .robust import RobustDetector
from .sysmodel import ContinuousModel, ProcessModel, SensorModel, discretize, information_terms, measure, noise_rng, step_process

log = logging.getLogger(__name__)

ALGORITHMS = ("ckf", "a0", "a1", "a2")
ARITHMETICS = ("auto", "float", "exact")

# noise stream identifiers for noise_rng
_PROCESS, _MEASURE, _EXCHANGE = 0, 1, 2


@dataclass(frozen=True)
class RandomGraphSpec:
    n: int
    edge_probability: float
    seed: int

    def build(self) -> Graph:
        return random_connected_graph(self.n, self.edge_probability, self.seed)


@dataclass(eq=False)
class ScenarioConfig:
    """Everything needed to reproduce one run.

    ``step_size`` is the consensus gain (``None``: 0.9 times the stability
    bound of the filters); ``sample_time`` is both the discretization period of
    a continuous process and the duration of one step (``None``: equal to
    ``step_size``, as in the reference experiment).
    """

    process: ProcessModel | ContinuousModel
    sensors: list[SensorModel]
    graph: Graph | RandomGraphSpec
    steps: int = 200
    step_size: float | None = None
    sample_time: float | None = None
    sigma_threshold: float | None = None
    rho: float | None = None
    algorithms: tuple[str, ...] = ("ckf", "a0", "a1")
    run_seed: int = 0
    g_oracle: bool = False
    arithmetic: str = "auto"
    x0: np.ndarray | None = None
    p0: float = 10.0
    exchange_noise_std: float = 0.0
    a0_tolerance: float = 1e-3
    g_error_tol: float = 1e-9
    symmetric: bool = True
    feed: str = "highpass"
    name: str = ""

    _graph_cache: Graph | None = field(default=None, init=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.sensors)

    def resolved_graph(self) -> Graph:
        if self._graph_cache is None:
            self._graph_cache = self.graph.build() if isinstance(self.graph, RandomGraphSpec) else self.graph
        return self._graph_cache

    def resolved_step_size(self) -> float:
        if self.step_size is not None:
            return float(self.step_size)
        return default_step_size(self.resolved_graph())

    def resolved_sample_time(self) -> float:
        return float(self.sample_time) if self.sample_time is not None else self.resolved_step_size()

    def resolved_sigma_threshold(self) -> float:
        if self.sigma_threshold is not None:
            return float(self.sigma_threshold)
        return 1e-4 if self.exchange_noise_std > 0 else 1e-8

    def resolved_arithmetic(self) -> str:
        """``auto`` means exact detection whenever the exchange is noiseless."""
        if self.arithmetic != "auto":
            return self.arithmetic
        return "float" if self.exchange_noise_std > 0 else "exact"

    def process_model(self) -> ProcessModel:
        if isinstance(self.process, ContinuousModel):
            return discretize(self.process, self.resolved_sample_time())
        return self.process

    def initial_state(self) -> np.ndarray:
        m = self.process_model().dim
        return np.zeros(m) if self.x0 is None else np.asarray(self.x0, dtype=float)


def validate(cfg: ScenarioConfig) -> None:
    """Raise ValidationError for anything that would make the run meaningless."""
    if not cfg.sensors:
        raise ValidationError("sensors: at least one sensor model is required")
    g = cfg.resolved_graph()
    if g.n != cfg.n:
        raise ValidationError(f"graph has {g.n} nodes but {cfg.n} sensors are given")
    pm = cfg.process_model()
    for i, s in enumerate(cfg.sensors):
        if s.h.shape[1] != pm.dim:
            raise ValidationError(f"sensors[{i}].h has {s.h.shape[1]} columns, state dimension is {pm.dim}")
    if cfg.steps < 0:
        raise ValidationError("steps must be non-negative")
    bad = [a for a in cfg.algorithms if a not in ALGORITHMS]
    if bad:
        raise ValidationError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
    if cfg.arithmetic not in ARITHMETICS:
        raise ValidationError(f"arithmetic must be one of {ARITHMETICS}")
    if cfg.resolved_arithmetic() == "exact" and cfg.exchange_noise_std > 0:
        raise ValidationError("exact arithmetic cannot be combined with exchange noise")
    if cfg.exchange_noise_std < 0:
        raise ValidationError("exchange_noise_std must be non-negative")
    if cfg.x0 is not None and np.shape(cfg.x0) != (pm.dim,):
        raise ValidationError(f"x0 must have length {pm.dim}")
    eps = cfg.resolved_step_size()
    if not eps > 0:
        raise StepSizeTooLarge(f"step_size must be positive, got {eps}")
    if g.edges:
        bound = max_step_size(g)
        if eps >= bound:
            raise StepSizeTooLarge(
                f"step_size {eps} violates the consensus bound 0 < step_size < 1/max degree = {bound}"
            )
        if eps >= stable_step_size(g):
            log.warning("step_size %g exceeds the filter stability bound %g", eps, stable_step_size(g))
    if cfg.resolved_sample_time() <= 0:
        raise ValidationError("sample_time must be positive")


@dataclass(eq=False)
class RunResult:
    """Per-step traces of one run.

    Shapes use ``T = steps`` and ``n`` nodes. ``s_trace`` has ``T + 1`` rows:
    row ``t`` is the band-pass output after ``t`` rounds, which is what the
    local filters use at step ``t - 1``.
    """

    config: ScenarioConfig
    step_size: float
    sample_time: float
    s_exact: np.ndarray
    truth: np.ndarray
    ckf: np.ndarray
    estimates: dict[str, np.ndarray]
    errors: dict[str, np.ndarray]
    s_trace: np.ndarray
    g_error: np.ndarray
    detections: dict[str, list[dict]]
    detect_step: dict[str, list[int | None]]
    assembled: dict[str, np.ndarray]
    a0_step: list[int | None]
    cmp_a0: np.ndarray | None = None
    cmp_a1: np.ndarray | None = None
    cmp_mask: np.ndarray | None = None


def _element_entries(flat_row, m):
    return [flat_row[h * m:(h + 1) * m] for h in range(m)]


def _consensus_trajectory(cfg, graph, u_mats, eps, steps):
    """Band-pass outputs for all rounds plus the detectors' view of them."""
    n, m = u_mats.shape[0], u_mats.shape[1]
    sigma = cfg.resolved_sigma_threshold()
    exact = cfg.resolved_arithmetic() == "exact"
    # every input reaches every node within n - 1 rounds
    quiet = n - 1
    banks = {}
    if "a1" in cfg.algorithms:
        banks["a1"] = [
            MatrixConsensus(m, lambda: MinTimeDetector(sigma, exact=exact, quiet_rounds=quiet), cfg.symmetric)
            for _ in range(n)
        ]
    if "a2" in cfg.algorithms:
        banks["a2"] = [
            MatrixConsensus(
                m,
                lambda: RobustDetector(cfg.rho, cfg.exchange_noise_std, sigma, min_rounds=quiet),
                cfg.symmetric,
            )
            for _ in range(n)
        ]

    s, p = initial_bandpass(u_mats)
    ex = ExactBandpass(graph, u_mats, eps, cfg.feed) if exact and "a1" in banks else None
    # minimality bound 4n + 2 plus up to n - 1 leading quiet rounds, with slack
    exact_cap = 6 * n + 2
    s_trace = np.empty((steps + 1, n, m, m))
    for t in range(steps + 1):
        if t > 0:
            if ex is not None:
                ex.step()
                s, p = ex.s_float(), ex.p_float()
            else:
                s, p = bandpass_step(s, p, graph, u_mats, eps, cfg.feed)
        s_trace[t] = s
        if not banks or all(mc.done for bank in banks.values() for mc in bank):
            continue
        observed = s
        if cfg.exchange_noise_std > 0:
            observed = s + np.stack(
                [cfg.exchange_noise_std * noise_rng(cfg.run_seed, _EXCHANGE, i, t).standard_normal((m, m)) for i in range(n)]
            )
        exact_rows = ex.s_entries() if ex is not None else None
        for name, bank in banks.items():
            for i, mc in enumerate(bank):
                if mc.done:
                    continue
                try:
                    if name == "a1" and exact_rows is not None:
                        mc.push(_element_entries(exact_rows[i], m))
                    else:
                        mc.push(observed[i])
                except DKFError as exc:
                    raise type(exc)(f"{name} detector at node {i}, round {t}: {exc}") from exc
        if ex is not None and (all(mc.done for mc in banks["a1"]) or t >= exact_cap):
            ex = None
    return s_trace, banks


def _tube_entry(s_trace: np.ndarray, s_c: np.ndarray, tol: float) -> list[int | None]:
    """First round after which each node's output stays within the tube."""
    dev = np.abs(s_trace - s_c).reshape(s_trace.shape[0], s_trace.shape[1], -1).max(axis=2)
    inside = dev <= tol * np.abs(s_c).max()
    out = []
    for i in range(s_trace.shape[1]):
        col = inside[:, i]
        if not col[-1]:
            out.append(None)
            continue
        outside = np.flatnonzero(~col)
        out.append(int(outside[-1] + 1) if outside.size else 0)
    return out


def _common_prior_estimate(x_prior, p_node, g, s):
    m_mat = spd_inverse(spd_inverse(p_node) + s)
    innov = g - (s @ x_prior[..., None])[..., 0]
    return x_prior + (m_mat @ innov[..., None])[..., 0]


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Simulate ``cfg.steps`` synchronous rounds of every requested algorithm."""
    validate(cfg)
    graph = cfg.resolved_graph()
    pm = cfg.process_model()
    sensors = cfg.sensors
    n, m, steps = cfg.n, pm.dim, cfg.steps
    eps = cfg.resolved_step_size()

    u_mats = np.stack([information_terms(s, np.zeros(s.h.shape[0]))[0] for s in sensors])
    s_c = exact_averages(sensors, [np.zeros(s.h.shape[0]) for s in sensors])[0]
    s_trace, banks = _consensus_trajectory(cfg, graph, u_mats, eps, steps)

    detect_step, assembled, detections = {}, {}, {}
    for name, bank in banks.items():
        detect_step[name] = [mc.done_at for mc in bank]
        assembled[name] = np.stack([mc.assemble() if mc.done else np.full((m, m), np.nan) for mc in bank])
        detections[name] = [
            {"node": i, "element": [h, l], "step": det.result.detected_at, "phi": det.result.phi}
            for i, mc in enumerate(bank)
            for (h, l), det in mc.detectors.items()
            if det.detected
        ]

    dkf_algs = [a for a in ("a0", "a1", "a2") if a in cfg.algorithms]
    truth = np.empty((steps, m))
    ckf_est = np.empty((steps, m))
    estimates = {a: np.empty((steps, n, m)) for a in dkf_algs}
    errors = {a: np.empty((steps, n)) for a in dkf_algs}
    g_error = np.empty((steps, n))
    want_cmp = "a0" in cfg.algorithms and "a1" in cfg.algorithms
    th_a0 = np.full((steps, n), np.nan) if want_cmp else None
    th_a1 = np.full((steps, n), np.nan) if want_cmp else None
    th_mask = np.zeros((steps, n), dtype=bool) if want_cmp else None

    x = cfg.initial_state()
    ckf = initial_ckf(m, n, cfg.p0)
    nodes = {a: initial_dkf(pm, n, cfg.p0, nodes=n) for a in dkf_algs}
    g = np.zeros((n, m))

    for k in range(steps):
        truth[k] = x
        z_all = [measure(s, x, noise_rng(cfg.run_seed, _MEASURE, i, k)) for i, s in enumerate(sensors)]
        u_vecs = np.stack([information_terms(s, z)[1] for s, z in zip(sensors, z_all)])
        g_c = u_vecs.mean(axis=0)
        g = lowpass_step(g, graph, u_vecs, eps)
        g_used = np.tile(g_c, (n, 1)) if cfg.g_oracle else g
        g_error[k] = np.linalg.norm(g_used - g_c, axis=1)

        x_prior_c, p_prior_c = ckf.x_prior, ckf.p_prior
        try:
            ckf = ckf_step(ckf, sensors, pm, z_all)
        except DKFError as exc:
            raise type(exc)(f"ckf at step {k}: {exc}") from exc
        ckf_est[k] = ckf.x_post

        s_filter = s_trace[k + 1]
        s_used = {"a0": s_filter}
        for name in ("a1", "a2"):
            if name in nodes:
                switched = np.array([d is not None and k >= d for d in detect_step[name]])
                s_used[name] = np.where(switched[:, None, None], assembled[name], s_filter)

        for name in dkf_algs:
            try:
                nodes[name] = dkf_local_update(nodes[name], g_used, s_used[name], pm)
            except DKFError as exc:
                raise type(exc)(f"{name} at step {k}: {exc}") from exc
            estimates[name][k] = nodes[name].x_post
            errors[name][k] = np.linalg.norm(nodes[name].x_post - ckf.x_post, axis=1)

        if want_cmp:
            p_node = np.tile(n * p_prior_c, (n, 1, 1))
            xp = np.tile(x_prior_c, (n, 1))
            th_a0[k] = np.linalg.norm(_common_prior_estimate(xp, p_node, g_used, s_used["a0"]) - ckf.x_post, axis=1)
            th_a1[k] = np.linalg.norm(_common_prior_estimate(xp, p_node, g_used, s_used["a1"]) - ckf.x_post, axis=1)
            after = np.array([d is not None and k >= d for d in detect_step["a1"]])
            th_mask[k] = after & (g_error[k] <= cfg.g_error_tol)

        x = step_process(pm, x, noise_rng(cfg.run_seed, _PROCESS, k))

    return RunResult(
        config=cfg,
        step_size=eps,
        sample_time=cfg.resolved_sample_time(),
        s_exact=s_c,
        truth=truth,
        ckf=ckf_est,
        estimates=estimates,
        errors=errors,
        s_trace=s_trace,
        g_error=g_error,
        detections=detections,
        detect_step=detect_step,
        assembled=assembled,
        a0_step=_tube_entry(s_trace, s_c, cfg.a0_tolerance),
        cmp_a0=th_a0,
        cmp_a1=th_a1,
        cmp_mask=th_mask,
    )


def time_to_consensus_stats(res: RunResult, eps_seconds: float | None = None) -> dict[str, dict]:
    """Shortest, longest and average time (seconds) for nodes to know ``S^c``.

    A1/A2 time is ``eps_seconds`` times the round of the last element
    detection. A0 time is the round after which ``max|S_i - S^c|`` stays
    below ``a0_tolerance * max|S^c|`` for the rest of the run. Nodes that never
    get there are listed under ``never_converged`` instead of raising.
    """
    dt = res.sample_time if eps_seconds is None else eps_seconds
    per_alg = {}
    if "a0" in res.config.algorithms:
        per_alg["a0"] = res.a0_step
    for name, steps in res.detect_step.items():
        per_alg[name] = steps
    table = {}
    for name, steps in per_alg.items():
        ok = [s for s in steps if s is not None]
        times = np.array(ok, dtype=float) * dt
        table[name] = {
            "shortest": float(times.min()) if ok else None,
            "longest": float(times.max()) if ok else None,
            "average": float(times.mean()) if ok else None,
            "never_converged": [i for i, s in enumerate(steps) if s is None],
        }
    return table


def require_converged(table: dict[str, dict]) -> None:
    """Raise NeverConverged if any algorithm has nodes that never reached ``S^c``."""
    bad = {k: v["never_converged"] for k, v in table.items() if v["never_converged"]}
    if bad:
        raise NeverConverged(f"nodes without consensus: {bad}")


def error_trace(res: RunResult, node: int, algorithm: str) -> np.ndarray:
    """Per-step ``||x_i - x_c||_2`` of one node under one algorithm."""
    if algorithm == "ckf":
        return np.zeros(res.truth.shape[0])
    if algorithm not in res.errors:
        raise ValidationError(f"algorithm {algorithm!r} was not part of this run")
    return res.errors[algorithm][:, node].copy()


def error_comparison_check(res: RunResult, tol: float = 1e-10) -> dict:
    """Compare common-prior estimation errors of A1 and A0 after detection.

    Only steps after the node's A1 detection where the information-vector
    error is within ``g_error_tol`` are checked.
    """
    if res.cmp_a0 is None:
        raise ValidationError("error comparison needs both a0 and a1 in the run")
    mask = res.cmp_mask
    viol = mask & (res.cmp_a1 > res.cmp_a0 + tol)
    return {
        "checked": int(mask.sum()),
        "violations": int(viol.sum()),
        "max_excess": float(np.max(np.where(mask, res.cmp_a1 - res.cmp_a0, -np.inf))) if mask.any() else None,
        "holds": bool(not viol.any()) if mask.any() else None,
    }

