"""Programmatic builders for the bundled scenarios."""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .harness import RandomGraphSpec, ScenarioConfig
from .sysmodel import ContinuousModel, SensorModel

H1 = np.eye(2)
H2 = np.array([[1.0, 2.0], [2.0, 1.0]])


def circular_target() -> ContinuousModel:
    """Target on a noisy circle: ``f = [[0, -3], [3, 0]]``, ``g = I``, ``Q = 25 I``."""
    return ContinuousModel(np.array([[0.0, -3.0], [3.0, 0.0]]), np.eye(2), 25.0 * np.eye(2))


def reference_sensors(n: int) -> list[SensorModel]:
    """First half of the nodes sense with ``H1 = I``, the rest with ``H2``;
    node ``i`` (1-based) has ``R_i = 0.01 sqrt(i) I``."""
    out = []
    for i in range(1, n + 1):
        h = H1 if i <= (n + 1) // 2 else H2
        out.append(SensorModel(h, 0.01 * np.sqrt(i) * np.eye(2)))
    return out


def paper_sec4(**overrides) -> ScenarioConfig:
    kw = dict(
        name="scenario_paper_sec4",
        process=circular_target(),
        sensors=reference_sensors(20),
        graph=RandomGraphSpec(20, 0.2, 3),
        steps=2000,
        step_size=0.015,
        sample_time=0.015,
        algorithms=("ckf", "a0", "a1"),
        run_seed=7,
        g_oracle=True,
        arithmetic="exact",
        x0=np.array([10.0, 0.0]),
    )
    kw.update(overrides)
    return ScenarioConfig(**kw)


def small_n5(**overrides) -> ScenarioConfig:
    kw = dict(
        name="scenario_small_n5",
        process=circular_target(),
        sensors=reference_sensors(5),
        graph=Graph(5, ((0, 1), (1, 2), (2, 3), (3, 4), (0, 2))),
        steps=300,
        step_size=0.1,
        sample_time=0.015,
        algorithms=("ckf", "a0", "a1"),
        run_seed=1,
        g_oracle=False,
        x0=np.array([10.0, 0.0]),
    )
    kw.update(overrides)
    return ScenarioConfig(**kw)


def noisy_a2(**overrides) -> ScenarioConfig:
    kw = dict(
        name="scenario_noisy_a2",
        process=circular_target(),
        sensors=reference_sensors(5),
        graph=Graph(5, tuple((i, j) for i in range(5) for j in range(i + 1, 5))),
        steps=300,
        step_size=0.02,
        sample_time=0.015,
        algorithms=("ckf", "a0", "a1", "a2"),
        run_seed=2,
        g_oracle=True,
        exchange_noise_std=1e-3,
        x0=np.array([10.0, 0.0]),
    )
    kw.update(overrides)
    return ScenarioConfig(**kw)


BUILDERS = {"scenario_paper_sec4": paper_sec4, "scenario_small_n5": small_n5, "scenario_noisy_a2": noisy_a2}
