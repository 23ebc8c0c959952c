"""Cyclic positioning protocol in logical time.

Each cycle: pick a surface configuration from the current beliefs, apply it
(broadcast), let every user measure one RSS sample at their true block, and
fold the measurements back into the beliefs. After the last cycle each user's
estimate is the block with the largest accumulated posterior.

Users are static for the whole run and the response step is lossless, so one
trial is fully determined by (scene, config, true blocks, rng streams). Pattern
selection draws only from ``rng``; measurement noise draws only from
``noise_rng``, which lets a harness pair noise across different selectors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channel import GainTable, ReflectionModel, build_gain_table, mean_rss, sample_rss
from .inference import BeliefState, LossParams, positioning_loss_from_mu, update_prior
from .objective import CycleObjective
from .optimizer import OptimizerSettings, co_optimize


@dataclass
class CycleTiming:
    """Slot durations in seconds. Carried into reports only; the simulation
    runs in logical time."""

    cycle_seconds: float = 1.0
    optimize_seconds: float = 0.4
    broadcast_seconds: float = 0.1
    measure_seconds: float = 0.5

    def validate(self):
        for name in ("cycle_seconds", "optimize_seconds",
                     "broadcast_seconds", "measure_seconds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class ProtocolConfig:
    num_cycles: int = 3
    num_users: int = 1
    loss_alpha: float = 1000.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    timing: CycleTiming = field(default_factory=CycleTiming)
    seed: int | None = None

    def validate(self):
        if self.num_cycles < 1:
            raise ValueError("need at least one cycle")
        if self.num_users < 1:
            raise ValueError("need at least one user")
        if self.loss_alpha < 0:
            raise ValueError("loss_alpha must be non-negative")
        self.optimizer.validate()
        self.timing.validate()


@dataclass
class CycleRecord:
    cycle: int              # 1-based
    pattern: np.ndarray     # element states, or whatever the selector controls
    rss: np.ndarray         # (I,) measured values, dB
    posteriors: np.ndarray  # (I, N) belief rows after the update
    loss: float             # exact loss of the chosen pattern under the pre-update beliefs
    opt_seconds: float      # wall clock spent inside the selector
    evals: int              # loss evaluations spent inside the selector


@dataclass
class PatternChoice:
    """What a selector hands back for one cycle."""

    pattern: np.ndarray  # representation of the choice, kept for the record
    mu: np.ndarray       # (N,) block -> mean RSS map under that choice
    evals: int = 0


class OptimizedSelector:
    """Per-cycle configuration search minimizing the confusion loss."""

    def __init__(self, table: GainTable, params: LossParams,
                 settings: OptimizerSettings):
        self.table = table
        self.params = params
        self.settings = settings

    def select(self, beliefs: BeliefState, rng) -> PatternChoice:
        table = self.table
        if table.n_elements == 0:  # nothing to configure, direct path only
            states = np.zeros(0, dtype=int)
            return PatternChoice(states, mean_rss(table, states), 0)
        objective = CycleObjective(table, beliefs, self.params)
        result = co_optimize(objective, table.n_elements, table.num_states,
                             self.settings, rng)
        return PatternChoice(result.states, mean_rss(table, result.states),
                             result.evals)


def run_cycle(state: BeliefState, table: GainTable, true_blocks, cfg: ProtocolConfig,
              rng, *, cycle: int = 1, selector=None, params: LossParams | None = None,
              noise_rng=None):
    """One optimize/broadcast/measure/respond round.

    Returns (CycleRecord, new BeliefState); ``state`` is not mutated.
    """
    scene = table.scene
    sigma = scene.noise_sigma_db
    if params is None:
        params = LossParams.for_scene(scene, cfg.loss_alpha)
    if selector is None:
        selector = OptimizedSelector(table, params, cfg.optimizer)
    if noise_rng is None:
        noise_rng = rng
    true_blocks = np.asarray(true_blocks, dtype=int)

    t0 = time.perf_counter()
    choice = selector.select(state, rng)
    opt_seconds = time.perf_counter() - t0

    loss = positioning_loss_from_mu(choice.mu, state, params, sigma)
    rss = sample_rss(choice.mu[true_blocks], sigma, noise_rng)
    posteriors = np.empty_like(state.priors)
    for i in range(state.n_users):
        posteriors[i] = update_prior(state.priors[i], choice.mu, float(rss[i]), sigma)

    record = CycleRecord(cycle=cycle, pattern=np.asarray(choice.pattern).copy(),
                         rss=rss, posteriors=posteriors.copy(), loss=loss,
                         opt_seconds=opt_seconds, evals=choice.evals)
    return record, BeliefState(posteriors)


def run_positioning(cfg: ProtocolConfig, scene, true_blocks, rng=None, *,
                    table: GainTable | None = None, selector=None, noise_rng=None):
    """Full K-cycle run for one set of static users.

    Returns (estimates, records): per-user block indices from the final
    posterior, and one CycleRecord per cycle. Beliefs start uniform at 1/N.
    """
    cfg.validate()
    if table is None:
        table = build_gain_table(scene, ReflectionModel.from_scene(scene))
    true_blocks = np.asarray(true_blocks, dtype=int)
    if true_blocks.shape != (cfg.num_users,):
        raise ValueError("need one true block per user")
    if true_blocks.size and (true_blocks.min() < 0 or true_blocks.max() >= table.n_blocks):
        raise ValueError("true block index out of range")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if noise_rng is None:
        noise_rng = np.random.default_rng(int(rng.integers(0, 2 ** 63)))
    params = LossParams.for_scene(table.scene, cfg.loss_alpha)
    if selector is None:
        selector = OptimizedSelector(table, params, cfg.optimizer)

    state = BeliefState.uniform(cfg.num_users, table.n_blocks)
    records = []
    for k in range(cfg.num_cycles):
        record, state = run_cycle(state, table, true_blocks, cfg, rng,
                                  cycle=k + 1, selector=selector, params=params,
                                  noise_rng=noise_rng)
        records.append(record)
    estimates = np.argmax(state.priors, axis=1)
    return estimates, records


def positioning_error(estimates, true_blocks, scene) -> float:
    """Mean distance in meters between estimated and true block centers."""
    est = np.asarray(estimates, dtype=int)
    true = np.asarray(true_blocks, dtype=int)
    if est.shape != true.shape:
        raise ValueError("estimates and ground truth must have equal length")
    diff = scene.block_centers[est] - scene.block_centers[true]
    return float(np.linalg.norm(diff, axis=1).mean())
