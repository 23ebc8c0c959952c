"""Experiment driver: parameter sweeps over Monte Carlo trials, with baselines.

Three schemes share the measurement pipeline and differ only in how each
cycle's signal pattern is chosen:

  proposed       two-phase configuration search on the confusion loss
  random_config  a uniformly random configuration every cycle
  no_ris         surface removed; the transmitter uses a small antenna array
                 with fresh uniform random per-antenna phases every cycle

Trials are paired: trial t of every scheme (and of every sweep value) draws its
ground-truth blocks and its measurement-noise normals from streams keyed only
by (master_seed, t), so scheme and value comparisons are common-random-number
comparisons. Scheme-internal randomness (optimizer starts, random patterns,
antenna phases) comes from a third stream keyed by (master_seed, t, scheme).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import GainTable, ReflectionModel, build_gain_table, mean_rss, rss_from_field
from .inference import LossParams
from .optimizer import OptimizerSettings
from .protocol import (CycleTiming, OptimizedSelector, PatternChoice, ProtocolConfig,
                       run_positioning, positioning_error)
from .scene import Scene, SceneSpec, build_scene, with_updates

SCHEMES = ("proposed", "random_config", "no_ris")
SWEEP_PARAMETERS = ("sigma", "elements", "states", "cycles", "users", "soi_distance")

# stream labels for per-trial seeding; must never change once results exist
_SCHEME_CODE = {"proposed": 1, "random_config": 2, "no_ris": 3}
_GROUND_TRUTH_TAG = 101
_NOISE_TAG = 102


@dataclass
class SweepSpec:
    parameter: str = "sigma"
    values: tuple = (1.0, 2.0, 4.0)
    trials: int = 200
    schemes: tuple = ("proposed", "random_config")
    master_seed: int = 0
    out_dir: str = "results"
    scene: SceneSpec = field(default_factory=SceneSpec)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    no_ris_antennas: int = 2
    record_timing: bool = True
    threads: int = 1

    def validate(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}; "
                             f"expected one of {SWEEP_PARAMETERS}")
        if len(self.values) < 1:
            raise ValueError("need at least one sweep value")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if len(self.schemes) < 1:
            raise ValueError("need at least one scheme")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
        if self.no_ris_antennas < 1:
            raise ValueError("no_ris_antennas must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self.protocol.validate()

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": list(self.values),
            "trials": self.trials,
            "schemes": list(self.schemes),
            "master_seed": self.master_seed,
            "out_dir": self.out_dir,
            "scene": self.scene.to_dict(),
            "protocol": {
                "num_cycles": self.protocol.num_cycles,
                "num_users": self.protocol.num_users,
                "loss_alpha": self.protocol.loss_alpha,
                "optimizer": {
                    "epsilon": self.protocol.optimizer.epsilon,
                    "z_lower": self.protocol.optimizer.z_lower,
                    "z_upper": self.protocol.optimizer.z_upper,
                    "max_lmcs_moves": self.protocol.optimizer.max_lmcs_moves,
                    "retry_cap": self.protocol.optimizer.retry_cap,
                },
                "timing": {
                    "cycle_seconds": self.protocol.timing.cycle_seconds,
                    "optimize_seconds": self.protocol.timing.optimize_seconds,
                    "broadcast_seconds": self.protocol.timing.broadcast_seconds,
                    "measure_seconds": self.protocol.timing.measure_seconds,
                },
            },
            "no_ris_antennas": self.no_ris_antennas,
            "record_timing": self.record_timing,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        scene = SceneSpec.from_dict(d.pop("scene", {}))
        proto_d = d.pop("protocol", {})
        opt = OptimizerSettings(**proto_d.pop("optimizer", {}))
        timing = CycleTiming(**proto_d.pop("timing", {}))
        protocol = ProtocolConfig(optimizer=opt, timing=timing, **proto_d)
        known = {"parameter", "values", "trials", "schemes", "master_seed",
                 "out_dir", "no_ris_antennas", "record_timing", "threads"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sweep spec keys: {sorted(unknown)}")
        d["values"] = tuple(d.get("values", (1.0, 2.0, 4.0)))
        d["schemes"] = tuple(d.get("schemes", ("proposed", "random_config")))
        return cls(scene=scene, protocol=protocol, **d)


@dataclass
class PointResult:
    """Aggregate for one (scheme, sweep value) cell."""

    scheme: str
    param: str
    value: float
    mean_error_m: float
    stderr_m: float
    mean_opt_seconds: float
    mean_evals: float
    errors: np.ndarray       # (trials,) per-trial mean positioning error
    opt_seconds: np.ndarray  # (trials,) per-trial total selector wall time
    evals: np.ndarray        # (trials,) per-trial total loss evaluations


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list

    def point(self, scheme: str, value) -> PointResult:
        for p in self.points:
            if p.scheme == scheme and p.value == float(value):
                return p
        raise KeyError((scheme, value))


def _square_grid(count: int) -> tuple:
    """Most-square (rows, cols) factorization with rows <= cols."""
    if count == 0:
        return (0, 0)
    if count < 0:
        raise ValueError("element count must be non-negative")
    a = int(np.sqrt(count))
    while count % a:
        a -= 1
    return (a, count // a)


def apply_parameter(scene: SceneSpec, protocol: ProtocolConfig, parameter: str,
                    value) -> tuple:
    """Return (SceneSpec, ProtocolConfig) with one swept knob applied."""
    import dataclasses

    proto = dataclasses.replace(protocol)
    if parameter == "sigma":
        scene = with_updates(scene, noise_sigma_db=float(value))
    elif parameter == "elements":
        scene = with_updates(scene, ris_grid=_square_grid(int(value)))
    elif parameter == "states":
        scene = with_updates(scene, num_states=int(value))
    elif parameter == "cycles":
        proto = dataclasses.replace(proto, num_cycles=int(value))
    elif parameter == "users":
        proto = dataclasses.replace(proto, num_users=int(value))
    elif parameter == "soi_distance":
        # distance is measured from the surface to the near face of the region
        dims = scene.soi_dims
        scene = with_updates(scene, soi_center=(float(value) + dims[0] / 2.0, 0.0, 0.0))
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    return scene, proto


def trial_streams(master_seed: int, trial: int, scheme: str):
    """(ground-truth rng, noise rng, scheme rng) for one trial.

    The first two are keyed by (master_seed, trial) only, so every scheme and
    every sweep value sees the same truth draw and the same noise normals for
    a given trial index. The scheme stream adds a per-scheme tag.
    """
    gt = np.random.default_rng(
        np.random.SeedSequence([master_seed, trial, _GROUND_TRUTH_TAG]))
    noise = np.random.default_rng(
        np.random.SeedSequence([master_seed, trial, _NOISE_TAG]))
    scheme_rng = np.random.default_rng(
        np.random.SeedSequence([master_seed, trial, _SCHEME_CODE[scheme]]))
    return gt, noise, scheme_rng


def no_ris_gains(scene: Scene, n_antennas: int) -> np.ndarray:
    """(A, N) complex direct-path gains for a small array at the transmitter.

    Antenna a sits at the AP plus a half-wavelength offsets along +y, staying
    in the scene's z = 0 plane.
    """
    if n_antennas < 1:
        raise ValueError("need at least one antenna")
    lam = scene.wavelength
    s = scene.spec
    offsets = np.zeros((n_antennas, 3))
    offsets[:, 1] = np.arange(n_antennas) * (lam / 2.0)
    pos = scene.ap_position[None, :] + offsets
    dist = np.linalg.norm(pos[:, None, :] - scene.block_centers[None, :, :], axis=2)
    if (dist <= 0).any():
        raise ValueError("antenna coincides with a block center")
    k0 = lam / (4.0 * np.pi) * np.sqrt(s.tx_gain_direct * s.rx_gain_direct)
    return k0 * np.exp(-2j * np.pi * dist / lam) / dist


class RandomConfigSelector:
    """Baseline: a fresh uniformly random configuration every cycle."""

    def __init__(self, table: GainTable):
        self.table = table

    def select(self, beliefs, rng) -> PatternChoice:
        states = rng.integers(0, self.table.num_states, size=self.table.n_elements)
        return PatternChoice(states, mean_rss(self.table, states), 0)


class RandomPhaseSelector:
    """No-surface baseline: every cycle the transmit array re-draws uniform
    random per-antenna phases and the pattern is their coherent sum."""

    def __init__(self, gains: np.ndarray, tx_power_db: float):
        self.gains = gains
        self.tx_power_db = tx_power_db

    def select(self, beliefs, rng) -> PatternChoice:
        phases = rng.uniform(0.0, 2.0 * np.pi, size=self.gains.shape[0])
        field = np.exp(1j * phases) @ self.gains
        mu, _ = rss_from_field(field, self.tx_power_db)
        return PatternChoice(phases, mu, 0)


def make_selector(scheme: str, table: GainTable, params, settings: OptimizerSettings,
                  n_antennas: int = 2):
    if scheme == "proposed":
        return OptimizedSelector(table, params, settings)
    if scheme == "random_config":
        return RandomConfigSelector(table)
    if scheme == "no_ris":
        return RandomPhaseSelector(no_ris_gains(table.scene, n_antennas),
                                   table.scene.tx_power_db)
    raise ValueError(f"unknown scheme {scheme!r}")


def random_config_baseline(cfg: ProtocolConfig, scene, true_blocks, rng=None, *,
                           table=None, noise_rng=None):
    """Same protocol, but each cycle's configuration is drawn uniformly."""
    if table is None:
        table = build_gain_table(scene, ReflectionModel.from_scene(scene))
    return run_positioning(cfg, scene, true_blocks, rng, table=table,
                           selector=RandomConfigSelector(table), noise_rng=noise_rng)


def no_ris_baseline(cfg: ProtocolConfig, scene, true_blocks, rng=None, *,
                    n_antennas: int = 2, table=None, noise_rng=None):
    """Same protocol with the surface removed; see RandomPhaseSelector."""
    if table is None:
        table = build_gain_table(scene, ReflectionModel.from_scene(scene))
    selector = RandomPhaseSelector(no_ris_gains(table.scene, n_antennas),
                                   table.scene.tx_power_db)
    return run_positioning(cfg, scene, true_blocks, rng, table=table,
                           selector=selector, noise_rng=noise_rng)


def run_trial(scene: Scene, table: GainTable, cfg: ProtocolConfig, scheme: str,
              master_seed: int, trial: int, n_antennas: int = 2):
    """One paired trial. Returns (error_m, total_opt_seconds, total_evals)."""
    gt_rng, noise_rng, scheme_rng = trial_streams(master_seed, trial, scheme)
    true_blocks = gt_rng.integers(0, table.n_blocks, size=cfg.num_users)
    params = LossParams.for_scene(table.scene, cfg.loss_alpha)
    selector = make_selector(scheme, table, params, cfg.optimizer, n_antennas)
    estimates, records = run_positioning(cfg, table.scene, true_blocks, scheme_rng,
                                         table=table, selector=selector,
                                         noise_rng=noise_rng)
    err = positioning_error(estimates, true_blocks, scene)
    return (err,
            float(sum(r.opt_seconds for r in records)),
            int(sum(r.evals for r in records)))


def _point_chunk(spec_dict: dict, value, scheme: str, trial_lo: int, trial_hi: int):
    """Worker entry: run trials [trial_lo, trial_hi) of one sweep cell."""
    spec = SweepSpec.from_dict(spec_dict)
    scene_spec, proto = apply_parameter(spec.scene, spec.protocol,
                                        spec.parameter, value)
    scene = build_scene(scene_spec)
    table = build_gain_table(scene, ReflectionModel.from_scene(scene))
    out = [run_trial(scene, table, proto, scheme, spec.master_seed, t,
                     spec.no_ris_antennas)
           for t in range(trial_lo, trial_hi)]
    errors, secs, evals = zip(*out)
    return np.array(errors), np.array(secs), np.array(evals, dtype=float)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run every (scheme, value) cell of the sweep and aggregate.

    With spec.threads > 1 trials fan out to a process pool; aggregation is
    keyed by trial index, so the thread count never changes the numbers.
    """
    spec.validate()
    points = []
    pool = ProcessPoolExecutor(spec.threads) if spec.threads > 1 else None
    try:
        for value in spec.values:
            for scheme in spec.schemes:
                errors, secs, evals = _run_cell(spec, value, scheme, pool)
                n = len(errors)
                stderr = float(errors.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
                points.append(PointResult(
                    scheme=scheme, param=spec.parameter, value=float(value),
                    mean_error_m=float(errors.mean()), stderr_m=stderr,
                    mean_opt_seconds=float(secs.mean()),
                    mean_evals=float(evals.mean()),
                    errors=errors, opt_seconds=secs, evals=evals))
    finally:
        if pool is not None:
            pool.shutdown()
    return SweepResult(spec=spec, points=points)


def _run_cell(spec: SweepSpec, value, scheme: str, pool):
    if pool is None:
        return _point_chunk(spec.to_dict(), value, scheme, 0, spec.trials)
    workers = pool._max_workers
    step = -(-spec.trials // workers)
    bounds = [(lo, min(lo + step, spec.trials)) for lo in range(0, spec.trials, step)]
    futures = [pool.submit(_point_chunk, spec.to_dict(), value, scheme, lo, hi)
               for lo, hi in bounds]
    parts = [f.result() for f in futures]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def run_single(scene_spec: SceneSpec, scheme: str, seed: int,
               protocol: ProtocolConfig | None = None, n_antennas: int = 2):
    """One positioning run for the CLI.

    Returns (error_m, estimates, true_blocks, records).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    cfg = protocol if protocol is not None else ProtocolConfig()
    scene = build_scene(scene_spec)
    table = build_gain_table(scene, ReflectionModel.from_scene(scene))
    gt_rng, noise_rng, scheme_rng = trial_streams(seed, 0, scheme)
    true_blocks = gt_rng.integers(0, table.n_blocks, size=cfg.num_users)
    params = LossParams.for_scene(scene, cfg.loss_alpha)
    selector = make_selector(scheme, table, params, cfg.optimizer, n_antennas)
    estimates, records = run_positioning(cfg, scene, true_blocks, scheme_rng,
                                         table=table, selector=selector,
                                         noise_rng=noise_rng)
    err = positioning_error(estimates, true_blocks, scene)
    return err, estimates, true_blocks, records


def load_sweep_spec(path) -> SweepSpec:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if "sweep" in doc:
        doc = doc["sweep"]
    return SweepSpec.from_dict(doc)
