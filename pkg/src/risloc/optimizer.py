"""Discrete configuration search on the lattice {0..C-1}^M.

Two layers: a local search (move to the best unit-neighborhood configuration
while it improves by more than epsilon) and a global phase that line-searches
along directions between known local minima, ranked by descent ratio, until
enough distinct minima have been collected.

The objective passed in must expose ``value(states) -> float``; it may
additionally expose ``value_many(configs) -> array`` and
``neighbor_values(states) -> (candidates, values)`` fast paths (see
objective.CycleObjective), which the search uses when present. Candidate order
must match ``unit_neighborhood``; ties always resolve to the first (lowest
index) candidate so runs are reproducible.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerSettings:
    epsilon: float = 0.1        # local-minimum slack, in loss units
    z_lower: int = 2            # distinct local minima collected from random starts
    z_upper: int = 5            # stop once more than this many minima are known
    max_lmcs_moves: int = 10000  # safety cap per local search run
    retry_cap: int = 200        # random redraws when distinct minima are required
    seed: int | None = None     # used when no generator is passed in

    def validate(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (self.z_upper > self.z_lower >= 1):
            raise ValueError("need z_upper > z_lower >= 1")
        if self.max_lmcs_moves < 0 or self.retry_cap < 1:
            raise ValueError("bad cap settings")


@dataclass
class LmcsResult:
    states: np.ndarray
    loss: float
    moves: int          # accepted moves, each improving by more than epsilon
    evals: int          # objective evaluations requested
    truncated: bool     # hit max_lmcs_moves before certification


@dataclass
class CoResult:
    states: np.ndarray
    loss: float
    minima: "SortedLocalMinima"
    evals: int
    global_iterations: int
    lmcs_runs: int
    total_moves: int
    max_lmcs_moves: int
    truncated: bool


class SortedLocalMinima:
    """Distinct local minima kept in ascending loss order (stable on ties)."""

    def __init__(self):
        self._losses: list[float] = []
        self._states: list[np.ndarray] = []
        self._seen: set[tuple] = set()

    def __len__(self):
        return len(self._losses)

    def __contains__(self, states) -> bool:
        return tuple(int(s) for s in states) in self._seen

    def insert(self, states, loss: float) -> bool:
        """Insert unless the configuration is already present."""
        key = tuple(int(s) for s in states)
        if key in self._seen:
            return False
        pos = bisect.bisect_right(self._losses, loss)
        self._losses.insert(pos, loss)
        self._states.insert(pos, np.array(states, dtype=int))
        self._seen.add(key)
        return True

    def best(self):
        return self._states[0], self._losses[0]

    def items(self):
        return list(zip(self._states, self._losses))

    @property
    def losses(self):
        return list(self._losses)


def unit_neighborhood(states, num_states: int) -> np.ndarray:
    """All configurations one cyclic state step away from ``states``.

    For each element m (ascending), the +1 step then the -1 step, both mod C.
    With C == 2 the two coincide and only one candidate per element is emitted,
    so the result has 2M rows (M rows when C == 2).
    """
    states = np.asarray(states, dtype=int)
    m = states.shape[0]
    if num_states < 2:
        raise ValueError("need at least 2 states")
    steps = (1,) if num_states == 2 else (1, -1)
    cands = np.repeat(states[None, :], m * len(steps), axis=0)
    row = 0
    for i in range(m):
        for step in steps:
            cands[row, i] = (states[i] + step) % num_states
            row += 1
    return cands


def descent_ratio(c_from, c_to, loss_from: float, loss_to: float) -> float:
    """Loss change per unit Euclidean distance between two configurations."""
    c_from = np.asarray(c_from, dtype=float)
    c_to = np.asarray(c_to, dtype=float)
    dist = float(np.linalg.norm(c_to - c_from))
    if dist == 0.0:
        raise ValueError("descent ratio undefined for identical configurations")
    return (loss_to - loss_from) / dist


def _value_many(objective, configs) -> np.ndarray:
    many = getattr(objective, "value_many", None)
    if many is not None:
        return np.asarray(many(configs), dtype=float)
    return np.array([objective.value(c) for c in configs], dtype=float)


def lmcs(objective, start, num_states: int, settings: OptimizerSettings) -> LmcsResult:
    """Best-of-neighborhood local search.

    Repeatedly scans the full unit neighborhood and moves to its minimum-loss
    candidate while that improves on the current loss by strictly more than
    epsilon; stops (certified) otherwise. The returned configuration therefore
    satisfies loss(c*) <= loss(c) + epsilon for the whole neighborhood unless
    the move cap truncated the run.
    """
    settings.validate()
    states = np.asarray(start, dtype=int).copy()
    loss = float(objective.value(states))
    evals = 1
    moves = 0
    neighbor_fn = getattr(objective, "neighbor_values", None)
    while True:
        if neighbor_fn is not None:
            cands, vals = neighbor_fn(states)
            vals = np.asarray(vals, dtype=float)
        else:
            cands = unit_neighborhood(states, num_states)
            vals = _value_many(objective, cands)
        evals += len(vals)
        if len(vals) == 0:  # M == 0: the empty configuration is trivially minimal
            return LmcsResult(states, loss, moves, evals, False)
        best = int(np.argmin(vals))
        if vals[best] < loss - settings.epsilon:
            states = np.asarray(cands[best], dtype=int).copy()
            loss = float(vals[best])
            moves += 1
            if moves >= settings.max_lmcs_moves:
                return LmcsResult(states, loss, moves, evals, True)
        else:
            return LmcsResult(states, loss, moves, evals, False)


def co_optimize(objective, n_elements: int, num_states: int,
                settings: OptimizerSettings, rng=None) -> CoResult:
    """Two-phase global configuration search.

    Phase 1 runs local searches from random starts until z_lower distinct
    minima are known (redrawing on duplicates, up to retry_cap). Phase 2
    repeats: take the best minimum c_f, pick the other minimum maximizing the
    descent ratio from c_f, line-search the C-1 points along that cyclic
    direction, local-search from the best of them, and insert the result,
    falling back to fresh random starts when it is already known. Stops once
    more than z_upper minima are collected (or the retry budget is exhausted,
    flagged as truncated). Returns the best configuration found.
    """
    settings.validate()
    if rng is None:
        rng = np.random.default_rng(settings.seed)
    minima = SortedLocalMinima()
    evals = 0
    lmcs_runs = 0
    total_moves = 0
    max_moves = 0
    truncated = False

    def run_lmcs(start):
        nonlocal evals, lmcs_runs, total_moves, max_moves, truncated
        res = lmcs(objective, start, num_states, settings)
        evals += res.evals
        lmcs_runs += 1
        total_moves += res.moves
        max_moves = max(max_moves, res.moves)
        truncated = truncated or res.truncated
        return res

    def random_start():
        return rng.integers(0, num_states, size=n_elements)

    draws = 0
    while len(minima) < settings.z_lower:
        if draws >= settings.retry_cap:
            truncated = True
            break
        res = run_lmcs(random_start())
        minima.insert(res.states, res.loss)
        draws += 1

    global_iterations = 0
    while len(minima) <= settings.z_upper and len(minima) >= 2 and not truncated:
        global_iterations += 1
        c_f, l_f = minima.best()
        best_ratio = -np.inf
        c_m = None
        for states, loss in minima.items()[1:]:
            r = descent_ratio(c_f, states, l_f, loss)
            if r > best_ratio:
                best_ratio = r
                c_m = states
        direction = (c_m - c_f) % num_states
        zeta = np.arange(1, num_states)[:, None]
        line = (c_f[None, :] + zeta * direction[None, :]) % num_states
        vals = _value_many(objective, line)
        evals += len(vals)
        res = run_lmcs(line[int(np.argmin(vals))])
        if not minima.insert(res.states, res.loss):
            for _ in range(settings.retry_cap):
                res = run_lmcs(random_start())
                if minima.insert(res.states, res.loss):
                    break
            else:
                truncated = True

    best_states, best_loss = minima.best()
    return CoResult(
        states=best_states,
        loss=best_loss,
        minima=minima,
        evals=evals,
        global_iterations=global_iterations,
        lmcs_runs=lmcs_runs,
        total_moves=total_moves,
        max_lmcs_moves=max_moves,
        truncated=truncated,
    )
