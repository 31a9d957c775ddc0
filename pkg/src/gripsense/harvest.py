"""Simulated harvest trials comparing three grasp control strategies.

Each trial runs a 15 Hz perception and control loop against a lumped fruit
model: contact force from jaw squeeze, pull transmitted through a friction
cap, detachment and bruising as force thresholds. The controller only sees
what the perception stack reports, a normal-force estimate decoded from the
simulated motor current and a slip flag from the marker-versus-object
velocity rule, so the three strategies differ exactly in how they use those
two percepts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import MarkerSet
from .force import NormalForceModel, fit_normal_force, predict_normal_force
from .sim import CURRENT_GAIN, CURRENT_NOISE, CURRENT_OFFSET, make_force_samples
from .slip import (DEFAULT_THRESHOLD_PX, ContactMask, detect_slip,
                   marker_velocity, object_velocity)

STRATEGIES = ("open_loop", "slip", "slip_force")
STATES = ("detect", "approach", "close", "hold_pull", "retry", "done")
FAILURE_MODES = ("none", "slip_drop", "bruise", "max_retries")

TICK_HZ = 15.0
#: Jaw travel per tick while closing (mm); bounds force overshoot to
#: stiffness * CLOSING_SPEED_MM for the force-targeted strategy.
CLOSING_SPEED_MM = 0.25
START_OPENING_MM = 40.0
#: Jaw clearance over the measured diameter after the approach move.
APPROACH_CLEARANCE_MM = 6.0
PULL_MAX_N = 8.0
PULL_RAMP_TICKS = 20
HOLD_TICKS = 30
#: Object travel per tick at full slip (mm); scaled by the slip rate.
SLIP_TRAVEL_MM = 1.25
MAX_TICKS = 400
DEFAULT_PX_PER_MM = 24.0
DEFAULT_DIAMETER_NOISE_MM = 1.0
DEFAULT_MARKER_JITTER_PX = 0.3
_TRACK_WINDOW_PX = 320
_DISC_RADIUS_PX = 8

DEFAULT_INITIAL_FORCE_N = {"cherry_tomato": 1.2, "strawberry": 2.0}
DEFAULT_FORCE_INCREMENT_N = {"cherry_tomato": 0.3, "strawberry": 1.0}

#: (mean, sd) draws for each fruit attribute; stem factor is deterministic.
#: Tuned so the open-loop baseline fails at roughly field-trial rates while
#: the commanded-force schedule stays below typical bruise thresholds.
DEFAULT_POPULATIONS = {
    "cherry_tomato": {
        "diameter_mm": (28.3, 1.5),
        "stiffness_n_mm": (1.3, 0.12),
        "detach_force_n": (1.3, 0.22),
        "bruise_force_n": (6.0, 0.5),
        "friction": (1.0, 0.05),
        "stem_stiffness_factor": 1.0,
    },
    "strawberry": {
        "diameter_mm": (30.0, 2.5),
        "stiffness_n_mm": (0.85, 0.10),
        "detach_force_n": (1.57, 0.32),
        "bruise_force_n": (3.8, 0.4),
        "friction": (1.1, 0.05),
        "stem_stiffness_factor": 1.4,
    },
}


@dataclass(frozen=True)
class FruitModel:
    """Lumped mechanical description of one fruit on its stem.

    ``stem_stiffness_factor`` scales the pull needed to detach: a stiffer
    stem transmits less of the applied pull into the abscission zone.
    Configurations with bruise force at or below detachment force are legal
    to construct (they model unharvestable fruit) but fail every strategy.
    """

    fruit_type: str
    diameter_mm: float
    stiffness_n_mm: float
    detach_force_n: float
    bruise_force_n: float
    friction: float
    stem_stiffness_factor: float = 1.0

    def __post_init__(self):
        if self.fruit_type not in DEFAULT_POPULATIONS:
            raise ValueError(f"unknown fruit type {self.fruit_type!r}")
        if self.diameter_mm <= 0 or self.stiffness_n_mm <= 0:
            raise ValueError("diameter and stiffness must be positive")
        if self.detach_force_n < 0 or self.bruise_force_n <= 0:
            raise ValueError("force thresholds must be non-negative")
        if self.friction <= 0 or self.stem_stiffness_factor <= 0:
            raise ValueError("friction and stem factor must be positive")


@dataclass(frozen=True)
class StrategyConfig:
    """Parameters of one control strategy.

    ``open_loop`` closes to measured diameter minus ``close_margin_mm`` and
    pulls once. ``slip`` additionally re-closes by ``retry_increment_mm``
    whenever slip is flagged while pulling. ``slip_force`` closes until the
    estimated normal force reaches a commanded value that starts at the
    per-fruit initial force and rises by the per-fruit increment on slip.
    """

    strategy: str
    close_margin_mm: float = 2.0
    retry_increment_mm: float = 2.0
    initial_force_n: dict = field(
        default_factory=lambda: dict(DEFAULT_INITIAL_FORCE_N))
    force_increment_n: dict = field(
        default_factory=lambda: dict(DEFAULT_FORCE_INCREMENT_N))
    max_retries: int = 3

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.close_margin_mm < 0:
            raise ValueError("close_margin_mm must be non-negative")
        if self.retry_increment_mm <= 0:
            raise ValueError("retry_increment_mm must be positive")
        if any(v <= 0 for v in self.force_increment_n.values()):
            raise ValueError("force increments must be positive")
        if any(v <= 0 for v in self.initial_force_n.values()):
            raise ValueError("initial forces must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")

    def initial_force(self, fruit_type: str) -> float:
        if fruit_type not in self.initial_force_n:
            raise ValueError(f"no initial force for fruit type {fruit_type!r}")
        return self.initial_force_n[fruit_type]

    def force_increment(self, fruit_type: str) -> float:
        if fruit_type not in self.force_increment_n:
            raise ValueError(f"no force increment for fruit type {fruit_type!r}")
        return self.force_increment_n[fruit_type]


@dataclass(frozen=True)
class GraspState:
    """Controller state carried across ticks.

    ``measured_diameter_mm`` and ``fruit_type`` are the detection results
    (ground truth plus measurement noise) injected when the trial starts;
    ``phase_ticks`` counts ticks spent in the current state.
    """

    state: str
    opening_mm: float
    commanded_force_n: float
    attempt: int = 1
    peak_force_n: float = 0.0
    measured_diameter_mm: float = 0.0
    fruit_type: str = "cherry_tomato"
    phase_ticks: int = 0

    def __post_init__(self):
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")
        if self.opening_mm < 0 or not np.isfinite(self.opening_mm):
            raise ValueError("opening_mm must be finite and non-negative")
        if self.attempt < 1:
            raise ValueError("attempt count starts at 1")


@dataclass(frozen=True)
class TrialOutcome:
    """Result of one harvest trial."""

    success: bool
    failure_mode: str
    attempts: int
    peak_force_n: float
    force_trace: np.ndarray

    def __post_init__(self):
        if self.failure_mode not in FAILURE_MODES:
            raise ValueError(f"unknown failure mode {self.failure_mode!r}")
        if self.success and self.failure_mode != "none":
            raise ValueError("successful trials cannot carry a failure mode")
        if not self.success and self.failure_mode == "none":
            raise ValueError("failed trials need a failure mode")
        object.__setattr__(self, "force_trace",
                           np.asarray(self.force_trace, dtype=np.float64))


def fruit_response(fruit: FruitModel, opening_mm: float, pull_n: float):
    """Plant-side mechanics for one tick.

    Returns (contact force N, slip rate in [0, 1], detached, bruised).
    The pull transmitted to the stem is capped by the friction cone
    ``friction * contact_force``; the slip rate is the fraction of the pull
    the cone cannot carry, so it decreases monotonically with grip force
    and is 1 when the jaws are not touching the fruit.
    """
    if opening_mm < 0:
        raise ValueError("opening_mm must be non-negative")
    contact = fruit.stiffness_n_mm * max(0.0, fruit.diameter_mm - opening_mm)
    grip_limit = fruit.friction * contact
    transmitted = min(pull_n, grip_limit)
    detached = transmitted >= fruit.detach_force_n * fruit.stem_stiffness_factor
    bruised = contact > fruit.bruise_force_n
    slip_rate = 0.0
    if pull_n > 0.0:
        slip_rate = min(1.0, max(0.0, (pull_n - grip_limit) / pull_n))
    return contact, slip_rate, detached, bruised


def _close_target(state: GraspState, cfg: StrategyConfig) -> float:
    squeeze = cfg.close_margin_mm + (state.attempt - 1) * cfg.retry_increment_mm
    return max(0.0, state.measured_diameter_mm - squeeze)


def step_controller(state: GraspState, percepts, cfg: StrategyConfig) -> GraspState:
    """One tick of the grasp state machine.

    ``percepts`` is (slip flag, normal-force estimate N). The done state is
    absorbing and the attempt counter never exceeds ``cfg.max_retries``.
    """
    slip_flag, f_n = percepts
    peak = max(state.peak_force_n, float(f_n))
    step = {"peak_force_n": peak, "phase_ticks": state.phase_ticks + 1}

    def moved(**kw):
        merged = {**state.__dict__, **step, **kw}
        return GraspState(**merged)

    if state.state == "done":
        return moved(phase_ticks=state.phase_ticks)
    if state.state == "detect":
        return moved(state="approach", phase_ticks=0)
    if state.state == "approach":
        # The arm move also pre-opens the jaws to just over the fruit.
        pre = min(state.opening_mm,
                  state.measured_diameter_mm + APPROACH_CLEARANCE_MM)
        return moved(state="close", opening_mm=pre, phase_ticks=0)
    if state.state == "close":
        if cfg.strategy == "slip_force":
            if f_n >= state.commanded_force_n:
                return moved(state="hold_pull", phase_ticks=0)
            return moved(opening_mm=max(0.0, state.opening_mm - CLOSING_SPEED_MM))
        target = _close_target(state, cfg)
        if state.opening_mm <= target:
            return moved(state="hold_pull", phase_ticks=0)
        return moved(opening_mm=max(target, state.opening_mm - CLOSING_SPEED_MM))
    if state.state == "hold_pull":
        if slip_flag and cfg.strategy != "open_loop":
            if state.attempt >= cfg.max_retries:
                return moved(state="done")
            return moved(state="retry", phase_ticks=0)
        if state.phase_ticks >= HOLD_TICKS:
            if cfg.strategy == "open_loop" or state.attempt >= cfg.max_retries:
                return moved(state="done")
            return moved(state="retry", phase_ticks=0)
        return moved()
    # retry: bump the attempt, raise the commanded force for slip_force,
    # and re-enter the closing phase.
    commanded = state.commanded_force_n
    if cfg.strategy == "slip_force":
        commanded += cfg.force_increment(state.fruit_type)
    return moved(state="close", attempt=state.attempt + 1,
                 commanded_force_n=commanded, phase_ticks=0)


_FORCE_MODEL_CACHE: dict = {}


def _default_force_model() -> NormalForceModel:
    if "model" not in _FORCE_MODEL_CACHE:
        samples = np.column_stack(
            make_force_samples(rng=np.random.default_rng(1234)))
        _FORCE_MODEL_CACHE["model"] = fit_normal_force(samples)
    return _FORCE_MODEL_CACHE["model"]


_DISC_OFFSETS = None


def _paint_mask(center_px: float, px_per_mm: float) -> ContactMask:
    """Small disc mask whose centroid tracks the object position."""
    global _DISC_OFFSETS
    if _DISC_OFFSETS is None:
        r = _DISC_RADIUS_PX
        yy, xx = np.ogrid[-r:r + 1, -r:r + 1]
        _DISC_OFFSETS = (yy * yy + xx * xx) <= r * r
    values = np.zeros((_TRACK_WINDOW_PX, _TRACK_WINDOW_PX), dtype=bool)
    cx = int(round(min(max(center_px, _DISC_RADIUS_PX),
                       _TRACK_WINDOW_PX - _DISC_RADIUS_PX - 1)))
    cy = _TRACK_WINDOW_PX // 2
    r = _DISC_RADIUS_PX
    values[cy - r:cy + r + 1, cx - r:cx + r + 1] = _DISC_OFFSETS
    return ContactMask(values, threshold_mm=0.3, px_per_mm=px_per_mm)


def _patch_radius_mm(fruit: FruitModel, opening_mm: float) -> float:
    """Contact patch radius from spherical-cap geometry of the jaw squeeze."""
    depth = max(0.0, fruit.diameter_mm - opening_mm) / 2.0
    return float(np.sqrt(max(0.0, depth * (fruit.diameter_mm - depth))))


def run_trial(fruit: FruitModel, cfg: StrategyConfig, seed: int = 0,
              diameter_noise_mm: float = DEFAULT_DIAMETER_NOISE_MM,
              sensor_noise: float = CURRENT_NOISE,
              marker_jitter_px: float = DEFAULT_MARKER_JITTER_PX,
              px_per_mm: float = DEFAULT_PX_PER_MM,
              threshold_px: float = DEFAULT_THRESHOLD_PX,
              force_model: NormalForceModel | None = None) -> TrialOutcome:
    """Run one seeded perception-control loop until the trial resolves.

    Success means detached without bruising and without the cumulative slip
    displacement exceeding the contact patch radius (the drop rule). The
    force trace holds the per-tick normal-force estimates the controller
    actually saw.
    """
    rng = np.random.default_rng(seed)
    model = _default_force_model() if force_model is None else force_model
    measured = fruit.diameter_mm + (
        rng.normal(0.0, diameter_noise_mm) if diameter_noise_mm > 0 else 0.0)
    state = GraspState(state="detect", opening_mm=START_OPENING_MM,
                       commanded_force_n=cfg.initial_force(fruit.fruit_type),
                       measured_diameter_mm=max(1.0, measured),
                       fruit_type=fruit.fruit_type)
    marker_rest = np.stack(np.meshgrid([-20.0, 0.0, 20.0], [-20.0, 0.0, 20.0]),
                           axis=-1).reshape(-1, 2) + _TRACK_WINDOW_PX / 2.0
    marker_ids = np.arange(marker_rest.shape[0])

    masks, tracks, trace = [], [], []
    slip_mm = 0.0
    start_px = 4.0 * _DISC_RADIUS_PX

    for _ in range(MAX_TICKS):
        pull = 0.0
        if state.state == "hold_pull":
            pull = PULL_MAX_N * min(1.0, (state.phase_ticks + 1) / PULL_RAMP_TICKS)
        contact, slip_rate, detached, bruised = fruit_response(
            fruit, state.opening_mm, pull)
        if bruised:
            return TrialOutcome(False, "bruise", state.attempt,
                                state.peak_force_n, np.array(trace))
        if detached:
            return TrialOutcome(True, "none", state.attempt,
                                state.peak_force_n, np.array(trace))

        slip_mm += slip_rate * SLIP_TRAVEL_MM
        if slip_mm > _patch_radius_mm(fruit, state.opening_mm):
            return TrialOutcome(False, "slip_drop", state.attempt,
                                state.peak_force_n, np.array(trace))

        current = CURRENT_GAIN * contact + CURRENT_OFFSET + (
            rng.normal(0.0, sensor_noise) if sensor_noise > 0 else 0.0)
        f_est = max(0.0, float(predict_normal_force(current, model)))
        trace.append(f_est)

        masks.append(_paint_mask(start_px + slip_mm * px_per_mm, px_per_mm))
        jitter = (rng.normal(0.0, marker_jitter_px, marker_rest.shape)
                  if marker_jitter_px > 0 else 0.0)
        tracks.append(MarkerSet(marker_ids, marker_rest + jitter, 3, 3))
        if len(masks) >= 2:
            window = slice(-6, None)
            v_obj = object_velocity(masks[window])[-1]
            v_mark = marker_velocity(tracks[window], masks[window])[-1]
            slip_flag = detect_slip(v_obj, v_mark, threshold_px)
        else:
            slip_flag = False

        attempt_before = state.attempt
        state = step_controller(state, (slip_flag, f_est), cfg)
        if state.attempt != attempt_before:
            # Re-closing re-forms the contact patch around the slid fruit.
            slip_mm = 0.0
        if state.state == "done":
            return TrialOutcome(False, "max_retries", state.attempt,
                                state.peak_force_n, np.array(trace))
    return TrialOutcome(False, "max_retries", state.attempt,
                        state.peak_force_n, np.array(trace))


def sample_fruit(fruit_type: str, rng: np.random.Generator) -> FruitModel:
    """Draw one fruit from the default population for its type."""
    if fruit_type not in DEFAULT_POPULATIONS:
        raise ValueError(f"unknown fruit type {fruit_type!r}")
    pop = DEFAULT_POPULATIONS[fruit_type]

    def draw(key):
        mean, sd = pop[key]
        return rng.normal(mean, sd)

    diameter = float(np.clip(draw("diameter_mm"), 22.0, 36.0))
    stiffness = max(0.5, draw("stiffness_n_mm"))
    detach = max(0.4, draw("detach_force_n"))
    bruise = max(detach + 1.0, draw("bruise_force_n"))
    friction = max(0.8, draw("friction"))
    return FruitModel(fruit_type, diameter, stiffness, detach, bruise,
                      friction, pop["stem_stiffness_factor"])


@dataclass(frozen=True)
class StrategySummary:
    """Aggregate over one (fruit type, strategy) cell of the ablation."""

    fruit_type: str
    strategy: str
    n_trials: int
    success_rate: float
    mean_attempts: float
    force_mean: float
    force_var: float
    failure_counts: dict


def run_experiment(trials_per_cell: int = 50, seed: int = 0,
                   fruit_types=("cherry_tomato", "strawberry"),
                   strategies=STRATEGIES, max_retries: int = 3,
                   **trial_kwargs) -> list:
    """Seeded three-strategy ablation over sampled fruit populations.

    The fruit drawn for trial ``i`` of a fruit type is identical across
    strategies, so strategy comparisons are paired. Force statistics are
    over the per-trial peak normal-force estimates.
    """
    if trials_per_cell < 8:
        raise ValueError("need at least 8 trials per cell")
    summaries = []
    for f_idx, fruit_type in enumerate(fruit_types):
        fruits, seeds = [], []
        for trial in range(trials_per_cell):
            seq = np.random.SeedSequence((seed, f_idx, trial))
            fruits.append(sample_fruit(fruit_type,
                                       np.random.default_rng(seq.spawn(1)[0])))
            seeds.append(seq.spawn(1)[0])
        for strategy in strategies:
            cfg = StrategyConfig(strategy=strategy, max_retries=max_retries)
            outcomes = [run_trial(fruit, cfg, seed=trial_seed, **trial_kwargs)
                        for fruit, trial_seed in zip(fruits, seeds)]
            peaks = np.array([o.peak_force_n for o in outcomes])
            failures = {}
            for o in outcomes:
                if not o.success:
                    failures[o.failure_mode] = failures.get(o.failure_mode, 0) + 1
            summaries.append(StrategySummary(
                fruit_type, strategy, trials_per_cell,
                float(np.mean([o.success for o in outcomes])),
                float(np.mean([o.attempts for o in outcomes])),
                float(peaks.mean()), float(peaks.var()), failures))
    return summaries
