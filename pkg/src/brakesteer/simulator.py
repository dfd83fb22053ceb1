"""Closed-loop scenario execution.

A scenario bundles a path, an initial condition, vehicle parameters,
controller tuning and run settings.  ``run`` executes the loop
project -> controller -> advance at a fixed control rate and returns a
Trace; identical scenario + seed gives a bit-identical trace.  ``sweep``
runs a scenario over a grid of overrides, isolating per-run failures.
"""

from __future__ import annotations

import copy
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Any, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .analysis import CONV_L, CONV_THETA, RunSummary, lyapunov, summarize
from .controller import (
    ControllerConfig,
    ControllerState,
    DeltaProfile,
    HybridState,
    Maneuver,
    select_maneuver,
)
from .dynamics import UserInput, VehicleParams, VehicleState, step_dynamic, step_kinematic
from .path_geometry import (
    AmbiguousProjection,
    Path,
    PathError,
    SingularProjection,
    build_path,
)


class ScenarioInvalid(ValueError):
    """Raised when a scenario fails validation; carries the reasons."""

    def __init__(self, reasons: Sequence[str]):
        super().__init__("; ".join(reasons))
        self.reasons = list(reasons)


class TraceRow(NamedTuple):
    t: float
    x: float
    y: float
    theta: float
    v: float
    omega: float
    s: float
    l: float
    theta_tilde: float
    maneuver: str
    hybrid_state: str
    phase: str
    V: float


TRACE_COLUMNS = (
    "t,x,y,theta,v,omega,s,l,theta_tilde,maneuver,hybrid_state,phase,V"
)


@dataclass(frozen=True)
class Trace:
    """Time-indexed log of one closed-loop run."""

    rows: tuple[TraceRow, ...]
    meta: dict

    def to_csv(self) -> str:
        lines = [TRACE_COLUMNS]
        for r in self.rows:
            lines.append(
                f"{r.t:.9g},{r.x:.9g},{r.y:.9g},{r.theta:.9g},{r.v:.9g},"
                f"{r.omega:.9g},{r.s:.9g},{r.l:.9g},{r.theta_tilde:.9g},"
                f"{r.maneuver},{r.hybrid_state},{r.phase},{r.V:.9g}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | FilePath) -> None:
        FilePath(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one run."""

    path_spec: dict
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    control: ControllerConfig = field(default_factory=ControllerConfig)
    initial_pose: Optional[tuple[float, float, float]] = None
    initial_frenet: Optional[tuple[float, float, float]] = None  # (s, l_norm, theta_tilde)
    v_user: float = 1.0
    user_torques: tuple[float, float] = (0.0, 0.0)
    noise_amplitude: float = 0.0
    dt_control: float = 0.02
    dt_physics: float = 0.001
    t_max: float = 60.0
    mode: str = "kinematic"
    brake_model: str = "instant"
    seed: int = 0
    stop_when_converged: bool = False
    converged_hold: float = 2.0

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        data = dict(data)
        vehicle = VehicleParams(**data.get("vehicle", {}))
        ctl = dict(data.get("controller", {}))
        profile_spec = ctl.pop("delta_profile", None)
        profile = DeltaProfile.from_spec(profile_spec) if profile_spec else DeltaProfile.tanh()
        ctl.pop("radius", None)  # always derived from the axle length
        control = ControllerConfig(radius=vehicle.R, delta_profile=profile, **ctl)
        user = dict(data.get("user", {}))
        init_pose = data.get("initial_pose")
        init_frenet = data.get("initial_frenet")
        if isinstance(init_frenet, Mapping):
            init_frenet = (
                float(init_frenet.get("s", 0.0)),
                float(init_frenet["l_norm"]),
                float(init_frenet["theta_tilde"]),
            )
        elif init_frenet is not None:
            init_frenet = tuple(float(v) for v in init_frenet)
        return cls(
            path_spec=copy.deepcopy(dict(data["path"])),
            vehicle=vehicle,
            control=control,
            initial_pose=tuple(float(v) for v in init_pose) if init_pose else None,
            initial_frenet=init_frenet,
            v_user=float(user.get("v", 1.0)),
            user_torques=(float(user.get("tau_r", 0.0)), float(user.get("tau_l", 0.0))),
            noise_amplitude=float(user.get("noise_amplitude", 0.0)),
            dt_control=float(data.get("dt_control", 0.02)),
            dt_physics=float(data.get("dt_physics", 0.001)),
            t_max=float(data.get("t_max", 60.0)),
            mode=str(data.get("mode", "kinematic")),
            brake_model=str(data.get("brake_model", "instant")),
            seed=int(data.get("seed", 0)),
            stop_when_converged=bool(data.get("stop_when_converged", False)),
            converged_hold=float(data.get("converged_hold", 2.0)),
        )

    def to_dict(self) -> dict:
        p = self.vehicle
        out = {
            "path": copy.deepcopy(self.path_spec),
            "vehicle": {
                "m": p.m, "J": p.J, "J_w": p.J_w, "d": p.d,
                "r": p.r, "b_w": p.b_w, "b_max": p.b_max,
            },
            "controller": {
                k: v for k, v in self.control.spec().items() if k != "radius"
            },
            "user": {
                "v": self.v_user,
                "tau_r": self.user_torques[0],
                "tau_l": self.user_torques[1],
                "noise_amplitude": self.noise_amplitude,
            },
            "dt_control": self.dt_control,
            "dt_physics": self.dt_physics,
            "t_max": self.t_max,
            "mode": self.mode,
            "brake_model": self.brake_model,
            "seed": self.seed,
            "stop_when_converged": self.stop_when_converged,
            "converged_hold": self.converged_hold,
        }
        if self.initial_pose is not None:
            out["initial_pose"] = list(self.initial_pose)
        if self.initial_frenet is not None:
            out["initial_frenet"] = {
                "s": self.initial_frenet[0],
                "l_norm": self.initial_frenet[1],
                "theta_tilde": self.initial_frenet[2],
            }
        return out

    def with_overrides(self, overrides: Mapping[str, Any]) -> "Scenario":
        """New scenario with dotted-key overrides applied to the dict form."""
        data = self.to_dict()
        apply_overrides(data, overrides)
        return Scenario.from_dict(data)

    # -- validation ----------------------------------------------------------

    def build_path(self) -> Path:
        return build_path(self.path_spec["segments"], self.path_spec.get("start_pose", (0, 0, 0)))

    def validate(self) -> list[tuple[str, str]]:
        """Collect issues as (level, message); level 'error' blocks run().

        Level 'curvature' marks a path the vehicle cannot follow exactly
        (|c| * R > 1); runs still execute but tracking will saturate.
        """
        issues: list[tuple[str, str]] = []
        if self.t_max <= 0.0:
            issues.append(("error", "t_max must be positive"))
        if self.dt_control <= 0.0:
            issues.append(("error", "dt_control must be positive"))
        if self.mode not in ("kinematic", "dynamic"):
            issues.append(("error", f"unknown mode {self.mode!r}"))
        if self.mode == "dynamic":
            if self.dt_physics <= 0.0 or self.dt_physics > self.dt_control:
                issues.append(("error", "need 0 < dt_physics <= dt_control"))
            else:
                ratio = self.dt_control / self.dt_physics
                if abs(ratio - round(ratio)) > 1e-9:
                    issues.append(("error", "dt_control must be a multiple of dt_physics"))
        if self.v_user <= 0.0:
            issues.append(("error", "v_user must be positive (forward motion only)"))
        elif self.dt_control > 0.0 and self.v_user / self.vehicle.R * self.dt_control > 0.5:
            issues.append(
                ("error", "dt_control too coarse: one step turns more than 0.5 rad")
            )
        if (self.initial_pose is None) == (self.initial_frenet is None):
            issues.append(("error", "give exactly one of initial_pose / initial_frenet"))
        if abs(self.control.radius - self.vehicle.R) > 1e-12:
            issues.append(("error", "controller radius must equal the vehicle's d/2"))
        try:
            path = self.build_path()
        except (PathError, ValueError, KeyError) as exc:
            issues.append(("error", f"path: {exc}"))
            return issues
        if self.initial_frenet is not None and not (
            0.0 <= self.initial_frenet[0] <= path.total_length
        ):
            issues.append(("error", "initial_frenet.s outside the path domain"))
        worst = 0.0
        worst_idx = 0
        for i, seg in enumerate(path.segments):
            c = max(abs(seg.curvature_start), abs(seg.curvature_end))
            if c * self.vehicle.R > worst:
                worst, worst_idx = c * self.vehicle.R, i
        if worst > 1.0:
            issues.append(
                ("curvature",
                 f"segment {worst_idx} needs |c|*R = {worst:.3f} > 1; "
                 "the cart cannot hold this curvature")
            )
        return issues

    def initial_state(self, path: Path) -> VehicleState:
        if self.initial_pose is not None:
            x, y, th = self.initial_pose
        else:
            s0, l_norm, th_tilde = self.initial_frenet
            px, py, thd = path.pose_at(s0)
            l = l_norm * self.vehicle.R
            x = px - l * math.sin(thd)
            y = py + l * math.cos(thd)
            th = thd + th_tilde
        return VehicleState.from_body_rates(x, y, th, self.v_user, 0.0, self.vehicle)


def apply_overrides(data: dict, overrides: Mapping[str, Any]) -> dict:
    """Apply dotted-key overrides (e.g. ``controller.eps_theta``) in place.

    String values are parsed as JSON scalars when possible so CLI
    ``--set key=value`` pairs become numbers/booleans.
    """
    import json

    for key, value in overrides.items():
        if isinstance(value, str):
            try:
                value = json.loads(value)
            except json.JSONDecodeError:
                pass
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return data


def _stop_row(t: float, state: VehicleState, s: float, l: float, th: float,
              phase: str, radius: float) -> TraceRow:
    return TraceRow(
        t, state.x, state.y, state.theta, 0.0, 0.0, s, l, th,
        Maneuver.STOP.label, HybridState.STOPPED.label, phase,
        lyapunov(l / radius, th),
    )


def run(scenario: Scenario) -> Trace:
    """Execute one closed-loop run and return its trace.

    The loop terminates at ``t_max``, at the end of the path, on a latched
    Stop (projection lost), or optionally once converged for
    ``converged_hold`` seconds.  A lost projection is logged as a Stop row
    rather than raised.
    """
    issues = scenario.validate()
    errors = [msg for level, msg in issues if level == "error"]
    if errors:
        raise ScenarioInvalid(errors)
    for level, msg in issues:
        if level == "curvature":
            warnings.warn(msg, stacklevel=2)
    path = scenario.build_path()
    params = scenario.vehicle
    cfg = scenario.control
    radius = params.R
    dt = scenario.dt_control
    rng = np.random.default_rng(scenario.seed)
    state = scenario.initial_state(path)
    ctrl = ControllerState()
    user = UserInput(*scenario.user_torques)
    n_sub = max(1, round(dt / scenario.dt_physics)) if scenario.mode == "dynamic" else 1
    end_margin = max(2.0 * scenario.v_user * dt, 1e-6)

    rows: list[TraceRow] = []
    meta = {
        "radius": radius,
        "dt_control": dt,
        "v_user": scenario.v_user,
        "eps_theta": cfg.eps_theta,
        "delta_profile": cfg.delta_profile.spec(),
        "mode": scenario.mode,
        "seed": scenario.seed,
        "stop_reason": None,
    }
    hint = None
    in_band_since = None
    n_steps = int(math.floor(scenario.t_max / dt + 1e-9))
    for k in range(n_steps + 1):
        t = k * dt
        try:
            fren = path.frenet_project(state.pose(), hint_s=hint, radius=radius)
        except (SingularProjection, AmbiguousProjection) as exc:
            last = rows[-1] if rows else None
            s_last = last.s if last else 0.0
            l_last = last.l if last else 0.0
            th_last = last.theta_tilde if last else 0.0
            rows.append(_stop_row(t, state, s_last, l_last, th_last,
                                  ctrl.phase.label, radius))
            meta["stop_reason"] = f"projection lost: {exc}"
            break
        hint = fren.s
        if fren.s >= path.total_length - end_margin:
            rows.append(_stop_row(t, state, fren.s, fren.l, fren.theta_tilde,
                                  ctrl.phase.label, radius))
            meta["stop_reason"] = "path_end"
            break
        cmd, ctrl = select_maneuver(fren, ctrl, cfg)
        rows.append(
            TraceRow(
                t, state.x, state.y, state.theta, state.v, state.omega,
                fren.s, fren.l, fren.theta_tilde,
                cmd.action.label, ctrl.hybrid_state.label, ctrl.phase.label,
                lyapunov(fren.l / radius, fren.theta_tilde),
            )
        )
        if scenario.stop_when_converged:
            in_band = (
                abs(fren.l / radius) < CONV_L and abs(fren.theta_tilde) < CONV_THETA
            )
            if in_band:
                if in_band_since is None:
                    in_band_since = t
                elif t - in_band_since >= scenario.converged_hold:
                    break
            else:
                in_band_since = None
        if k == n_steps:
            break
        if scenario.mode == "kinematic":
            v_k = scenario.v_user
            if scenario.noise_amplitude > 0.0:
                v_k = max(0.0, v_k * (1.0 + rng.uniform(-scenario.noise_amplitude,
                                                        scenario.noise_amplitude)))
            state = step_kinematic(state, cmd, v_k, dt, params)
        else:
            step_user = user
            if scenario.noise_amplitude > 0.0:
                step_user = UserInput(
                    user.tau_r + rng.uniform(-scenario.noise_amplitude, scenario.noise_amplitude),
                    user.tau_l + rng.uniform(-scenario.noise_amplitude, scenario.noise_amplitude),
                )
            for _ in range(n_sub):
                state = step_dynamic(state, cmd, step_user, scenario.dt_physics,
                                     params, scenario.brake_model)
    return Trace(rows=tuple(rows), meta=meta)


@dataclass(frozen=True)
class SweepResult:
    overrides: dict
    summary: Optional[RunSummary]
    error: Optional[str] = None


def _sweep_one(args: tuple[dict, dict]) -> SweepResult:
    base_data, overrides = args
    try:
        scenario = Scenario.from_dict(apply_overrides(copy.deepcopy(base_data), overrides))
        trace = run(scenario)
        reason = trace.meta.get("stop_reason")
        error = reason if reason and reason != "path_end" else None
        return SweepResult(overrides=dict(overrides), summary=summarize(trace), error=error)
    except Exception as exc:  # per-run isolation: a sweep never aborts
        return SweepResult(overrides=dict(overrides), summary=None, error=str(exc))


def sweep(
    base: Scenario,
    grid: Sequence[Mapping[str, Any]],
    parallel: int = 1,
) -> list[SweepResult]:
    """Run the scenario once per override set, in deterministic grid order."""
    if not grid:
        raise ValueError("sweep grid is empty")
    jobs = [(base.to_dict(), dict(ov)) for ov in grid]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(job) for job in jobs]


def frenet_grid(
    l_values: Sequence[float],
    theta_values: Sequence[float],
    s0: float = 10.0,
) -> list[dict]:
    """Initial-condition overrides for a sweep over (l~, th~) pairs.

    Each override also clears any ``initial_pose`` of the base scenario so
    the two initial-condition forms cannot collide.
    """
    return [
        {
            "initial_pose": None,
            "initial_frenet": {"s": s0, "l_norm": float(l), "theta_tilde": float(th)},
        }
        for l in l_values
        for th in theta_values
    ]


def build_demo_scenario() -> Scenario:
    """The shipped demonstration scenario.

    A 35 m course (straight, clothoid, arc, clothoid, straight; peak
    curvature 0.6 1/m) approached from (1, 5) with heading 0: the cart
    starts 5 m left of the path, executes the approach, and tracks the
    course to its end.
    """
    return Scenario.from_dict(
        {
            "path": {
                "start_pose": [0.0, 0.0, 0.0],
                "segments": [
                    {"kind": "line", "length": 15.0},
                    {"kind": "clothoid", "length": 3.0,
                     "curvature_start": 0.0, "curvature_end": -0.6},
                    {"kind": "arc", "length": 2.0, "curvature": -0.6},
                    {"kind": "clothoid", "length": 3.0,
                     "curvature_start": -0.6, "curvature_end": 0.0},
                    {"kind": "line", "length": 12.0},
                ],
            },
            "initial_pose": [1.0, 5.0, 0.0],
            "user": {"v": 1.0},
            "dt_control": 0.01,
            "t_max": 60.0,
            "mode": "kinematic",
            "seed": 0,
        }
    )
