"""Unicycle cart dynamics with per-wheel quantized brakes.

The cart is a differential pair of rear wheels pushed by the user;
steering authority comes only from braking.  Each wheel's brake is either
fully released or fully engaged, which yields exactly four commands:
go straight, turn right, turn left, stop.  A fully braked wheel pins the
motion to a circle of radius ``R = d/2`` around that wheel.

Two stepping fidelities are provided.  ``step_kinematic`` takes the forward
speed as given and integrates the pose in closed form (exact lines and
arcs, no discretization drift).  ``step_dynamic`` integrates force/torque
balance with RK4, modeling brakes either as an instantaneous wheel lock or
as a strong viscous dissipator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum


class NonPositiveDt(ValueError):
    """Raised when a stepping function receives dt <= 0."""


class Maneuver(Enum):
    """The four admissible brake actions."""

    GO_STRAIGHT = "go_straight"
    TURN_RIGHT = "turn_right"
    TURN_LEFT = "turn_left"
    STOP = "stop"

    @property
    def label(self) -> str:
        return self.value


@dataclass(frozen=True)
class BrakeCommand:
    """A quantized brake command and its per-wheel expansion."""

    action: Maneuver

    @classmethod
    def go_straight(cls) -> "BrakeCommand":
        return cls(Maneuver.GO_STRAIGHT)

    @classmethod
    def turn_right(cls) -> "BrakeCommand":
        return cls(Maneuver.TURN_RIGHT)

    @classmethod
    def turn_left(cls) -> "BrakeCommand":
        return cls(Maneuver.TURN_LEFT)

    @classmethod
    def stop(cls) -> "BrakeCommand":
        return cls(Maneuver.STOP)

    def wheel_settings(self, b_max: float) -> tuple[tuple[float, float], tuple[float, float]]:
        """Per-wheel ``(b_brake, c_hold)`` pairs, right wheel first.

        ``b_brake`` is the brake's viscous coefficient (0 or ``b_max``) and
        ``c_hold`` the at-rest holding fraction (0 or 1).
        """
        right_braked = self.action in (Maneuver.TURN_RIGHT, Maneuver.STOP)
        left_braked = self.action in (Maneuver.TURN_LEFT, Maneuver.STOP)
        return (
            (b_max if right_braked else 0.0, 1.0 if right_braked else 0.0),
            (b_max if left_braked else 0.0, 1.0 if left_braked else 0.0),
        )


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters (SI units).

    Defaults are plausible rollator values chosen for this artifact; they
    are configuration, not measured ground truth.
    """

    m: float = 20.0       # mass, kg
    J: float = 1.0        # yaw inertia, kg m^2
    J_w: float = 0.01     # wheel inertia, kg m^2
    d: float = 0.6        # rear axle length, m
    r: float = 0.1        # wheel radius, m
    b_w: float = 0.05     # rolling viscous coefficient, N m s
    b_max: float = 50.0   # brake viscous coefficient when engaged, N m s

    def __post_init__(self) -> None:
        for name in ("m", "J", "J_w", "d", "r", "b_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.b_w < 0.0:
            raise ValueError("b_w must be nonnegative")

    @property
    def R(self) -> float:
        """Minimum turning radius under a single locked wheel."""
        return self.d / 2.0


@dataclass(frozen=True)
class UserInput:
    """Constant handle torques transmitted to the wheels, N m."""

    tau_r: float = 0.0
    tau_l: float = 0.0

    @classmethod
    def from_wrench(cls, force: float, torque: float, params: VehicleParams) -> "UserInput":
        return cls(*wrench_to_torques(force, torque, params))


@dataclass(frozen=True)
class VehicleState:
    """World pose, body rates and wheel rates."""

    x: float
    y: float
    theta: float
    v: float
    omega: float
    alpha_dot_r: float
    alpha_dot_l: float

    @classmethod
    def from_body_rates(
        cls, x: float, y: float, theta: float, v: float, omega: float, params: VehicleParams
    ) -> "VehicleState":
        adr, adl = wheel_rates(v, omega, params)
        return cls(x, y, theta, v, omega, adr, adl)

    def pose(self) -> tuple[float, float, float]:
        return self.x, self.y, self.theta

    def rates_consistent(self, params: VehicleParams, tol: float = 1e-9) -> bool:
        v = params.r * (self.alpha_dot_r + self.alpha_dot_l) / 2.0
        w = params.r * (self.alpha_dot_r - self.alpha_dot_l) / params.d
        return abs(v - self.v) <= tol and abs(w - self.omega) <= tol

    def kinetic_energy(self, params: VehicleParams) -> float:
        return 0.5 * params.m * self.v**2 + 0.5 * params.J * self.omega**2


def wheel_rates(v: float, omega: float, params: VehicleParams) -> tuple[float, float]:
    """Wheel spin rates consistent with body rates under pure rolling."""
    return (v + omega * params.d / 2.0) / params.r, (v - omega * params.d / 2.0) / params.r


def torques_to_wrench(tau_r: float, tau_l: float, params: VehicleParams) -> tuple[float, float]:
    """Map wheel torques to body force and yaw torque."""
    force = (tau_r + tau_l) / params.r
    torque = (tau_r - tau_l) * params.d / (2.0 * params.r)
    return force, torque


def wrench_to_torques(force: float, torque: float, params: VehicleParams) -> tuple[float, float]:
    """Exact inverse of :func:`torques_to_wrench`."""
    tau_r = (force * params.r + 2.0 * torque * params.r / params.d) / 2.0
    tau_l = (force * params.r - 2.0 * torque * params.r / params.d) / 2.0
    return tau_r, tau_l


def effective_wheel_torque(
    tau_h: float,
    brake: tuple[float, float],
    alpha_dot: float,
    params: VehicleParams,
) -> float:
    """Net torque on one wheel given its brake setting ``(b_brake, c_hold)``.

    A spinning wheel sees the user torque minus brake and rolling viscous
    drag.  A wheel at rest is held by the engaged brake (the holding torque
    cancels the user torque), or passes the user torque through when free.
    """
    b_brake, c_hold = brake
    if alpha_dot != 0.0:
        return tau_h - b_brake * alpha_dot - params.b_w * alpha_dot
    return (1.0 - c_hold) * tau_h


def step_kinematic(
    state: VehicleState,
    command: BrakeCommand,
    v_user: float,
    dt: float,
    params: VehicleParams,
) -> VehicleState:
    """Advance the pose exactly over dt at the user-imposed forward speed.

    The command fixes the angular rate: 0 when free, ``-v/R`` turning right,
    ``+v/R`` turning left; Stop halts instantly (wheel lock time is treated
    as negligible) and leaves the pose unchanged.
    """
    if dt <= 0.0:
        raise NonPositiveDt(f"dt={dt}")
    if command.action is Maneuver.STOP:
        return replace(state, v=0.0, omega=0.0, alpha_dot_r=0.0, alpha_dot_l=0.0)
    v = max(0.0, v_user)
    if command.action is Maneuver.GO_STRAIGHT:
        omega = 0.0
        x = state.x + v * dt * math.cos(state.theta)
        y = state.y + v * dt * math.sin(state.theta)
        theta = state.theta
    else:
        sign = -1.0 if command.action is Maneuver.TURN_RIGHT else 1.0
        omega = sign * v / params.R
        theta = state.theta + omega * dt
        if v > 0.0:
            rho = v / omega  # signed turn radius, magnitude R
            x = state.x + rho * (math.sin(theta) - math.sin(state.theta))
            y = state.y - rho * (math.cos(theta) - math.cos(state.theta))
        else:
            x, y = state.x, state.y
            theta = state.theta  # no motion, no rotation about a wheel
            omega = 0.0
    return VehicleState.from_body_rates(x, y, theta, v, omega, params)


def _free_derivatives(
    state_vec: tuple[float, float, float, float, float],
    command: BrakeCommand,
    user: UserInput,
    params: VehicleParams,
) -> tuple[float, float, float, float, float]:
    """Smooth field: viscous brakes act on the rolling-consistent wheel rates."""
    x, y, theta, v, omega = state_vec
    brake_r, brake_l = command.wheel_settings(params.b_max)
    adr, adl = wheel_rates(v, omega, params)
    tau_r = effective_wheel_torque(user.tau_r, brake_r, adr, params)
    tau_l = effective_wheel_torque(user.tau_l, brake_l, adl, params)
    force, torque = torques_to_wrench(tau_r, tau_l, params)
    return (
        v * math.cos(theta),
        v * math.sin(theta),
        omega,
        force / params.m,
        torque / params.J,
    )


def _rk4(vec, deriv, dt):
    k1 = deriv(vec)
    k2 = deriv(tuple(a + 0.5 * dt * b for a, b in zip(vec, k1)))
    k3 = deriv(tuple(a + 0.5 * dt * b for a, b in zip(vec, k2)))
    k4 = deriv(tuple(a + dt * b for a, b in zip(vec, k3)))
    return tuple(
        a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(vec, k1, k2, k3, k4)
    )


def _snap_to_lock(state: VehicleState, command: BrakeCommand, params: VehicleParams) -> VehicleState:
    """Instantly zero the braked wheel rates, keeping the free wheel's rate."""
    if command.action is Maneuver.STOP:
        return replace(state, v=0.0, omega=0.0, alpha_dot_r=0.0, alpha_dot_l=0.0)
    if command.action is Maneuver.TURN_RIGHT:
        u = state.alpha_dot_l
        v = params.r * u / 2.0
        omega = -params.r * u / params.d
    else:
        u = state.alpha_dot_r
        v = params.r * u / 2.0
        omega = params.r * u / params.d
    return VehicleState.from_body_rates(state.x, state.y, state.theta, v, omega, params)


def _locked_derivatives(
    vec: tuple[float, float, float, float],
    command: BrakeCommand,
    user: UserInput,
    params: VehicleParams,
) -> tuple[float, float, float, float]:
    """One-wheel-locked motion: single degree of freedom, the free wheel rate."""
    x, y, theta, u = vec
    right_locked = command.action is Maneuver.TURN_RIGHT
    tau_free = (user.tau_l if right_locked else user.tau_r) - params.b_w * u
    m_eff = params.m * params.r**2 / 4.0 + params.J * params.r**2 / params.d**2
    v = params.r * u / 2.0
    omega = (-1.0 if right_locked else 1.0) * params.r * u / params.d
    return (v * math.cos(theta), v * math.sin(theta), omega, tau_free / m_eff)


def step_dynamic(
    state: VehicleState,
    command: BrakeCommand,
    user: UserInput,
    dt: float,
    params: VehicleParams,
    brake_model: str = "instant",
) -> VehicleState:
    """Advance the full dynamic state over dt with fixed-step RK4.

    ``brake_model="instant"`` locks a braked wheel immediately (snapping its
    spin rate to zero and projecting the body rates) and then integrates the
    remaining degree of freedom.  ``brake_model="viscous"`` keeps all wheels
    free and applies the engaged brake as a strong viscous torque, giving an
    exponential transient with time constant ~ J_w / b_max.  The forward
    speed is clamped nonnegative; reverse motion is out of scope.
    """
    if dt <= 0.0:
        raise NonPositiveDt(f"dt={dt}")
    if brake_model not in ("instant", "viscous"):
        raise ValueError(f"unknown brake model {brake_model!r}")

    if brake_model == "instant" and command.action is not Maneuver.GO_STRAIGHT:
        state = _snap_to_lock(state, command, params)
        if command.action is Maneuver.STOP:
            return state
        vec = (state.x, state.y, state.theta, state.alpha_dot_l
               if command.action is Maneuver.TURN_RIGHT else state.alpha_dot_r)
        vec = _rk4(vec, lambda w: _locked_derivatives(w, command, user, params), dt)
        u = max(0.0, vec[3])
        v = params.r * u / 2.0
        omega = (-1.0 if command.action is Maneuver.TURN_RIGHT else 1.0) * params.r * u / params.d
        return VehicleState.from_body_rates(vec[0], vec[1], vec[2], v, omega, params)

    vec = (state.x, state.y, state.theta, state.v, state.omega)
    vec = _rk4(vec, lambda w: _free_derivatives(w, command, user, params), dt)
    x, y, theta, v, omega = vec
    if v < 0.0:
        v = 0.0
    return VehicleState.from_body_rates(x, y, theta, v, omega, params)
