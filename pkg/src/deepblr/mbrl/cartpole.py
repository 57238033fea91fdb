"""Continuous-force cart-pole, self-contained and bit-reproducible.

Physics (frictionless, classic pole-balancing equations):

    cart mass        m_c = 1.0 kg
    pole mass        m_p = 0.1 kg
    pole half-length l   = 0.5 m      (center of mass at l from the pivot)
    gravity          g   = 9.8 m/s^2
    time step        dt  = 0.02 s

    temp      = (F + m_p l w^2 sin t) / (m_c + m_p)
    theta_acc = (g sin t - cos t * temp)
                / (l (4/3 - m_p cos^2 t / (m_c + m_p)))
    x_acc     = temp - m_p l theta_acc cos t / (m_c + m_p)

integrated with semi-implicit Euler (velocities first, then positions
with the new velocities).  The force is clipped to +/-10 N, the cart
position to +/-10 m.  Angle 0 is upright; reward is evaluated on the
state the step produces:

    reward = cos(theta) - 0.001 x^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
POLE_HALF_LENGTH = 0.5
DT = 0.02
ACTION_LIMIT = 10.0
POSITION_LIMIT = 10.0

_TOTAL_MASS = CART_MASS + POLE_MASS


@dataclass(frozen=True)
class EnvState:
    cart_position: float
    cart_velocity: float
    pole_angle: float
    pole_angular_velocity: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cart_position, self.cart_velocity, self.pole_angle,
                self.pole_angular_velocity)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError("environment state must be finite")


def reward_of(state: EnvState) -> float:
    return math.cos(state.pole_angle) - 0.001 * state.cart_position ** 2


def cartpole_step(state: EnvState, action: float):
    """Advance one step; returns (next_state, reward).

    Pure function: identical (state, action) pairs always produce
    identical results.
    """
    force = min(max(float(action), -ACTION_LIMIT), ACTION_LIMIT)
    x, v, theta, omega = state.as_tuple()
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)

    temp = (force + POLE_MASS * POLE_HALF_LENGTH * omega * omega * sin_t) \
        / _TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) \
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t * cos_t / _TOTAL_MASS))
    x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * theta_acc * cos_t / _TOTAL_MASS

    new_v = v + DT * x_acc
    new_omega = omega + DT * theta_acc
    new_x = min(max(x + DT * new_v, -POSITION_LIMIT), POSITION_LIMIT)
    new_theta = theta + DT * new_omega

    nxt = EnvState(new_x, new_v, new_theta, new_omega)
    return nxt, reward_of(nxt)


def initial_state(rng, angle_range: float = 0.3,
                  velocity_range: float = 0.5) -> EnvState:
    """Perturbed upright start: angle and angular velocity drawn uniformly."""
    return EnvState(0.0, 0.0,
                    float(rng.uniform(-angle_range, angle_range)),
                    float(rng.uniform(-velocity_range, velocity_range)))


def mechanical_energy(state: EnvState) -> float:
    """Kinetic + potential energy of the cart-pole (zero force reference).

    The pole is a uniform rod of length 2l pivoting at the cart, so its
    center-of-mass moves with (v + l w cos t, -l w sin t) and carries
    rotational inertia m_p l^2 / 3 about the center of mass.
    """
    x, v, theta, omega = state.as_tuple()
    l = POLE_HALF_LENGTH
    kinetic_cart = 0.5 * CART_MASS * v * v
    kinetic_pole = 0.5 * POLE_MASS * (
        v * v + 2.0 * v * l * omega * math.cos(theta) + l * l * omega * omega)
    kinetic_rot = 0.5 * (POLE_MASS * l * l / 3.0) * omega * omega
    potential = POLE_MASS * GRAVITY * l * math.cos(theta)
    return kinetic_cart + kinetic_pole + kinetic_rot + potential
