"""Continuous-time SISO LTI models: transfer functions, state-space realization
and fixed-step integration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Internal integration step never exceeds this (seconds).
MAX_SUBSTEP = 1e-3


class ModelError(ValueError):
    """Improper or degenerate model definition."""


class PoleError(ZeroDivisionError):
    """Transfer function evaluated at one of its poles."""


class NumericalDivergenceError(ArithmeticError):
    def __init__(self, time: float, message: str = "state became non-finite"):
        super().__init__(f"{message} at t={time:.6g} s")
        self.time = time


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(v) for v in coeffs]
    while len(c) > 1 and c[0] == 0.0:
        c.pop(0)
    return tuple(c)


@dataclass(frozen=True)
class TransferFunction:
    """num(s)/den(s), coefficients highest power first."""

    numerator: tuple[float, ...]
    denominator: tuple[float, ...]

    def __init__(self, numerator: Sequence[float], denominator: Sequence[float]):
        if len(numerator) == 0 or len(denominator) == 0:
            raise ModelError("numerator and denominator need at least one coefficient")
        if float(denominator[0]) == 0.0:
            raise ModelError("leading denominator coefficient must be nonzero")
        num = _trim(numerator)
        den = tuple(float(v) for v in denominator)
        if not all(math.isfinite(v) for v in num + den):
            raise ModelError("coefficients must be finite")
        if len(num) > len(den):
            raise ModelError(
                f"improper transfer function: numerator degree {len(num) - 1} "
                f"> denominator degree {len(den) - 1}"
            )
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @property
    def order(self) -> int:
        return len(self.denominator) - 1

    def __call__(self, s: complex) -> complex:
        return evaluate(self, s)

    def dc_gain(self) -> float:
        return evaluate(self, 0.0).real

    def poles(self) -> np.ndarray:
        return np.roots(self.denominator)

    def zeros(self) -> np.ndarray:
        return np.roots(self.numerator)


def evaluate(tf: TransferFunction, s: complex) -> complex:
    """num(s)/den(s); raises PoleError when den(s) vanishes."""
    den = np.polyval(tf.denominator, s)
    if den == 0:
        raise PoleError(f"s={s} is a pole of the transfer function")
    return complex(np.polyval(tf.numerator, s) / den)


@dataclass
class StateSpaceModel:
    """x' = A x + B u, y = C x + D u.

    ``B`` is n x m and ``D`` is 1 x m so that cascaded models can carry a
    second (disturbance) input; models produced by :func:`to_state_space`
    have m = 1 and accept a scalar input.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    state: np.ndarray = field(default=None)  # type: ignore[assignment]
    time: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        self.A = np.zeros((0, 0)) if A.size == 0 else np.atleast_2d(A)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ModelError(f"A must be square, got {self.A.shape}")
        self.D = np.asarray(self.D, dtype=float).reshape(1, -1)
        m = self.D.shape[1]
        self.B = np.asarray(self.B, dtype=float).reshape(n, m)
        self.C = np.asarray(self.C, dtype=float).reshape(1, n)
        if self.state is None:
            self.state = np.zeros(n)
        else:
            self.state = np.asarray(self.state, dtype=float).reshape(n)
        self._discrete: dict[float, tuple[np.ndarray, np.ndarray, int]] = {}

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    def _input(self, u) -> np.ndarray:
        if isinstance(u, np.ndarray) and u.shape == (self.n_inputs,):
            return u
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size == 1 and self.n_inputs > 1:
            u = np.concatenate([u, np.zeros(self.n_inputs - 1)])
        if u.size != self.n_inputs:
            raise ModelError(f"expected {self.n_inputs} inputs, got {u.size}")
        return u

    def reset(self) -> None:
        self.state = np.zeros(self.n_states)
        self.time = 0.0

    def output(self, u=0.0) -> float:
        return float((self.C @ self.state)[0] + (self.D @ self._input(u))[0])

    def output_derivative(self, u=0.0) -> float:
        """dy/dt = C (A x + B u) for an input held constant."""
        return float((self.C @ (self.A @ self.state + self.B @ self._input(u)))[0])

    def frequency_response(self, s: complex) -> complex:
        n = self.n_states
        d = complex(self.D[0, 0])
        if n == 0:
            return d
        resolvent = np.linalg.solve(s * np.eye(n) - self.A, self.B[:, :1].astype(complex))
        return complex((self.C @ resolvent)[0, 0]) + d

    def _propagator(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        # Classical RK4 applied to x' = Ax + Bu with u held constant is the
        # linear map x -> T(hA) x + h S(hA) B u; composing `nsub` of them
        # over one call is exactly RK4 sub-stepping, precomputed.
        cached = self._discrete.get(dt)
        if cached is not None:
            return cached[0], cached[1]
        nsub = max(1, math.ceil(dt / MAX_SUBSTEP - 1e-9))
        h = dt / nsub
        n = self.n_states
        eye = np.eye(n)
        M = h * self.A
        M2 = M @ M
        M3 = M2 @ M
        T = eye + M + M2 / 2 + M3 / 6 + (M3 @ M) / 24
        S = h * (eye + M / 2 + M2 / 6 + M3 / 24) @ self.B
        phi = np.eye(n)
        gamma = np.zeros_like(S)
        for _ in range(nsub):
            phi = T @ phi
            gamma = T @ gamma + S
        self._discrete[dt] = (phi, gamma, nsub)
        return phi, gamma

    def step(self, u, dt: float) -> float:
        """Advance by ``dt`` under zero-order-hold input and return the output."""
        if not dt > 0:
            raise ModelError(f"dt must be positive, got {dt}")
        uu = self._input(u)
        if self.n_states:
            phi, gamma = self._propagator(dt)
            with np.errstate(over="ignore", invalid="ignore"):
                new_state = phi @ self.state + gamma @ uu
            if not np.all(np.isfinite(new_state)):
                raise NumericalDivergenceError(self.time + dt)
            self.state = new_state
        self.time += dt
        return float((self.C @ self.state)[0] + (self.D @ uu)[0])


def to_state_space(tf: TransferFunction) -> StateSpaceModel:
    """Controllable canonical realization of ``tf`` with zero initial state."""
    if not isinstance(tf, TransferFunction):
        raise ModelError("expected a TransferFunction")
    a0 = tf.denominator[0]
    den = np.asarray(tf.denominator) / a0
    n = len(den) - 1
    num = np.zeros(n + 1)
    num[n + 1 - len(tf.numerator):] = np.asarray(tf.numerator) / a0
    d = num[0]
    if n == 0:
        return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[d]])
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = (num[1:] - d * den[1:]).reshape(1, n)
    return StateSpaceModel(A, B, C, [[d]])


def step(model: StateSpaceModel, u, dt: float) -> float:
    return model.step(u, dt)


def cascade(first: StateSpaceModel | None, second: StateSpaceModel) -> StateSpaceModel:
    """Series connection ``first -> second`` as a two-input model.

    Inputs are ``[v, d]``: ``v`` drives ``first`` and ``d`` is added to the
    signal entering ``second``. With ``first=None`` the input ``v`` enters
    ``second`` directly.
    """
    A2, B2, C2, D2 = second.A, second.B[:, :1], second.C, second.D[:, :1]
    if first is None:
        return StateSpaceModel(A2, np.hstack([B2, B2]), C2, np.hstack([D2, D2]))
    A1, B1, C1, D1 = first.A, first.B[:, :1], first.C, first.D[:, :1]
    n1, n2 = A1.shape[0], A2.shape[0]
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = A1
    A[n1:, :n1] = B2 @ C1
    A[n1:, n1:] = A2
    B = np.zeros((n1 + n2, 2))
    B[:n1, 0:1] = B1
    B[n1:, 0:1] = B2 @ D1
    B[n1:, 1:2] = B2
    C = np.hstack([D2 @ C1, C2])
    D = np.hstack([D2 @ D1, D2])
    return StateSpaceModel(A, B, C, D)


PLANTS: dict[str, TransferFunction] = {
    # Boeing 747-400 pitch angle / elevator deflection
    "pitch_747": TransferFunction(
        [-1.69144, -0.84341, -0.0099096],
        [1.0, 1.17103, 1.55405, 0.012538, 0.0072771],
    ),
    # elevator servo, tau = 0.1 s
    "servo_747": TransferFunction([10.0], [1.0, 10.0]),
    # short-period approximation; free integrator from elevator to pitch
    "short_period": TransferFunction([11.7304, 22.578], [1.0, 4.9676, 12.941, 0.0]),
}


class UnknownPlantError(KeyError):
    pass


def get_plant(name: str) -> TransferFunction:
    try:
        return PLANTS[name]
    except KeyError:
        raise UnknownPlantError(
            f"unknown plant {name!r}; available: {', '.join(sorted(PLANTS))}"
        ) from None
