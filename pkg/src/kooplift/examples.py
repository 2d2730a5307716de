"""Built-in benchmark systems, loadable by name from the CLI and tests.

``ct-example`` is a continuous-time system with a polynomial autonomous
part and exponential input coupling,

    dx1/dt = coef_mu * x1 - x1 + x1 * exp(u1)
    dx2/dt = coef_lam * (x2 - x1^2) - x2 + u1 * u2 + x2 * exp(u2)

``dt-example`` is a discrete-time control-affine polynomial system,

    x1+ = a1 * x1            + u
    x2+ = a2 * x2 - a3 * x1^2 + x1^2 * u

Both are exactly liftable with the dictionary [x1, x2, x1^2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .dictionaries import Monomial, ObservableDictionary
from .polynomials import PolynomialMap
from .systems import (
    CONTINUOUS,
    DISCRETE,
    Decomposition,
    DomainBox,
    DynamicsOracle,
    control_affine_decomposition,
)


@dataclass
class SystemBundle:
    """A named system with its default dictionary and operating boxes."""

    name: str
    time_domain: str
    decomposition: Decomposition
    dictionary: ObservableDictionary
    state_box: DomainBox
    input_box: DomainBox
    coefficients: Dict[str, float]
    full_oracle: Optional[DynamicsOracle] = None

    @property
    def n_x(self) -> int:
        return self.decomposition.n_x

    @property
    def n_u(self) -> int:
        return self.decomposition.n_u


def _default_dictionary() -> ObservableDictionary:
    return ObservableDictionary(
        2, [Monomial((1, 0)), Monomial((0, 1)), Monomial((2, 0))]
    )


def ct_example(coef_mu: float = -0.05, coef_lam: float = -1.0) -> SystemBundle:
    """Continuous-time benchmark with exponential input nonlinearities."""
    f_c = PolynomialMap(
        2,
        [
            {(1, 0): coef_mu},
            {(0, 1): coef_lam, (2, 0): -coef_lam},
        ],
    )

    def g_eval(x, u):
        # expm1 keeps x*exp(u) - x accurate near u = 0
        return np.array(
            [
                x[0] * math.expm1(u[0]),
                u[0] * u[1] + x[1] * math.expm1(u[1]),
            ]
        )

    def g_input_jacobian(x, u):
        e0 = math.exp(u[0])
        e1 = math.exp(u[1])
        return np.array([[x[0] * e0, 0.0], [u[1], u[0] + x[1] * e1]])

    def g_input_jacobian_batch(x, u_batch):
        u_batch = np.asarray(u_batch, dtype=float)
        out = np.empty((u_batch.shape[0], 2, 2))
        out[:, 0, 0] = x[0] * np.exp(u_batch[:, 0])
        out[:, 0, 1] = 0.0
        out[:, 1, 0] = u_batch[:, 1]
        out[:, 1, 1] = u_batch[:, 0] + x[1] * np.exp(u_batch[:, 1])
        return out

    def g_input_jacobian_ray(x, u, nodes, weights):
        # weighted node average of dg/du(x, nodes_q * u); only the exp
        # entries actually vary with the node, so two dot products suffice
        s_e0 = weights @ np.exp(nodes * u[0])
        s_e1 = weights @ np.exp(nodes * u[1])
        half = weights @ nodes
        return np.array(
            [
                [x[0] * s_e0, 0.0],
                [half * u[1], half * u[0] + x[1] * s_e1],
            ]
        )

    state_box = DomainBox([-2.0, -2.0], [2.0, 2.0])
    input_box = DomainBox([-1.0, -1.0], [1.0, 1.0])
    decomposition = Decomposition(
        n_x=2,
        n_u=2,
        time_domain=CONTINUOUS,
        autonomous=f_c,
        input_driven=g_eval,
        input_jacobian=g_input_jacobian,
        input_jacobian_batch=g_input_jacobian_batch,
        input_jacobian_ray=g_input_jacobian_ray,
        state_box=state_box,
        input_box=input_box,
        name="ct-example",
    )

    def f_d_eval(x, u):
        return f_c.evaluate(x) + g_eval(x, u)

    oracle = DynamicsOracle(
        2,
        2,
        f_d_eval,
        input_jacobian=g_input_jacobian,
        input_jacobian_batch=g_input_jacobian_batch,
        time_domain=CONTINUOUS,
        name="ct-example",
    )
    return SystemBundle(
        name="ct-example",
        time_domain=CONTINUOUS,
        decomposition=decomposition,
        dictionary=_default_dictionary(),
        state_box=state_box,
        input_box=input_box,
        coefficients={"coef_mu": coef_mu, "coef_lam": coef_lam},
        full_oracle=oracle,
    )


def dt_example(a1: float = 0.7, a2: float = 0.7, a3: float = 0.5) -> SystemBundle:
    """Discrete-time control-affine polynomial benchmark."""
    f = PolynomialMap(
        2,
        [
            {(1, 0): a1},
            {(0, 1): a2, (2, 0): -a3},
        ],
    )
    g_col = PolynomialMap(2, [{(0, 0): 1.0}, {(2, 0): 1.0}])
    state_box = DomainBox([-2.0, -2.0], [2.0, 2.0])
    input_box = DomainBox([-1.0], [1.0])
    decomposition = control_affine_decomposition(
        f,
        [g_col],
        DISCRETE,
        state_box=state_box,
        input_box=input_box,
        name="dt-example",
    )

    def f_d_eval(x, u):
        return decomposition.eval_full(x, u)

    oracle = DynamicsOracle(
        2,
        1,
        f_d_eval,
        input_jacobian=decomposition.input_jacobian,
        input_jacobian_batch=decomposition.input_jacobian_batch,
        time_domain=DISCRETE,
        name="dt-example",
    )
    return SystemBundle(
        name="dt-example",
        time_domain=DISCRETE,
        decomposition=decomposition,
        dictionary=_default_dictionary(),
        state_box=state_box,
        input_box=input_box,
        coefficients={"a1": a1, "a2": a2, "a3": a3},
        full_oracle=oracle,
    )


_REGISTRY = {
    "ct-example": ct_example,
    "dt-example": dt_example,
}


def builtin_system(name: str) -> SystemBundle:
    """Instantiate a built-in system by name."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise KeyError(f"unknown built-in system {name!r}; known: {known}") from None
    return factory()


def builtin_names():
    return sorted(_REGISTRY)
