"""Drift/diffusion models: the two 3-D benchmark systems and a linear test problem.

Both benchmark systems carry diagonal, state-proportional noise: channel i is
driven by sigma_i(y) = mu * y_i (Newton-Leipnik) or mu * y_i**2 (Lorenz).
Their quadratic drifts also admit an exact bilinear-matrix decomposition,
which doubles as an independent check of the componentwise right-hand sides
and feeds the growth-bound constants below.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "SystemModel",
    "NewtonLeipnikParams",
    "LorenzParams",
    "newton_leipnik",
    "lorenz",
    "linear_test",
    "matrix_form_check",
    "lipschitz_bound",
    "newton_leipnik_matrices",
    "lorenz_matrices",
]

#: Noise intensity used when a caller does not specify one.
DEFAULT_MU = 0.1


@dataclass(frozen=True)
class SystemModel:
    """A d-dimensional system dy = f(t, y) dt + sigma(t, y) dW.

    ``drift(t, y)`` returns a length-d vector; ``diffusion(t, y)`` a
    (d, noise_dim) matrix.  Instances are immutable and their callables pure,
    so a model can be shared freely across concurrent solves.
    """

    name: str
    dim: int
    noise_dim: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        y0 = np.array(self.y0, dtype=float)  # private copy, frozen below
        if y0.shape != (self.dim,):
            raise ValueError(f"y0 must have shape ({self.dim},), got {y0.shape}")
        y0.flags.writeable = False
        object.__setattr__(self, "y0", y0)


@dataclass(frozen=True)
class NewtonLeipnikParams:
    beta: float = 0.4
    rho: float = 0.175
    mu: float = DEFAULT_MU

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not 0.0 <= self.rho <= 8.0:
            warnings.warn(
                f"rho={self.rho} is outside the usual range [0, 8]",
                stacklevel=3,
            )


@dataclass(frozen=True)
class LorenzParams:
    a: float = 10.0       # Prandtl number
    b: float = 8.0 / 3.0  # region size
    c: float = 28.0       # Rayleigh number
    mu: float = DEFAULT_MU

    def __post_init__(self):
        for name in ("a", "b", "c", "mu"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


_NL_Y0 = (0.19, 0.0, -0.18)
_LORENZ_Y0 = (0.1, 0.1, 0.1)


def newton_leipnik(params: NewtonLeipnikParams | None = None,
                   y0=None) -> SystemModel:
    """Newton-Leipnik rigid-body system with diagonal noise diag(mu * y)."""
    p = params or NewtonLeipnikParams()
    beta, rho, mu = p.beta, p.rho, p.mu
    start = np.asarray(_NL_Y0 if y0 is None else y0, dtype=float)

    def drift(t, y):
        x1, x2, x3 = y
        return np.array([
            -beta * x1 + x2 + 10.0 * x2 * x3,
            -x1 - 0.4 * x2 + 5.0 * x1 * x3,
            rho * x3 - 5.0 * x1 * x2,
        ])

    def diffusion(t, y):
        return np.diag(mu * y)

    return SystemModel(
        name="newton_leipnik",
        dim=3,
        noise_dim=3,
        drift=drift,
        diffusion=diffusion,
        y0=start,
        params={"beta": beta, "rho": rho, "mu": mu},
    )


def lorenz(params: LorenzParams | None = None, y0=None) -> SystemModel:
    """Lorenz convection system with diagonal noise diag(mu * y**2)."""
    p = params or LorenzParams()
    a, b, c, mu = p.a, p.b, p.c, p.mu
    start = np.asarray(_LORENZ_Y0 if y0 is None else y0, dtype=float)

    def drift(t, y):
        x1, x2, x3 = y
        return np.array([
            a * (x2 - x1),
            c * x1 - x2 - x1 * x3,
            x1 * x2 - b * x3,
        ])

    def diffusion(t, y):
        return np.diag(mu * y * y)

    return SystemModel(
        name="lorenz",
        dim=3,
        noise_dim=3,
        drift=drift,
        diffusion=diffusion,
        y0=start,
        params={"a": a, "b": b, "c": c, "mu": mu},
    )


def linear_test(lam: float = 1.0, sigma0: float = 0.0, y0: float = 1.0) -> SystemModel:
    """Scalar test problem dy = -lam * y dt + sigma0 dW.

    With sigma0 = 0 its exact solution is the Mittag-Leffler relaxation
    E_alpha(-lam * t**alpha) * y0; with lam = 0 it is a pure additive-noise
    integrator with a closed-form variance.  Both closed forms make it the
    workhorse oracle problem.
    """

    def drift(t, y):
        return -lam * y

    def diffusion(t, y):
        return np.full((1, 1), sigma0)

    return SystemModel(
        name="linear_test",
        dim=1,
        noise_dim=1,
        drift=drift,
        diffusion=diffusion,
        y0=np.array([float(y0)]),
        params={"lam": float(lam), "sigma0": float(sigma0)},
    )


def newton_leipnik_matrices(params: dict):
    """Bilinear decomposition (A, B, C) of the Newton-Leipnik drift:
    F(x) = A x + x_2 (B x) + x_3 (C x)."""
    beta, rho = params["beta"], params["rho"]
    A = np.array([
        [-beta, 1.0, 0.0],
        [-1.0, -0.4, 0.0],
        [0.0, 0.0, rho],
    ])
    # Third-row entry is -5 so x2 * (B @ x) reproduces the -5*x1*x2 coupling.
    B = np.array([
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
        [-5.0, 0.0, 0.0],
    ])
    C = np.array([
        [0.0, 10.0, 0.0],
        [5.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
    ])
    return A, B, C


def lorenz_matrices(params: dict):
    """Bilinear decomposition (A, B) of the Lorenz drift: F(x) = A x + x_1 (B x)."""
    a, b, c = params["a"], params["b"], params["c"]
    A = np.array([
        [-a, a, 0.0],
        [c, -1.0, 0.0],
        [0.0, 0.0, -b],
    ])
    B = np.array([
        [0.0, 0.0, 0.0],
        [0.0, 0.0, -1.0],
        [0.0, 1.0, 0.0],
    ])
    return A, B


def matrix_form_check(model: SystemModel, y) -> float:
    """Max-norm gap between the componentwise drift and its matrix form.

    The bilinear decomposition (A @ y plus state-scaled quadratic couplings)
    is an independent restatement of the right-hand side; for the two
    built-in systems the gap must vanish to rounding (<= 1e-12).
    """
    y = np.asarray(y, dtype=float)
    if model.name == "newton_leipnik":
        A, B, C = newton_leipnik_matrices(model.params)
        matrix_drift = A @ y + y[1] * (B @ y) + y[2] * (C @ y)
    elif model.name == "lorenz":
        A, B = lorenz_matrices(model.params)
        matrix_drift = A @ y + y[0] * (B @ y)
    else:
        raise ValueError(f"no matrix decomposition for system {model.name!r}")
    return float(np.max(np.abs(model.drift(0.0, y) - matrix_drift)))


def lipschitz_bound(model: SystemModel, delta: float) -> float:
    """Quadratic-growth constant of the drift/diffusion pair on a ball of
    radius delta around the initial state.

    Uses the Frobenius norm throughout (the norm choice is free; Frobenius is
    deterministic and easy to verify by hand).  The bound is a diagnostic
    only; the solver never consumes it.
    """
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if model.name not in ("newton_leipnik", "lorenz"):
        raise ValueError(f"no growth bound for system {model.name!r}")
    mu = model.params["mu"]
    x0_sq = float(np.sum(np.asarray(model.y0, dtype=float) ** 2))
    if model.name == "newton_leipnik":
        A, B, C = newton_leipnik_matrices(model.params)
        a2 = float(np.sum(A * A))
        b2 = float(np.sum(B * B))
        c2 = float(np.sum(C * C))
        return a2 + (b2 + c2) * (2.0 * x0_sq + delta) + 3.0 * mu
    A, B = lorenz_matrices(model.params)
    a2 = float(np.sum(A * A))
    b2 = float(np.sum(B * B))
    return a2 + (b2 + 3.0 * mu) * (2.0 * x0_sq + delta)
