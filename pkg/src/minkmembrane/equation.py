"""The timelike minimal-surface equation in its three equivalent forms.

A graph t -> phi(t, x) over Minkowski space is stationary for the area
functional when

    d_t(phi_t / W) - sum_i d_i(phi_i / W) = 0,    W = sqrt(1 + |grad phi|^2 - phi_t^2),

which can be rewritten as a perturbed wave equation either in divergence
form through F(Q) = -1 + 1/sqrt(1 - Q), or with the right side expressed
through the metric null form

    Q00(u, v) = u_t v_t - sum_i u_i v_i.

All three residual evaluators below expand their outer derivatives by
the chain rule onto a bundle of pointwise first and second derivatives,
so their mutual identities hold to rounding, not to stencil error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NonHyperbolicError
from .fields import GridSpec

# Sign s making  wave(phi) = s * (d_t(phi_t F) - sum_i d_i(phi_i F))  match the
# geometric form; resolved by tools/generate_fixtures.py and recorded in
# fixtures/formulation.json (the plus sign is inconsistent).
DIVERGENCE_SIGN = -1.0

# Hyperbolicity margin used by the solver when none is supplied.
DEFAULT_Q_MAX = 0.9


class Formulation(Enum):
    GEOMETRIC = "geometric"
    DIVERGENCE = "divergence"
    NULLFORM = "nullform"


@dataclass
class DerivativeBundle:
    """Pointwise derivative data of one or more fields on a common grid.

    phi, dt_phi and the entries of grad_phi are flat arrays on `grid`.
    `second` holds the symmetric space-time Hessian keyed by sorted index
    pairs (a, b) with 0 <= a <= b <= n and index 0 meaning d/dt.
    """

    grid: GridSpec
    phi: np.ndarray
    dt_phi: np.ndarray
    grad_phi: list[np.ndarray]
    second: dict[tuple[int, int], np.ndarray] | None = None

    def __post_init__(self):
        n = self.grid.dimension
        if len(self.grad_phi) != n:
            raise ValueError(f"expected {n} spatial gradients, got {len(self.grad_phi)}")
        if self.second is not None:
            want = {(a, b) for a in range(n + 1) for b in range(a, n + 1)}
            if set(self.second) != want:
                raise ValueError(f"second-derivative keys {sorted(self.second)} != {sorted(want)}")

    def d(self, a: int) -> np.ndarray:
        """First derivative with space-time index a (0 = time)."""
        return self.dt_phi if a == 0 else self.grad_phi[a - 1]

    def d2(self, a: int, b: int) -> np.ndarray:
        if self.second is None:
            raise ValueError("bundle carries no second derivatives")
        return self.second[(a, b) if a <= b else (b, a)]


def q00(u: DerivativeBundle, v: DerivativeBundle) -> np.ndarray:
    """Metric null form u_t v_t - sum_i u_i v_i."""
    out = u.dt_phi * v.dt_phi
    for a, b in zip(u.grad_phi, v.grad_phi):
        out = out - a * b
    return out


def qij(u: DerivativeBundle, v: DerivativeBundle, i: int, j: int) -> np.ndarray:
    """Rotation null form u_i v_j - u_j v_i, space-time indices, i != j."""
    if i == j:
        raise ValueError("pair null form needs distinct indices")
    return u.d(i) * v.d(j) - u.d(j) * v.d(i)


def capital_f(q: np.ndarray) -> np.ndarray:
    """F(Q) = -1 + 1/sqrt(1 - Q); requires Q < 1 everywhere."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(q >= 1.0):
        node = int(np.argmax(q))
        raise NonHyperbolicError(
            f"Q00 = {q.flat[node]} >= 1 at node {node}", node=node,
            q_value=float(q.flat[node]),
        )
    return -1.0 + 1.0 / np.sqrt(1.0 - q)


def _q_gradient(b: DerivativeBundle) -> list[np.ndarray]:
    """d_a Q00(phi, phi) for a = 0..n via the chain rule on the Hessian."""
    n = b.grid.dimension
    lam = [1.0] + [-1.0] * n
    grads = []
    for a in range(n + 1):
        g = np.zeros_like(b.phi)
        for c in range(n + 1):
            g += lam[c] * b.d(c) * b.d2(c, a)
        grads.append(2.0 * g)
    return grads


def box_operator(b: DerivativeBundle) -> np.ndarray:
    n = b.grid.dimension
    out = b.d2(0, 0).copy()
    for i in range(1, n + 1):
        out -= b.d2(i, i)
    return out


def _check_hyperbolic(q: np.ndarray, where: str) -> None:
    if np.any(q >= 1.0):
        node = int(np.argmax(q))
        raise NonHyperbolicError(
            f"1 - Q00 <= 0 at node {node} in {where}", node=node,
            q_value=float(q.flat[node]),
        )


def residual_nullform(b: DerivativeBundle) -> np.ndarray:
    """wave(phi) + Q00(phi, Q00(phi,phi)) / (2 (1 - Q00(phi,phi)))."""
    n = b.grid.dimension
    lam = [1.0] + [-1.0] * n
    q = q00(b, b)
    _check_hyperbolic(q, "residual_nullform")
    qgrad = _q_gradient(b)
    qdot = np.zeros_like(b.phi)
    for a in range(n + 1):
        qdot += lam[a] * b.d(a) * qgrad[a]
    return box_operator(b) + qdot / (2.0 * (1.0 - q))


def residual_geometric(b: DerivativeBundle) -> np.ndarray:
    """Chain-rule expansion of d_t(phi_t/W) - sum_i d_i(phi_i/W)."""
    n = b.grid.dimension
    lam = [1.0] + [-1.0] * n
    q = q00(b, b)
    _check_hyperbolic(q, "residual_geometric")
    w = 1.0 - q
    s = 1.0 / np.sqrt(w)
    # d_a (1/sqrt(w)) = (s^3 / 2) d_a Q
    qgrad = _q_gradient(b)
    out = s * box_operator(b)
    for a in range(n + 1):
        out += lam[a] * b.d(a) * 0.5 * s**3 * qgrad[a]
    return out


def residual_divergence(b: DerivativeBundle) -> np.ndarray:
    """wave(phi) - sign * expansion of (d_t(phi_t F) - sum_i d_i(phi_i F)).

    Zero exactly when phi solves the divergence formulation with the
    consistent sign (DIVERGENCE_SIGN).
    """
    n = b.grid.dimension
    lam = [1.0] + [-1.0] * n
    q = q00(b, b)
    _check_hyperbolic(q, "residual_divergence")
    f = capital_f(q)
    fprime = 0.5 * (1.0 - q) ** -1.5
    qgrad = _q_gradient(b)
    div = f * box_operator(b)
    for a in range(n + 1):
        div += lam[a] * b.d(a) * fprime * qgrad[a]
    return box_operator(b) - DIVERGENCE_SIGN * div


def residual(b: DerivativeBundle, formulation: Formulation) -> np.ndarray:
    return {
        Formulation.GEOMETRIC: residual_geometric,
        Formulation.DIVERGENCE: residual_divergence,
        Formulation.NULLFORM: residual_nullform,
    }[formulation](b)


def principal_coefficients(b: DerivativeBundle, q_max: float = 1.0) -> np.ndarray:
    """Coefficients h[a,b] with h[a,b] d_a d_b phi = residual_nullform.

    h = m + (raised dphi) x (raised dphi) / (1 - Q00), shape (n+1, n+1, nodes).
    h[0,0] >= 1 whenever Q00 < 1, so time evolution can always divide by it.
    """
    n = b.grid.dimension
    lam = [1.0] + [-1.0] * n
    q = q00(b, b)
    if np.any(q >= q_max):
        node = int(np.argmax(q))
        raise NonHyperbolicError(
            f"Q00 = {q.flat[node]} >= {q_max} at node {node}", node=node,
            q_value=float(q.flat[node]),
        )
    w = 1.0 / (1.0 - q)
    h = np.empty((n + 1, n + 1) + b.phi.shape, dtype=np.float64)
    raised = [lam[a] * b.d(a) for a in range(n + 1)]
    for a in range(n + 1):
        for c in range(a, n + 1):
            val = raised[a] * raised[c] * w
            if a == c:
                val = val + lam[a]
            h[a, c] = val
            h[c, a] = val
    return h


def random_bundle(grid: GridSpec, rng: np.random.Generator,
                  q_cap: float = 0.5) -> DerivativeBundle:
    """Random pointwise derivative data with sup |Q00| strictly below q_cap.

    First derivatives are drawn small enough that the null form cannot
    reach the cap; second derivatives and values are order one.  Used by
    the formulation-equivalence checks, which are pure algebra on the
    bundle and need no consistency between the sampled derivatives.
    """
    n = grid.dimension
    m = grid.size
    amp = np.sqrt(0.9 * q_cap / (n + 1))
    dt_phi = rng.uniform(-amp, amp, m)
    grad = [rng.uniform(-amp, amp, m) for _ in range(n)]
    second = {
        (a, b): rng.uniform(-1.0, 1.0, m)
        for a in range(n + 1) for b in range(a, n + 1)
    }
    return DerivativeBundle(grid, rng.uniform(-1.0, 1.0, m), dt_phi, grad, second)
