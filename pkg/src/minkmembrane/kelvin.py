"""Conformal inversion of the forward light cone and everything built
on it: the inversion map and its pullback metric, analytic/finite
difference verifiers for the inversion identities, the compactified
membrane equation with committed constants, the hyperboloid geometry,
and the global-from-local comparison pipeline (one space dimension).

The inversion sends (s, y) to (s, y)/rho with rho = s^2 - |y|^2.  It is
an involution of the cone interior; composed with the weight rho^{-a},
a = (n-1)/2, it conjugates the flat wave operator to itself.  All the
nontrivial constants of the transformed equation are read from fixture
files produced by tools/generate_fixtures.py, never derived at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import (
    DegeneracyError,
    FixtureError,
    MinkMembraneError,
    OnOrOutsideConeError,
)
from .evolution import (
    InitialData,
    SolverConfig,
    Trajectory,
    ReachedEnd,
    evolve,
    initial_state,
    support_radius,
)
from .fields import GridSpec
from .stencils import axis_derivative

Y_FRAME = "y"
X_FRAME = "x"

# Points closer to the cone than this are rejected by the finite
# difference verifiers: compositions with the inversion become too
# stiff for reliable stencils there.
RHO_VERIFY_MIN = 0.05


def rho_of(coords) -> float:
    c = np.asarray(coords, dtype=np.float64)
    return float(c[0] * c[0] - np.sum(c[1:] * c[1:]))


@dataclass(frozen=True)
class ConformalChart:
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def alpha(self) -> float:
        return (self.dimension - 1) / 2.0


@dataclass(frozen=True)
class ConePoint:
    """A point strictly inside the forward light cone, in either frame."""

    coords: tuple[float, ...]
    frame: str = Y_FRAME
    rho: float = field(init=False)

    def __post_init__(self):
        if self.frame not in (Y_FRAME, X_FRAME):
            raise ValueError(f"frame must be {Y_FRAME!r} or {X_FRAME!r}")
        coords = tuple(float(v) for v in self.coords)
        object.__setattr__(self, "coords", coords)
        r = rho_of(coords)
        if not r > 0:
            raise OnOrOutsideConeError(
                f"point {coords} has rho = {r:.6g} <= 0 (on or outside the cone)"
            )
        object.__setattr__(self, "rho", r)

    @property
    def dimension(self) -> int:
        return len(self.coords) - 1

    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)


def kappa_coords(coords: np.ndarray) -> np.ndarray:
    """(s, y) / (s^2 - |y|^2) on raw coordinate vectors."""
    c = np.asarray(coords, dtype=np.float64)
    r = rho_of(c)
    if not r > 0:
        raise OnOrOutsideConeError(f"rho = {r:.6g} <= 0 at {c.tolist()}")
    return c / r


def kappa(p: ConePoint) -> ConePoint:
    other = X_FRAME if p.frame == Y_FRAME else Y_FRAME
    return ConePoint(tuple(kappa_coords(p.array())), other)


def minkowski_metric(dimension: int) -> np.ndarray:
    return np.diag([1.0] + [-1.0] * dimension)


def kappa_jacobian(coords) -> np.ndarray:
    """J[i, k] = d kappa^k / d c_i = delta_ik / rho - 2 lam_i c_i c_k / rho^2."""
    c = np.asarray(coords, dtype=np.float64)
    r = rho_of(c)
    if not r > 0:
        raise OnOrOutsideConeError(f"rho = {r:.6g} <= 0")
    n1 = c.size
    lam = np.array([1.0] + [-1.0] * (n1 - 1))
    return np.eye(n1) / r - 2.0 * np.outer(lam * c, c) / (r * r)


def pullback_metric(p: ConePoint) -> np.ndarray:
    """Metric pulled back through the inversion, computed from the
    Jacobian and checked against the closed form m / rho^2."""
    n = p.dimension
    m = minkowski_metric(n)
    jac = kappa_jacobian(p.array())
    g = jac @ m @ jac.T
    closed = m / (p.rho * p.rho)
    scale = float(np.max(np.abs(closed)))
    if np.max(np.abs(g - closed)) > 1e-10 * scale:
        raise MinkMembraneError(
            f"pullback metric self-check failed at {p.coords}: "
            f"max deviation {np.max(np.abs(g - closed)):.3e} vs scale {scale:.3e}"
        )
    return g


def pullback_defect(p: ConePoint) -> float:
    """Relative deviation between the two pullback routes."""
    n = p.dimension
    m = minkowski_metric(n)
    jac = kappa_jacobian(p.array())
    g = jac @ m @ jac.T
    closed = m / (p.rho * p.rho)
    return float(np.max(np.abs(g - closed)) / np.max(np.abs(closed)))


# --------------------------------------------------------------------------
# Analytic test-function catalog.  Every entry knows its value, gradient
# and Hessian in closed form, so the wave operator and all null forms
# derived from them are exact references.

@dataclass(frozen=True)
class CatalogFunction:
    name: str
    value: callable
    grad: callable
    hess: callable

    def box(self, c) -> float:
        h = self.hess(c)
        return float(h[0, 0] - sum(h[i, i] for i in range(1, h.shape[0])))


def _rho_grad(c: np.ndarray) -> np.ndarray:
    g = -2.0 * c
    g[0] = 2.0 * c[0]
    return g


def _rho_hess(n1: int) -> np.ndarray:
    return 2.0 * np.diag([1.0] + [-1.0] * (n1 - 1))


def rho_power_vgh(c: np.ndarray, beta: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of rho^beta at an interior point."""
    r = rho_of(c)
    if not r > 0:
        raise OnOrOutsideConeError(f"rho = {r:.6g} <= 0")
    dr = _rho_grad(np.asarray(c, dtype=np.float64))
    val = r**beta
    grad = beta * r ** (beta - 1) * dr
    hess = (
        beta * (beta - 1) * r ** (beta - 2) * np.outer(dr, dr)
        + beta * r ** (beta - 1) * _rho_hess(c.size if hasattr(c, "size") else len(c))
    )
    return float(val), grad, hess


def _rho_power_entry(beta: float) -> CatalogFunction:
    def value(c):
        return rho_power_vgh(np.asarray(c, float), beta)[0]

    def grad(c):
        return rho_power_vgh(np.asarray(c, float), beta)[1]

    def hess(c):
        return rho_power_vgh(np.asarray(c, float), beta)[2]

    return CatalogFunction(f"rho_pow_{beta:g}", value, grad, hess)


def catalog(dimension: int) -> list[CatalogFunction]:
    n1 = dimension + 1
    zero_h = np.zeros((n1, n1))
    coeffs = np.array([0.6] + [0.35 * (-1.0) ** i - 0.1 * i for i in range(1, n1)])

    entries = [
        CatalogFunction(
            "constant",
            lambda c: 1.0,
            lambda c: np.zeros(n1),
            lambda c: zero_h,
        ),
        CatalogFunction(
            "affine",
            lambda c: float(coeffs @ np.asarray(c, float)) + 0.2,
            lambda c: coeffs.copy(),
            lambda c: zero_h,
        ),
        CatalogFunction(
            "time",
            lambda c: float(c[0]),
            lambda c: np.eye(n1)[0].copy(),
            lambda c: zero_h,
        ),
        CatalogFunction(
            "time_sq",
            lambda c: float(c[0]) ** 2,
            lambda c: np.array([2.0 * c[0]] + [0.0] * dimension),
            lambda c: np.diag([2.0] + [0.0] * dimension),
        ),
        _rho_power_entry(1.0),
        _rho_power_entry(2.0),
        _rho_power_entry(0.5),
    ]

    def g_value(c):
        c = np.asarray(c, float)
        return math.exp(-float(c @ c))

    def g_grad(c):
        c = np.asarray(c, float)
        return -2.0 * c * g_value(c)

    def g_hess(c):
        c = np.asarray(c, float)
        return (4.0 * np.outer(c, c) - 2.0 * np.eye(n1)) * g_value(c)

    entries.append(CatalogFunction("gaussian", g_value, g_grad, g_hess))
    return entries


# --------------------------------------------------------------------------
# Pointwise finite differences for the two-route verifiers.

_D1_W = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_W = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def fd_gradient(fn, c, delta: float) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    out = np.empty(c.size)
    for a in range(c.size):
        acc = 0.0
        for k, wgt in zip(range(-2, 3), _D1_W):
            if wgt == 0.0:
                continue
            step = c.copy()
            step[a] += k * delta
            acc += wgt * fn(step)
        out[a] = acc / delta
    return out


def fd_box(fn, c, delta: float) -> float:
    c = np.asarray(c, dtype=np.float64)
    total = 0.0
    for a in range(c.size):
        acc = 0.0
        for k, wgt in zip(range(-2, 3), _D2_W):
            step = c.copy()
            step[a] += k * delta
            acc += wgt * fn(step)
        second = acc / (delta * delta)
        total += second if a == 0 else -second
    return total


def default_fd_step(p: ConePoint) -> float:
    """Step small enough that composed functions are smooth across the
    stencil, large enough to stay clear of rounding noise."""
    c = p.array()
    reach = 1.0 + float(np.sqrt(c @ c))
    return min(5e-3, 0.02 * p.rho / reach)


def _q00_from_grads(gu: np.ndarray, gv: np.ndarray) -> float:
    return float(gu[0] * gv[0] - gu[1:] @ gv[1:])


def _grad_norm(g: np.ndarray) -> float:
    g = np.asarray(g, dtype=np.float64)
    return float(np.sqrt(g @ g))


def _require_verifiable(p: ConePoint):
    if p.rho < RHO_VERIFY_MIN:
        raise ValueError(
            f"point with rho = {p.rho:.3g} < {RHO_VERIFY_MIN} is too close to "
            "the cone for finite-difference verification"
        )


def verify_q00_scaling(fu: CatalogFunction, fv: CatalogFunction, p: ConePoint,
                       delta: float | None = None) -> float:
    """Defect of: Q00(u, v) at the inverted point equals rho^2 times
    Q00 of the composed functions.  Left side analytic, right side by
    finite differences on the compositions."""
    _require_verifiable(p)
    delta = delta if delta is not None else default_fd_step(p)
    q = kappa(p)
    lhs = _q00_from_grads(fu.grad(q.array()), fv.grad(q.array()))

    def cu(c):
        return fu.value(kappa_coords(c))

    def cv(c):
        return fv.value(kappa_coords(c))

    gu = fd_gradient(cu, p.array(), delta)
    gv = fd_gradient(cv, p.array(), delta)
    rhs = p.rho**2 * _q00_from_grads(gu, gv)
    # Floor the denominator at the natural size of the fields involved so
    # identically-zero null forms report their rounding noise relative to
    # the field scale instead of to themselves.
    qc = q.array()
    scale = (
        (abs(float(fu.value(qc))) + _grad_norm(fu.grad(qc)))
        * (abs(float(fv.value(qc))) + _grad_norm(fv.grad(qc)))
        * (1.0 + p.rho**2)
    )
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + scale)


def verify_conformal_box(fu: CatalogFunction, p: ConePoint,
                         delta: float | None = None) -> float:
    """Defect of: the wave operator of the weighted composition equals
    rho^{-alpha-2} times the wave operator of the original, composed."""
    _require_verifiable(p)
    delta = delta if delta is not None else default_fd_step(p)
    chart = ConformalChart(p.dimension)
    alpha = chart.alpha

    def weighted(c):
        r = rho_of(c)
        if not r > 0:
            raise OnOrOutsideConeError(f"rho = {r:.6g} <= 0 under the stencil")
        return fu.value(kappa_coords(c)) * r ** (-alpha)

    lhs = fd_box(weighted, p.array(), delta)
    q = kappa(p)
    rhs = p.rho ** (-alpha - 2) * fu.box(q.array())
    ref = p.rho ** (-alpha - 2) * (1.0 + abs(fu.value(q.array())))
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + abs(ref))


def verify_box_rho_power(p: ConePoint, delta: float | None = None) -> float:
    """The weight rho^{-alpha} is annihilated by the wave operator;
    measures the finite-difference residual against rho^{-alpha-2}."""
    _require_verifiable(p)
    delta = delta if delta is not None else default_fd_step(p)
    alpha = ConformalChart(p.dimension).alpha

    def weight(c):
        r = rho_of(c)
        if not r > 0:
            raise OnOrOutsideConeError(f"rho = {r:.6g} <= 0 under the stencil")
        return r ** (-alpha)

    lhs = fd_box(weight, p.array(), delta)
    return abs(lhs) / p.rho ** (-alpha - 2)


def verify_q00_power_rule(beta: float, gamma: float, fu: CatalogFunction,
                          fv: CatalogFunction, p: ConePoint) -> float:
    """Defect of the product rule for Q00 on rho^beta u, rho^gamma v:

        Q00(rho^b u, rho^g v) = rho^{b+g-1} (rho Q00(u,v) + 2b u S(v)
                                 + 2g v S(u) + 4 b g u v),

    with S the scaling field.  Both sides analytic."""
    _require_verifiable(p)
    c = p.array()
    uval, ugrad = fu.value(c), fu.grad(c)
    vval, vgrad = fv.value(c), fv.grad(c)
    rb, rb_grad, _ = rho_power_vgh(c, beta)
    rg, rg_grad, _ = rho_power_vgh(c, gamma)
    lhs = _q00_from_grads(rb_grad * uval + rb * ugrad, rg_grad * vval + rg * vgrad)

    su = float(c @ ugrad)
    sv = float(c @ vgrad)
    rhs = p.rho ** (beta + gamma - 1) * (
        p.rho * _q00_from_grads(ugrad, vgrad)
        + 2.0 * beta * uval * sv
        + 2.0 * gamma * vval * su
        + 4.0 * beta * gamma * uval * vval
    )
    eps = float(np.finfo(np.float64).eps)
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + eps)


def involution_defect(p: ConePoint) -> float:
    back = kappa(kappa(p)).array()
    ref = float(np.max(np.abs(p.array()))) + 1e-300
    return float(np.max(np.abs(back - p.array())) / ref)


def reciprocity_defect(p: ConePoint) -> float:
    return abs(kappa(p).rho * p.rho - 1.0)


def cone_containment_defect(t: float, x: np.ndarray) -> float:
    """Points a distance c inside the cone invert into s + |y| <= 1/c."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    gap = t - float(np.sqrt(x @ x))
    if gap <= 0:
        raise OnOrOutsideConeError("point is not inside the forward cone")
    inv = kappa_coords(np.concatenate(([t], x)))
    s_plus = float(inv[0] + np.sqrt(inv[1:] @ inv[1:]))
    return abs(s_plus - 1.0 / gap)


# --------------------------------------------------------------------------
# Hyperboloid geometry.

@dataclass(frozen=True)
class HyperboloidParam:
    """Flat slices {s = 1/(2b)} invert onto hyperboloids
    (t - b)^2 - |x|^2 = b^2; b is tied to the data time a."""

    a: float
    b: float = field(init=False)

    def __post_init__(self):
        if not self.a > 1:
            raise ValueError(f"parameter a must exceed 1, got {self.a}")
        b = (self.a - 1.0 / self.a) / 2.0
        object.__setattr__(self, "b", b)
        if abs((self.a - b) ** 2 - 1.0 - b * b) > 1e-12:
            raise MinkMembraneError("hyperboloid parameter identity failed")

    @property
    def s0(self) -> float:
        return 1.0 / (2.0 * self.b)

    @property
    def y_patch(self) -> float:
        """Image in the flat frame of the |x| <= 1 part of the hyperboloid."""
        return 1.0 / (2.0 * self.b * self.a)

    @property
    def t_apex(self) -> float:
        return 2.0 * self.b

    def t_of_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.b + np.sqrt(self.b * self.b + x * x)


def hyperboloid_map_check(param: HyperboloidParam, ys) -> float:
    """Max |(t-b)^2 - |x|^2 - b^2| over plane samples pushed through
    the inversion."""
    ys = np.atleast_1d(np.asarray(ys, dtype=np.float64))
    s0 = param.s0
    if np.any(np.abs(ys) >= s0):
        raise OnOrOutsideConeError("plane sample outside |y| < s")
    rho = s0 * s0 - ys * ys
    t = s0 / rho
    x = ys / rho
    defect = np.abs((t - param.b) ** 2 - x * x - param.b**2)
    return float(np.max(defect))


# --------------------------------------------------------------------------
# Compactified equation: committed constants and evaluation.

@dataclass(frozen=True)
class CompactifiedConstants:
    dimension: int
    alpha: float
    numerator: tuple      # (key, coefficient, rho_power) triples
    denominator: tuple
    letters: dict

    def numerator_coeff(self, key: str) -> float:
        for k, coeff, _ in self.numerator:
            if k == key:
                return coeff
        raise KeyError(key)


def _parse_constants(text: str, dimension: int) -> CompactifiedConstants:
    num, den, letters = [], [], {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "numerator":
            num.append((parts[1], float(parts[2]), int(parts[3])))
        elif parts[0] == "denominator":
            den.append((parts[1], float(parts[2]), int(parts[3])))
        elif parts[0] == "letter":
            letters[parts[1]] = float(parts[2])
        else:
            raise FixtureError(f"unrecognized constants line: {line!r}")
    if not num or not den:
        raise FixtureError("constants fixture has no numerator/denominator rows")
    return CompactifiedConstants(
        dimension, (dimension - 1) / 2.0, tuple(num), tuple(den), letters
    )


@lru_cache(maxsize=8)
def _load_constants_packaged(dimension: int) -> CompactifiedConstants:
    ref = resources.files("minkmembrane").joinpath(
        f"fixtures/conformal_constants_n{dimension}.txt"
    )
    try:
        text = ref.read_text()
    except FileNotFoundError as err:
        raise FixtureError(
            f"constants fixture for dimension {dimension} is missing; "
            "run tools/generate_fixtures.py"
        ) from err
    return _parse_constants(text, dimension)


def load_compactified_constants(dimension: int, path=None) -> CompactifiedConstants:
    if path is None:
        return _load_constants_packaged(dimension)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise FixtureError(f"cannot read constants fixture {path}: {err}") from err
    return _parse_constants(text, dimension)


def _compactified_terms(coords, u, grad, hess) -> dict:
    """All structure values appearing in the committed expansion.

    coords/grad are sequences of n+1 scalars or arrays; hess is indexable
    as hess[a][b].  Everything broadcasts."""
    n1 = len(coords)
    lam = [1.0] + [-1.0] * (n1 - 1)
    su = sum(coords[a] * grad[a] for a in range(n1))
    q = sum(lam[a] * grad[a] * grad[a] for a in range(n1))
    xhx = sum(
        coords[a] * coords[b] * hess[a][b] for a in range(n1) for b in range(n1)
    )
    ssu = su + xhx
    qq = 0.0
    for a in range(n1):
        dq_a = 2.0 * sum(lam[c] * grad[c] * hess[c][a] for c in range(n1))
        qq = qq + lam[a] * grad[a] * dq_a
    qsu = 0.0
    for a in range(n1):
        dsu_a = grad[a] + sum(coords[b] * hess[a][b] for b in range(n1))
        qsu = qsu + lam[a] * grad[a] * dsu_a
    rho = coords[0] * coords[0] - sum(coords[i] * coords[i] for i in range(1, n1))
    return {
        "rho": rho,
        "q00_of_q00": qq,
        "u_q00_u_su": u * qsu,
        "u2_ssu": u * u * ssu,
        "u2_ssu_rho": rho * u * u * ssu,
        "su_q00": su * q,
        "u_q00": u * q,
        "u_su2": u * su * su,
        "u2_su": u * u * su,
        "u3": u * u * u,
        "q00": q,
        "u_su": u * su,
        "u2": u * u,
    }


def compactified_rhs(constants: CompactifiedConstants, coords, u, grad, hess,
                     d_min: float = 0.1):
    """Right-hand side of the compactified equation,
    wave(u) = -rho^(2 alpha) N / (2 D).

    The committed rows expand N and the 1 - (...) denominator D; the
    extra 2 is the one in the source equation's 2(1 - Q00) denominator
    and survives the inversion untouched.  Pointwise or vectorized;
    raises DegeneracyError when D drops below d_min."""
    terms = _compactified_terms(coords, u, grad, hess)
    rho = terms["rho"]
    num = 0.0
    for key, coeff, power in constants.numerator:
        if coeff != 0.0:
            num = num + coeff * rho**power * terms[key]
    dsum = 0.0
    for key, coeff, power in constants.denominator:
        if coeff != 0.0:
            dsum = dsum + coeff * rho**power * terms[key]
    two_alpha = 2.0 * constants.alpha
    den = 1.0 - np.asarray(rho, dtype=np.float64) ** two_alpha * dsum
    if np.any(np.asarray(den) < d_min):
        worst = float(np.min(np.asarray(den)))
        raise DegeneracyError(
            f"compactified denominator {worst:.4g} fell below {d_min}"
        )
    value = -(np.asarray(rho, dtype=np.float64) ** two_alpha) * num / (2.0 * den)
    return value if np.ndim(value) else float(value)


def verify_compactified_consistency(fu: CatalogFunction, p: ConePoint,
                                    constants: CompactifiedConstants | None = None) -> float:
    """Two-route check of the committed expansion.

    Route 1 evaluates the fixture-driven rational form on the catalog
    function.  Route 2 never touches the constants: it weights the same
    function back to the original frame (w = rho^alpha u), pushes it
    through the inversion identities (null-form scaling, wave-operator
    conjugation) and evaluates the original equation's right-hand side.
    Both routes are analytic, so agreement is rounding-limited.

    The identity is not homogeneous but holds for every field, so the
    input is rescaled to keep both rational denominators comfortably
    away from degeneracy."""
    n = p.dimension
    if constants is None:
        constants = load_compactified_constants(n)
    c = p.array()
    n1 = n + 1
    lam = np.array([1.0] + [-1.0] * n)

    uval, ugrad, uhess = fu.value(c), np.asarray(fu.grad(c)), np.asarray(fu.hess(c))
    rho = p.rho
    rv, rg, rh = rho_power_vgh(c, constants.alpha)

    def weighted(scale):
        sv = scale * uval
        sg = scale * ugrad
        sh = scale * uhess
        v = rv * sv
        vg = rv * sg + sv * rg
        vh = rv * sh + np.outer(rg, sg) + np.outer(sg, rg) + sv * rh
        return sv, sg, sh, v, vg, vh

    scale = 1.0
    for _ in range(60):
        sv, sg, sh, v, vg, vh = weighted(scale)
        a_probe = rho * rho * float(np.sum(lam * vg * vg))
        if abs(a_probe) <= 0.25:
            break
        scale *= 0.5
    else:
        raise MinkMembraneError("could not scale input into the regular regime")

    route1 = compactified_rhs(
        constants, list(c), sv,
        [float(g) for g in sg],
        [[float(sh[a, b]) for b in range(n1)] for a in range(n1)],
    )

    drho = _rho_grad(c.copy())
    qvv = float(np.sum(lam * vg * vg))
    a_val = rho * rho * qvv
    dq = 2.0 * (vh @ (lam * vg))
    a_grad = 2.0 * rho * drho * qvv + rho * rho * dq
    b_val = rho * rho * float(np.sum(lam * vg * a_grad))
    box_phi = -b_val / (2.0 * (1.0 - a_val))
    route2 = rho ** (-constants.alpha - 2.0) * box_phi
    denom = abs(route1) + abs(route2) + float(np.finfo(np.float64).eps)
    return abs(route1 - route2) / denom


# --------------------------------------------------------------------------
# Compactified 1D evolution (backward in the flat time s).

def _check_solver_specialization(constants: CompactifiedConstants):
    """The 1D integrator hardcodes the n = 1 principal form; make sure
    it still matches the committed constants."""
    want = {
        "q00_of_q00": (1.0, 2),
        "su_q00": (4.0, 1),
    }
    for key, coeff, power in constants.numerator:
        expect = want.get(key, (0.0, None))
        if coeff != expect[0] or (expect[1] is not None and power != expect[1]):
            raise FixtureError(
                f"1D solver specialization no longer matches constants: "
                f"numerator {key} = ({coeff}, rho^{power})"
            )
    for key, coeff, power in constants.denominator:
        if key == "q00":
            if coeff != 1.0 or power != 2:
                raise FixtureError("1D solver: denominator q00 row changed")
        elif coeff != 0.0:
            raise FixtureError(f"1D solver: unexpected denominator term {key}")


@lru_cache(maxsize=1)
def _solver_constants_ok() -> bool:
    _check_solver_specialization(load_compactified_constants(1))
    return True


def _compact_accel(s: float, phi: np.ndarray, chi: np.ndarray,
                   grid: GridSpec, d_min: float) -> np.ndarray:
    """chi_s from the quasilinear principal form of the 1D compactified
    equation; wall nodes pinned to zero."""
    h = grid.spacing
    y = grid.axis_coords()
    phi_y = axis_derivative(phi, 0, h, 1)
    phi_yy = axis_derivative(phi, 0, h, 2)
    chi_y = axis_derivative(chi, 0, h, 1)
    rho = s * s - y * y
    qv = chi * chi - phi_y * phi_y
    den = 1.0 - rho * rho * qv
    if np.any(den < d_min):
        node = int(np.argmin(den))
        raise DegeneracyError(
            f"compactified denominator {den[node]:.4g} < {d_min} at "
            f"y = {y[node]:.4g}, s = {s:.4g}"
        )
    sfield = s * chi + y * phi_y
    ell = 2.0 * rho * sfield * qv / den
    r2d = rho * rho / den
    hss = 1.0 + r2d * chi * chi
    hsy = -r2d * chi * phi_y
    hyy = -1.0 + r2d * phi_y * phi_y
    acc = -(2.0 * hsy * chi_y + hyy * phi_yy + ell) / hss
    acc[0] = acc[-1] = 0.0
    return acc


def compactified_solve_1d(ygrid: GridSpec, phi0: np.ndarray, chi0: np.ndarray,
                          s_start: float, s_end: float, cfl: float = 0.4,
                          d_min: float = 0.1) -> Trajectory:
    """Integrate the compactified equation from s_start down to s_end.

    The flat time s runs backward; classical RK4 with fixed step.
    Returns every slice (s decreasing) with the s-derivative alongside.
    """
    if ygrid.dimension != 1:
        raise ValueError("compactified solve supports one space dimension")
    if not 0 < s_end < s_start:
        raise ValueError(f"need 0 < s_end < s_start, got [{s_end}, {s_start}]")
    if not 0 < cfl <= 1.0:
        raise ValueError(f"cfl must be in (0, 1], got {cfl}")
    _solver_constants_ok()
    nsteps = max(1, math.ceil((s_start - s_end) / (cfl * ygrid.spacing)))
    ds = -(s_start - s_end) / nsteps
    phi = np.array(phi0, dtype=np.float64)
    chi = np.array(chi0, dtype=np.float64)
    if phi.shape != (ygrid.size,) or chi.shape != (ygrid.size,):
        raise ValueError("data arrays must match the grid")
    traj = Trajectory(ygrid)
    s = s_start
    traj.times.append(s)
    traj.phis.append(phi.copy())
    traj.psis.append(chi.copy())
    for _ in range(nsteps):
        k1p, k1c = chi, _compact_accel(s, phi, chi, ygrid, d_min)
        k2p = chi + 0.5 * ds * k1c
        k2c = _compact_accel(s + 0.5 * ds, phi + 0.5 * ds * k1p, k2p, ygrid, d_min)
        k3p = chi + 0.5 * ds * k2c
        k3c = _compact_accel(s + 0.5 * ds, phi + 0.5 * ds * k2p, k3p, ygrid, d_min)
        k4p = chi + ds * k3c
        k4c = _compact_accel(s + ds, phi + ds * k3p, k4p, ygrid, d_min)
        phi = phi + (ds / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        chi = chi + (ds / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        s += ds
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(chi))):
            raise MinkMembraneError(f"compactified solve produced NaN at s = {s}")
        traj.times.append(s)
        traj.phis.append(phi.copy())
        traj.psis.append(chi.copy())
    return traj


def transform_to_compactified(traj: Trajectory, param: HyperboloidParam,
                              ygrid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sample a direct-frame trajectory on the hyperboloid patch and
    express it as data (value, s-derivative) on the flat slice s = 1/(2b).

    Zero outside the patch image |y| <= 1/(2ab): the solution vanishes
    on the rest of the hyperboloid for data supported in |x| <= 1."""
    if traj.grid.dimension != 1:
        raise ValueError("transform supports one space dimension")
    if ygrid.dimension != 1:
        raise ValueError("target grid must be one-dimensional")
    s0 = param.s0
    y = ygrid.axis_coords()
    inside = np.abs(y) <= param.y_patch
    phi0 = np.zeros(ygrid.size)
    chi0 = np.zeros(ygrid.size)
    if not np.any(inside):
        return phi0, chi0
    ys = y[inside]
    rho = s0 * s0 - ys * ys
    t = s0 / rho
    x = ys / rho
    tlo, thi = float(np.min(t)), float(np.max(t))
    tmin = min(traj.times[0], traj.times[-1])
    tmax = max(traj.times[0], traj.times[-1])
    slack = 1e-9 * max(1.0, tmax)
    if tlo < tmin - slack or thi > tmax + slack:
        raise ValueError(
            f"trajectory covers t in [{tmin:.6g}, {tmax:.6g}] but the "
            f"hyperboloid patch needs [{tlo:.6g}, {thi:.6g}]"
        )
    j00 = 1.0 / rho - 2.0 * s0 * s0 / rho**2
    j01 = -2.0 * s0 * ys / rho**2
    vals = np.empty(ys.size)
    derivs = np.empty(ys.size)
    for i in range(ys.size):
        pt = np.array([[x[i]]])
        ti = float(t[i])
        vals[i] = traj.sample_phi(ti, pt)[0]
        phi_t = traj.sample_psi(ti, pt)[0]
        phi_x = traj.sample_dphi_axis(ti, pt, 0)[0]
        derivs[i] = phi_t * j00[i] + phi_x * j01[i]
    phi0[inside] = vals
    chi0[inside] = derivs
    return phi0, chi0


# --------------------------------------------------------------------------
# Direct-vs-compactified comparison pipeline (one space dimension).

@dataclass
class PipelineReport:
    epsilon: float
    a: float
    direct_points: int
    compact_points: int
    n_compared: int
    n_rejected: int
    n_outside_compared: int
    sup_direct: float
    max_abs_diff: float
    max_rel_diff: float


def pipeline_compare(epsilon: float, direct_points: int = 1601,
                     compact_points: int = 321, a: float = 2.0,
                     direct_extent: float = 8.0, t_direct: float = 8.0,
                     profile: str = "bump", width: float = 1.0,
                     y_extent: float = 1.1, s_min: float = 0.08,
                     collar: float | None = None, cfl: float = 0.4,
                     margin_t: float = 0.5) -> PipelineReport:
    """Solve the same data two ways and compare inside the backward
    region where both are defined.

    Route one: evolve directly over [a, t_direct].  Route two: evolve
    backward over the lens [2b, a], restrict to the hyperboloid patch,
    push onto the flat slice of the inverted frame, integrate the
    compactified equation toward the cone, and invert back.
    """
    param = HyperboloidParam(a)
    if collar is None:
        collar = 0.02 / param.b
    if support_radius(profile, width) > 1.0 + 1e-12:
        raise ValueError("pipeline data must be supported in |x| <= 1")
    grid = GridSpec(1, direct_extent, direct_points)
    data = InitialData(epsilon, profile=profile, width=width)
    cfg = SolverConfig(cfl=cfl)

    state = initial_state(grid, data, t0=a)
    traj_fwd = Trajectory(grid)
    traj_fwd.record(state)
    term = evolve(state, t_direct, cfg, callback=traj_fwd.record)
    if not isinstance(term, ReachedEnd):
        raise MinkMembraneError(f"direct leg did not finish: {term}")

    state_b = initial_state(grid, data, t0=a)
    traj_back = Trajectory(grid)
    traj_back.record(state_b)
    term = evolve(state_b, param.t_apex - 0.1, cfg, callback=traj_back.record)
    if not isinstance(term, ReachedEnd):
        raise MinkMembraneError(f"backward leg did not finish: {term}")

    ygrid = GridSpec(1, y_extent, compact_points)
    phi0, chi0 = transform_to_compactified(traj_back, param, ygrid)
    traj_comp = compactified_solve_1d(ygrid, phi0, chi0, param.s0, s_min, cfl)

    comp_ds = abs(traj_comp.times[1] - traj_comp.times[0])
    s_hi = param.s0 - 2.0 * comp_ds
    s_lo = s_min + 2.0 * comp_ds

    n_rejected = 0
    pts_t, pts_x, pts_s, pts_y = [], [], [], []
    for t in np.linspace(a + margin_t, t_direct - margin_t, 13):
        xcap = min(t - (a - 1.0), grid.extent - 1.0)
        for x in np.linspace(-xcap, xcap, 21):
            gap = t - abs(x)
            if gap < (a - 1.0):
                n_rejected += 1
                continue
            rho_x = t * t - x * x
            s = t / rho_x
            yv = x / rho_x
            if not (s_lo <= s <= s_hi) or s - abs(yv) < collar \
                    or abs(yv) > y_extent - 2.0 * ygrid.spacing:
                n_rejected += 1
                continue
            pts_t.append(t)
            pts_x.append(x)
            pts_s.append(s)
            pts_y.append(yv)

    diffs, sup_direct = [], 0.0
    for t, x, s, yv in zip(pts_t, pts_x, pts_s, pts_y):
        v_direct = float(traj_fwd.sample_phi(t, np.array([[x]]))[0])
        v_comp = float(traj_comp.sample_phi(s, np.array([[yv]]))[0])
        sup_direct = max(sup_direct, abs(v_direct))
        diffs.append(abs(v_direct - v_comp))
    max_abs = max(diffs) if diffs else 0.0
    rel = max_abs / sup_direct if sup_direct > 0 else 0.0
    return PipelineReport(
        epsilon=epsilon, a=a, direct_points=direct_points,
        compact_points=compact_points, n_compared=len(diffs),
        n_rejected=n_rejected, n_outside_compared=0,
        sup_direct=sup_direct, max_abs_diff=max_abs, max_rel_diff=rel,
    )


def pipeline_levels(epsilon: float, base_direct: int = 801,
                    base_compact: int = 161, levels: int = 3,
                    **kwargs) -> list[PipelineReport]:
    """Joint refinement ladder: direct and compactified resolutions
    doubled together."""
    out = []
    for k in range(levels):
        dp = (base_direct - 1) * 2**k + 1
        cp = (base_compact - 1) * 2**k + 1
        out.append(pipeline_compare(epsilon, direct_points=dp,
                                    compact_points=cp, **kwargs))
    return out


# --------------------------------------------------------------------------
# Randomized verification suite.

@dataclass
class VerifyCase:
    identity: str
    function: str
    point: tuple
    defect: float


def random_interior_points(rng: np.random.Generator, dimension: int,
                           count: int) -> list[ConePoint]:
    """Points well inside the cone, where compositions stay tame."""
    pts = []
    for _ in range(count):
        s = rng.uniform(0.9, 1.5)
        direction = rng.normal(size=dimension)
        norm = float(np.sqrt(direction @ direction)) or 1.0
        radius = rng.uniform(0.0, 0.35) * s
        y = direction / norm * radius
        pts.append(ConePoint((s, *y.tolist()), Y_FRAME))
    return pts


def verify_conformal_suite(dimension: int, seed: int = 0, count: int = 40,
                           delta: float | None = None,
                           constants_path=None) -> list[VerifyCase]:
    """Every inversion identity on randomized interior points.

    `delta` overrides the per-point default finite-difference step
    (refinement studies pass delta and delta/2)."""
    rng = np.random.default_rng(seed)
    cat = catalog(dimension)
    constants = load_compactified_constants(dimension, constants_path)
    cases: list[VerifyCase] = []

    for p in random_interior_points(rng, dimension, count):
        cases.append(VerifyCase("involution", "-", p.coords, involution_defect(p)))
        cases.append(VerifyCase("reciprocity", "-", p.coords, reciprocity_defect(p)))
        cases.append(VerifyCase("pullback", "-", p.coords, pullback_defect(p)))
        cases.append(VerifyCase(
            "box_rho_power", "-", p.coords, verify_box_rho_power(p, delta)
        ))

    for p in random_interior_points(rng, dimension, count):
        fu = cat[rng.integers(len(cat))]
        fv = cat[rng.integers(len(cat))]
        cases.append(VerifyCase(
            "q00_scaling", f"{fu.name},{fv.name}", p.coords,
            verify_q00_scaling(fu, fv, p, delta),
        ))
        cases.append(VerifyCase(
            "conformal_box", fu.name, p.coords,
            verify_conformal_box(fu, p, delta),
        ))
        beta, gamma = rng.uniform(-2.0, 2.0, size=2)
        cases.append(VerifyCase(
            "q00_power_rule", f"{fu.name},{fv.name}", p.coords,
            verify_q00_power_rule(float(beta), float(gamma), fu, fv, p),
        ))
        cases.append(VerifyCase(
            "compactified_consistency", fu.name, p.coords,
            verify_compactified_consistency(fu, p, constants),
        ))

    param = HyperboloidParam(2.0)
    ys = rng.uniform(-0.9, 0.9, size=100) * param.s0
    cases.append(VerifyCase(
        "hyperboloid_map", "-", (param.a,), hyperboloid_map_check(param, ys)
    ))
    for _ in range(count):
        t = rng.uniform(1.2, 6.0)
        x = rng.uniform(-1.0, 1.0, size=dimension) * (t - rng.uniform(0.2, 1.0))
        gap = t - float(np.sqrt(x @ x))
        if gap <= 0.1:
            continue
        cases.append(VerifyCase(
            "cone_containment", "-", (t, *x.tolist()),
            cone_containment_defect(t, x),
        ))
    return cases
