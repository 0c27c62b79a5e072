"""Measurement suite built on the symmetry vector fields of the flat wave
operator: translations, hyperbolic rotations (boosts), spatial rotations
and the scaling field.

Everything here is read-only over field windows.  Products of vector
fields are applied window-to-window so that time components can be
differentiated again; the final application in any product only needs
the newest slice and uses the cheaper path.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .equation import DerivativeBundle, q00, qij
from .errors import DegeneracyError, FixtureError
from .fields import GridSpec, ScalarField
from .util import parallel_map
from .windows import NSLICES, FieldWindow, bundle_from_window

MAX_GAMMA_ORDER = 3


@dataclass(frozen=True)
class GammaIndex:
    """One vector field of the symmetry family.

    kind "translation": d/dx_j, with j = 0 the time direction.
    kind "pair": lam_j x_j d_k - lam_k x_k d_j for j != k, where
        lam = (1, -1, ..., -1) and x_0 = t; j = 0 gives a boost, two
        spatial indices give a rotation.
    kind "scaling": sum_a x_a d_a over all space-time directions.
    """

    kind: str
    j: int = 0
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("translation", "pair", "scaling"):
            raise ValueError(f"unknown vector-field kind {self.kind!r}")
        if self.kind == "pair" and self.j == self.k:
            raise ValueError("pair field needs two distinct indices")
        if min(self.j, self.k) < 0:
            raise ValueError("indices must be nonnegative")

    def label(self) -> str:
        if self.kind == "translation":
            return f"d{self.j}"
        if self.kind == "pair":
            return f"g{self.j}{self.k}"
        return "scale"


def translation(a: int) -> GammaIndex:
    return GammaIndex("translation", a, a)


def pair(j: int, k: int) -> GammaIndex:
    return GammaIndex("pair", j, k)


def scaling() -> GammaIndex:
    return GammaIndex("scaling")


def gamma_basis(dimension: int, include_translations: bool = True,
                include_scaling: bool = True) -> list[GammaIndex]:
    """The vector-field family for `dimension` space dimensions, in the
    fixed order translations, pairs (lexicographic), scaling."""
    ops: list[GammaIndex] = []
    if include_translations:
        ops.extend(translation(a) for a in range(dimension + 1))
    ops.extend(
        pair(j, k)
        for j in range(dimension + 1)
        for k in range(j + 1, dimension + 1)
    )
    if include_scaling:
        ops.append(scaling())
    return ops


@lru_cache(maxsize=64)
def _coord_flat(grid: GridSpec, axis: int) -> np.ndarray:
    c = np.ascontiguousarray(
        np.broadcast_to(grid.mesh(axis), grid.shape).reshape(grid.size, order="F")
    )
    c.setflags(write=False)
    return c


@lru_cache(maxsize=64)
def _radius_flat(grid: GridSpec) -> np.ndarray:
    r = np.ascontiguousarray(grid.radius().reshape(grid.size, order="F"))
    r.setflags(write=False)
    return r


def _lam(a: int) -> float:
    return 1.0 if a == 0 else -1.0


def _gamma_data(w: FieldWindow, g: GammaIndex, newest_only: bool) -> np.ndarray:
    """Gamma(field) slice stack: shape (1, nodes) or (nslices, nodes)."""
    grid = w.grid
    n = grid.dimension

    def dpart(a: int) -> np.ndarray:
        if a == 0:
            return w.newest_time_derivative(1)[None] if newest_only else w.time_derivative(1)
        return (w.newest_space_derivative(a - 1)[None] if newest_only
                else w.space_derivative(a - 1))

    times = w.times[-1:] if newest_only else w.times

    def coeff(a: int):
        return times[:, None] if a == 0 else _coord_flat(grid, a - 1)[None, :]

    if g.kind == "translation":
        if g.j > n:
            raise ValueError(f"translation index {g.j} exceeds dimension {n}")
        return np.array(dpart(g.j), copy=True)
    if g.kind == "pair":
        if max(g.j, g.k) > n:
            raise ValueError(f"pair indices ({g.j},{g.k}) exceed dimension {n}")
        return _lam(g.j) * coeff(g.j) * dpart(g.k) - _lam(g.k) * coeff(g.k) * dpart(g.j)
    out = coeff(0) * dpart(0)
    for a in range(1, n + 1):
        out += coeff(a) * dpart(a)
    return out


def apply_gamma_window(w: FieldWindow, g: GammaIndex) -> FieldWindow:
    """Gamma applied on every slice; result windows carry no exact dt."""
    return w.replace(_gamma_data(w, g, newest_only=False))


def apply_gamma(w: FieldWindow, g: GammaIndex) -> ScalarField:
    """Gamma(field) on the newest slice only."""
    return ScalarField(w.grid, _gamma_data(w, g, newest_only=True)[0])


def apply_gamma_multi(w: FieldWindow, ops) -> ScalarField:
    """Product of vector fields, first list element applied first."""
    ops = list(ops)
    if len(ops) > MAX_GAMMA_ORDER:
        raise ValueError(f"product depth {len(ops)} exceeds {MAX_GAMMA_ORDER}")
    if not ops:
        return w.newest_field()
    for g in ops[:-1]:
        w = apply_gamma_window(w, g)
    return apply_gamma(w, ops[-1])


@dataclass
class DiagnosticsConfig:
    gamma_order: int = 2
    sample_dt: float = 1.0
    fit_window_start: float = 0.0

    def __post_init__(self):
        if not 0 <= self.gamma_order <= MAX_GAMMA_ORDER:
            raise ValueError(
                f"gamma_order must be in [0, {MAX_GAMMA_ORDER}], got {self.gamma_order}"
            )
        if not self.sample_dt > 0:
            raise ValueError(f"sample_dt must be positive, got {self.sample_dt}")


NORM_FIELDS = ("t", "sup_phi", "sup_dphi", "sup_q00", "energy",
               "M1", "M2", "N1", "N2", "weighted_sup")
NORM_CSV_HEADER = ",".join(NORM_FIELDS)


@dataclass
class NormRecord:
    t: float
    sup_phi: float
    sup_dphi: float
    sup_q00: float
    energy: float
    M1: float
    M2: float
    N1: float
    N2: float
    weighted_sup: float

    def row(self) -> list[float]:
        return [float(getattr(self, f)) for f in NORM_FIELDS]


def _first_derivatives(w: FieldWindow) -> list[np.ndarray]:
    """Newest-slice d_a for a = 0..n."""
    return [np.asarray(w.newest_time_derivative(1))] + [
        w.newest_space_derivative(i) for i in range(w.grid.dimension)
    ]


def _magnitude(parts: list[np.ndarray]) -> np.ndarray:
    out = parts[0] * parts[0]
    for p in parts[1:]:
        out = out + p * p
    return np.sqrt(out)


def _l2(grid: GridSpec, values: np.ndarray) -> float:
    return math.sqrt(grid.spacing**grid.dimension * float(values @ values))


def weighted_sup(w: FieldWindow) -> float:
    """sup of |field| against the linear-decay weight
    (1 + t + |x|)^a (1 + |t - |x||)^a with a = (n-1)/2; forward time."""
    n = w.grid.dimension
    alpha = (n - 1) / 2.0
    t = abs(w.newest_time)
    r = _radius_flat(w.grid)
    wgt = (1.0 + t + r) ** alpha * (1.0 + np.abs(t - r)) ** alpha
    return float(np.max(np.abs(w.newest()) * wgt))


def bootstrap_norms(w: FieldWindow, cfg: DiagnosticsConfig) -> NormRecord:
    """All norm families over vector-field products within the caps.

    M sums run over |I| <= gamma_order; the sup-norm families use the
    halved caps.  The derivative in the M1/N1 terms is the space-time
    gradient magnitude of the product, taken on the newest slice.
    """
    grid = w.grid
    cap_m = cfg.gamma_order
    cap_n1 = (cfg.gamma_order + 1) // 2
    cap_n2 = cap_n1 + 1
    depth = max(cap_m, cap_n2)
    basis = gamma_basis(grid.dimension)

    def contributions(win: FieldWindow, length: int) -> np.ndarray:
        m1 = m2 = n1 = n2 = 0.0
        newest = win.newest()
        if length <= max(cap_m, cap_n1):
            gmag = _magnitude(_first_derivatives(win))
            if length <= cap_m:
                m1 = _l2(grid, gmag)
                m2 = _l2(grid, newest)
            if length <= cap_n1:
                n1 = float(np.max(gmag))
        if length <= cap_n2:
            n2 = float(np.max(np.abs(newest)))
        return np.array([m1, m2, n1, n2])

    def walk(win: FieldWindow, length: int, acc: np.ndarray):
        acc += contributions(win, length)
        if length < depth:
            for op in basis:
                walk(apply_gamma_window(win, op), length + 1, acc)

    def branch(op: GammaIndex) -> np.ndarray:
        acc = np.zeros(4)
        walk(apply_gamma_window(w, op), 1, acc)
        return acc

    total = contributions(w, 0)
    if depth >= 1:
        for part in parallel_map(branch, basis):
            total = total + part

    parts = _first_derivatives(w)
    gmag = _magnitude(parts)
    qvals = parts[0] * parts[0]
    for p in parts[1:]:
        qvals = qvals - p * p
    energy = 0.5 * _l2(grid, parts[0]) ** 2
    for p in parts[1:]:
        energy += 0.5 * _l2(grid, p) ** 2
    return NormRecord(
        t=w.newest_time,
        sup_phi=float(np.max(np.abs(w.newest()))),
        sup_dphi=float(np.max(gmag)),
        sup_q00=float(np.max(np.abs(qvals))),
        energy=energy,
        M1=float(total[0]),
        M2=float(total[1]),
        N1=float(total[2]),
        N2=float(total[3]),
        weighted_sup=weighted_sup(w),
    )


def fit_decay_exponent(series, t_start: float) -> tuple[float, float, float]:
    """Fit v ~ C (1+t)^p over samples with t >= t_start.

    Returns (p, C, rms residual of log v against the fit).
    """
    pts = [(float(t), float(v)) for t, v in series if t >= t_start]
    if len(pts) < 8:
        raise ValueError(f"need at least 8 samples with t >= {t_start}, have {len(pts)}")
    t = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(v <= 0):
        raise ValueError("decay fit needs strictly positive values")
    x = np.log1p(t)
    y = np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(math.exp(intercept)), rms


def nullform_decay_ratio(w: FieldWindow, scale: float = 1.0) -> float:
    """sup of |Q00(phi,phi)| (1+t+|x|) / (2 |dphi| |Gamma phi|).

    |Gamma phi| is the root-sum-square over the length-1 vector-field
    family; nodes with denominator <= 1e-14 * scale^2 are skipped (0/0
    guard far outside the support)."""
    grid = w.grid
    parts = _first_derivatives(w)
    dmag = _magnitude(parts)
    qvals = parts[0] * parts[0]
    for p in parts[1:]:
        qvals = qvals - p * p
    gsq = np.zeros(grid.size)
    for op in gamma_basis(grid.dimension):
        gv = _gamma_data(w, op, newest_only=True)[0]
        gsq += gv * gv
    denom = 2.0 * dmag * np.sqrt(gsq)
    keep = denom > 1e-14 * scale * scale
    if not np.any(keep):
        return 0.0
    t = abs(w.newest_time)
    weight = 1.0 + t + _radius_flat(grid)
    return float(np.max(np.abs(qvals[keep]) * weight[keep] / denom[keep]))


def reconstruct_gradient(w: FieldWindow, node: int) -> tuple[np.ndarray, float]:
    """Recover the space-time gradient at one node from the homogeneous
    vector fields alone (pairs + scaling), away from the light cone.

    Returns (estimate of (d_t phi, d_1 phi, ...), measured ratio
    |dphi| |t - |x|| / sum |Gamma phi|).
    """
    grid = w.grid
    n = grid.dimension
    t = w.newest_time
    x = np.asarray(grid.node_coords(node))
    r = float(np.sqrt(np.sum(x * x)))
    if abs(t - r) < 0.1 * (1.0 + abs(t)):
        raise ValueError(
            f"node at |x| = {r:.3g}, t = {t:.3g} is too close to the light cone"
        )

    def coord(a: int) -> float:
        return t if a == 0 else float(x[a - 1])

    ops = gamma_basis(n, include_translations=False, include_scaling=True)
    rows = np.zeros((len(ops), n + 1))
    rhs = np.zeros(len(ops))
    for i, g in enumerate(ops):
        rhs[i] = _gamma_data(w, g, newest_only=True)[0][node]
        if g.kind == "pair":
            rows[i, g.k] += _lam(g.j) * coord(g.j)
            rows[i, g.j] -= _lam(g.k) * coord(g.k)
        else:
            for a in range(n + 1):
                rows[i, a] = coord(a)
    sv = np.linalg.svd(rows, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= 1e-10 * sv[0]:
        raise DegeneracyError(
            f"vector-field system is singular at node {node} (t = {t}, |x| = {r})"
        )
    est, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    total = float(np.sum(np.abs(rhs)))
    if total < 1e-300:
        return est, 0.0
    ratio = float(np.sqrt(np.sum(est * est))) * abs(t - r) / total
    return est, ratio


_Q_EVALUATORS = {"null_metric": q00}


def _q_evaluator(kind: str):
    if kind in _Q_EVALUATORS:
        return _Q_EVALUATORS[kind]
    if kind.startswith("null_") and len(kind) == 7:
        i, j = int(kind[5]), int(kind[6])
        return lambda u, v: qij(u, v, i, j)
    raise FixtureError(f"unknown null-form kind {kind!r}")


def load_commutation_table(dimension: int, path=None) -> dict:
    """Correction-coefficient table: table[gamma_label][q_kind] maps
    correction q_kind -> coefficient.  Generated by tools/generate_fixtures.py."""
    if path is None:
        ref = resources.files("minkmembrane").joinpath(
            "fixtures/gamma_null_commutation.json"
        )
        try:
            raw = ref.read_text()
        except FileNotFoundError as err:
            raise FixtureError("commutation fixture is missing; run tools/generate_fixtures.py") from err
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = fh.read()
        except OSError as err:
            raise FixtureError(f"cannot read commutation fixture {path}: {err}") from err
    try:
        data = json.loads(raw)
        tables = data["tables"]
    except (json.JSONDecodeError, KeyError) as err:
        raise FixtureError(f"malformed commutation fixture: {err}") from err
    key = str(dimension)
    if key not in tables:
        raise FixtureError(f"commutation fixture has no table for dimension {dimension}")
    return tables[key]


def _slice_bundle(w: FieldWindow, dt_stack: np.ndarray,
                  grad_stacks: list[np.ndarray], s: int) -> DerivativeBundle:
    return DerivativeBundle(
        w.grid, w.data[s], dt_stack[s], [g[s] for g in grad_stacks]
    )


def gamma_q_commutation_check(u: FieldWindow, v: FieldWindow, g: GammaIndex,
                              q_kind: str = "null_metric",
                              table: dict | None = None,
                              with_scale: bool = False):
    """Defect of the product rule for Gamma acting on a null form:

        Gamma Q(u, v) - Q(Gamma u, v) - Q(u, Gamma v) - corrections,

    corrections taken from the committed coefficient table.  Returns the
    sup over nodes; small (stencil-level) when u, v are smooth.  With
    with_scale, returns (defect, scale) where scale is the sup magnitude
    of the two sides, for relative thresholds."""
    if u.grid != v.grid or u.nslices != v.nslices:
        raise ValueError("windows must share grid and depth")
    grid = u.grid
    n = grid.dimension
    if table is None:
        table = load_commutation_table(n)

    label, sign = g.label(), 1.0
    if g.kind == "pair" and g.j > g.k:
        # The reversed pair is minus the canonical one; every term of the
        # rule is linear in Gamma, so only the table lookup needs care.
        label, sign = f"g{g.k}{g.j}", -1.0
    if label not in table:
        raise FixtureError(f"fixture table has no entry for {label}")
    if q_kind not in table[label]:
        raise FixtureError(f"fixture table has no corrections for {q_kind} under {label}")
    qfunc = _q_evaluator(q_kind)

    udt, vdt = u.time_derivative(1), v.time_derivative(1)
    ugrad = [u.space_derivative(i) for i in range(n)]
    vgrad = [v.space_derivative(i) for i in range(n)]
    qdata = np.stack([
        qfunc(_slice_bundle(u, udt, ugrad, s), _slice_bundle(v, vdt, vgrad, s))
        for s in range(u.nslices)
    ])
    lhs = apply_gamma(FieldWindow(grid, u.times, qdata), g).values

    bu = _slice_bundle(u, udt, ugrad, u.nslices - 1)
    bv = _slice_bundle(v, vdt, vgrad, v.nslices - 1)
    bgu = bundle_from_window(apply_gamma_window(u, g), second=False)
    bgv = bundle_from_window(apply_gamma_window(v, g), second=False)
    rhs = qfunc(bgu, bv) + qfunc(bu, bgv)
    for kind, coeff in table[label][q_kind].items():
        rhs = rhs + sign * float(coeff) * _q_evaluator(kind)(bu, bv)
    defect = float(np.max(np.abs(lhs - rhs)))
    if with_scale:
        scale = float(np.max(np.abs(lhs)) + np.max(np.abs(rhs))) + 1.0
        return defect, scale
    return defect


def window_box(w: FieldWindow) -> FieldWindow:
    """Flat wave operator applied on every slice of the window."""
    out = np.array(w.time_derivative(2), copy=True)
    for i in range(w.grid.dimension):
        out -= w.space_derivative(i, 2)
    return w.replace(out)


COMMUTATOR_CATALOG = {
    "t_sq": lambda t, xs: np.full_like(xs[0], t * t),
    "lorentz_sq": lambda t, xs: t * t - sum(x * x for x in xs),
    "t_x1": lambda t, xs: t * xs[0],
    "x1_cubed": lambda t, xs: xs[0] ** 3,
}


def catalog_window(grid: GridSpec, name: str, t0: float, dt: float) -> FieldWindow:
    fn = COMMUTATOR_CATALOG[name]
    xs = [_coord_flat(grid, i) for i in range(grid.dimension)]
    times = t0 + dt * np.arange(5)
    data = np.stack([fn(float(t), xs) for t in times])
    return FieldWindow(grid, times, data)


def box_commutator_check(grid: GridSpec, names=None, gammas=None,
                         t0: float = 1.0, dt: float | None = None
                         ) -> dict[str, tuple[float, float]]:
    """Sup defects of [Gamma, box] f for catalog functions f.

    Every family member should commute with the wave operator except
    scaling, whose commutator is -2 box; all catalog entries are low
    degree polynomials, so the stencils are exact and defects sit at
    rounding level.  Values are (defect, scale) pairs, scale being the
    sup of the commutator's two sides for relative thresholds."""
    names = list(names or COMMUTATOR_CATALOG)
    gammas = list(gammas or gamma_basis(grid.dimension))
    dt = dt or 0.5 * grid.spacing
    out = {}
    for name in names:
        fwin = catalog_window(grid, name, t0, dt)
        boxwin = window_box(fwin)
        for g in gammas:
            gwin = apply_gamma_window(fwin, g)
            box_g = window_box(gwin).newest()
            gamma_box = apply_gamma(boxwin, g).values
            defect = gamma_box - box_g
            if g.kind == "scaling":
                defect = defect + 2.0 * boxwin.newest()
            scale = float(np.max(np.abs(gamma_box)) + np.max(np.abs(box_g))) + 1.0
            out[f"{name}|{g.label()}"] = (float(np.max(np.abs(defect))), scale)
    return out


def random_polynomial_window(grid: GridSpec, rng: np.random.Generator,
                             t0: float = 1.0, dt: float | None = None,
                             degree: int = 3) -> FieldWindow:
    """Window of a random space-time polynomial of total degree <= degree.

    Degree three and the 5-point stencils make every derivative exact,
    so identity defects on these windows are pure rounding."""
    n = grid.dimension
    dt = dt or 0.5 * grid.spacing
    xs = [_coord_flat(grid, i) for i in range(n)]
    times = t0 + dt * np.arange(NSLICES)
    exps = [e for e in itertools.product(range(degree + 1), repeat=n + 1)
            if sum(e) <= degree]
    coeffs = rng.uniform(-1.0, 1.0, len(exps))
    data = np.empty((NSLICES, grid.size))
    for s, t in enumerate(times):
        acc = np.zeros(grid.size)
        for c, e in zip(coeffs, exps):
            term = c * float(t) ** e[0]
            for i in range(n):
                if e[i + 1]:
                    term = term * xs[i] ** e[i + 1]
            acc += term
        data[s] = acc
    return FieldWindow(grid, times, data)


def random_smooth_window(grid: GridSpec, rng: np.random.Generator,
                         t0: float = 1.0, dt: float | None = None) -> FieldWindow:
    """Window of a random plane-wave field, smooth but not polynomial.

    Stencil errors on these scale as the 4th power of the step, which is
    what the refinement checks measure."""
    n = grid.dimension
    dt = dt or 0.5 * grid.spacing
    xs = [_coord_flat(grid, i) for i in range(n)]
    times = t0 + dt * np.arange(NSLICES)
    amp = rng.uniform(0.3, 0.8)
    ks = rng.uniform(0.5, 1.5, n + 1)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    data = np.empty((NSLICES, grid.size))
    for s, t in enumerate(times):
        arg = ks[0] * float(t) + phase
        for i in range(n):
            arg = arg + ks[i + 1] * xs[i]
        data[s] = amp * np.sin(arg)
    return FieldWindow(grid, times, data)
