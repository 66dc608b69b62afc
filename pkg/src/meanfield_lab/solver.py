"""Variational functionals, self-consistency solver and maximum classification.

Two functionals drive everything.  On the magnetization cube the
enumeration route maximizes

    fbar(x) = g(x) - sum_l alpha_l * entropy_I(x_l)          (binary spins)

while the Gaussian-transform route maximizes, on all of R^n,

    f(x) = -1/2 <J~ x, x> + sum_l alpha_l log E_rho[exp(s * u_l(x))]

with u_l(x) = sum_s alpha_s J_ls x_s + h_l.  Both share the stationarity
system x_l = tilted_mean(u_l), which for +-1 spins is the familiar
x_l = tanh(u_l).  Stationary points are found by damped multistart
iteration with a Newton polish, then classified by the first
nonvanishing even derivative (type k, strength lambda).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, xlogy

from .errors import (
    DomainError,
    NoConvergence,
    NotAMaximum,
    UnsupportedDegeneracy,
    UnsupportedMeasure,
)
from .model import ValidatedModel, _require_validated, hamiltonian_density

LN2 = math.log(2.0)
_DERIV_TOL = 1e-9
_SPHERE_SAMPLES = 1000


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the multistart fixed-point search."""

    grid_points: int = 11
    damping: float = 0.7
    max_iter: int = 10_000
    tol: float = 1e-12
    dedup_radius: float = 1e-8
    threads: int = 1
    newton_trigger: float = 1e-3
    newton_max_iter: int = 200

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise DomainError("damping must lie in (0, 1]")
        if self.grid_points < 1 or self.max_iter < 1:
            raise DomainError("grid_points and max_iter must be positive")

    @staticmethod
    def from_dict(doc: dict) -> "SolverOptions":
        return SolverOptions(**doc)


@dataclass(frozen=True)
class StationaryPoint:
    """Solution of the self-consistency system with its functional values."""

    x: np.ndarray
    residual: float
    f_value: float
    fbar_value: float | None

    def __post_init__(self):
        self.x.flags.writeable = False


@dataclass(frozen=True)
class HomogeneousForm:
    """Even homogeneous polynomial sum_i c_i * <ray_i, v> ** degree."""

    degree: int
    coeffs: tuple[float, ...]
    rays: tuple[tuple[float, ...], ...]

    def __call__(self, v) -> float | np.ndarray:
        v = np.asarray(v, dtype=float)
        rays = np.asarray(self.rays)
        proj = v @ rays.T          # (..., n_rays)
        return proj ** self.degree @ np.asarray(self.coeffs)

    def rescaled(self, scale: np.ndarray) -> "HomogeneousForm":
        """The form evaluated at v / scale (componentwise)."""
        rays = np.asarray(self.rays) / np.asarray(scale)[None, :]
        return HomogeneousForm(self.degree, self.coeffs,
                               tuple(tuple(r) for r in rays))


@dataclass(frozen=True)
class MaximumClassification:
    """Type and strength data of a local maximum of f."""

    point: StationaryPoint
    k: int
    strength: float | None = None
    hessian: np.ndarray | None = None
    quartic_form: HomogeneousForm | None = None
    is_global: bool = False


@dataclass(frozen=True)
class PressureResult:
    limit_value: float
    maxima: list[MaximumClassification]
    method_agreement: float


# --- elementary pieces ---------------------------------------------------


def entropy_I(x):
    """Binary entropy rate 1/2 ((1+x)ln(1+x) + (1-x)ln(1-x)) on [-1, 1]."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > 1.0 + 1e-15):
        raise DomainError("entropy_I is defined on [-1, 1]")
    arr = np.clip(arr, -1.0, 1.0)
    val = 0.5 * (xlogy(1.0 + arr, 1.0 + arr) + xlogy(1.0 - arr, 1.0 - arr))
    return float(val) if np.isscalar(x) else val


def _fields(model: ValidatedModel, x: np.ndarray) -> np.ndarray:
    """Effective fields u_l = sum_s alpha_s J_ls x_s + h_l, batched."""
    return x @ (model.J * model.alpha[None, :]).T + model.h


def _tilted_moments(model: ValidatedModel, u: np.ndarray, order: int) -> np.ndarray:
    """Raw moments 1..order of the measure tilted by exp(s*u); shape (order, *u.shape)."""
    locs = model.site_measure.locations
    logw = np.log(model.site_measure.weights)
    logits = u[..., None] * locs + logw
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=-1, keepdims=True)
    return np.stack([(w * locs ** m).sum(axis=-1) for m in range(1, order + 1)])


def _cumulants_from_moments(m: np.ndarray) -> np.ndarray:
    """Cumulants 1..order from raw moments (same layout as input)."""
    order = m.shape[0]
    k = np.empty_like(m)
    for n in range(1, order + 1):
        acc = m[n - 1].copy()
        for j in range(1, n):
            acc -= math.comb(n - 1, j - 1) * k[j - 1] * m[n - j - 1]
        k[n - 1] = acc
    return k


def _check_multi_binary(model: ValidatedModel, what: str):
    if model.n > 1 and not model.is_binary:
        raise UnsupportedMeasure(
            f"{what} supports general measures only for a single species")


def _sech2(u: np.ndarray) -> np.ndarray:
    """1 / cosh(u)^2 without overflow."""
    a = np.exp(-np.abs(u))
    return (2.0 * a / (1.0 + a * a)) ** 2


# Taylor coefficients of u - tanh(u) = u^3/3 - 2 u^5/15 + ...
_TANH_REMAINDER = (1.0 / 3.0, -2.0 / 15.0, 17.0 / 315.0, -62.0 / 2835.0,
                   1382.0 / 155925.0, -21844.0 / 6081075.0)


def _u_minus_tanh(u: np.ndarray) -> np.ndarray:
    """u - tanh(u) without cancellation for small u."""
    out = u - np.tanh(u)
    small = np.abs(u) <= 0.1
    if np.any(small):
        us = u[small]
        acc = np.zeros_like(us)
        for c in reversed(_TANH_REMAINDER):
            acc = us * us * (c + acc)
        out[small] = us * acc
    return out


def mean_field_map(model: ValidatedModel, x) -> np.ndarray:
    """Right-hand side of the self-consistency system at x."""
    model = _require_validated(model)
    _check_multi_binary(model, "mean_field_map")
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    X = np.atleast_2d(x)
    u = _fields(model, X)
    # tanh directly for binary spins: the atom route carries an absolute
    # noise floor that spoils root finding at degenerate maxima.
    out = np.tanh(u) if model.is_binary else _tilted_moments(model, u, 1)[0]
    return out[0] if squeeze else out


def _map_jacobian(model: ValidatedModel, x: np.ndarray) -> np.ndarray:
    """Jacobian of the map at a single point: diag(var) @ J @ diag(alpha)."""
    u = _fields(model, x[None, :])[0]
    if model.is_binary:
        var = _sech2(u)
    else:
        m = _tilted_moments(model, u, 2)
        var = m[1] - m[0] ** 2
    return var[:, None] * (model.J * model.alpha[None, :])


def functional_fbar(model: ValidatedModel, x) -> float:
    """Enumeration-route functional g(x) - sum_l alpha_l entropy_I(x_l)."""
    model = _require_validated(model)
    if not model.is_binary:
        raise UnsupportedMeasure("fbar is defined for the symmetric +-1 measure only")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-15):
        raise DomainError("fbar is defined on the cube [-1, 1]^n")
    return hamiltonian_density(model, x) - float(model.alpha @ entropy_I(x))


def functional_f(model: ValidatedModel, x) -> float | np.ndarray:
    """Gaussian-transform functional; total on R^n.

    Accepts a single point (returns a float) or a batch of rows.
    """
    model = _require_validated(model)
    _check_multi_binary(model, "functional_f")
    x = np.asarray(x, dtype=float)
    vals = _f_batch(model, np.atleast_2d(x))
    return float(vals[0]) if x.ndim == 1 else vals


def _f_batch(model: ValidatedModel, X: np.ndarray) -> np.ndarray:
    am = X * model.alpha[None, :]
    quad = 0.5 * np.einsum("bi,ij,bj->b", am, model.J, am)
    u = _fields(model, X)
    if model.is_binary:
        log_mgf = np.abs(u) + np.log1p(np.exp(-2.0 * np.abs(u))) - LN2
    else:
        locs = model.site_measure.locations
        logw = np.log(model.site_measure.weights)
        log_mgf = logsumexp(u[..., None] * locs + logw, axis=-1)
    return -quad + log_mgf @ model.alpha


def _grad_f_batch(model: ValidatedModel, X: np.ndarray) -> np.ndarray:
    u = _fields(model, X)
    mean = _tilted_moments(model, u, 1)[0]
    core = model.alpha[:, None] * model.J * model.alpha[None, :]
    return (mean - X) @ core


# --- fixed-point search ---------------------------------------------------


def _start_grid(model: ValidatedModel, opts: SolverOptions) -> np.ndarray:
    lo, hi = model.support_range
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    axis = np.linspace(mid - 0.99 * half, mid + 0.99 * half, opts.grid_points)
    pts = itertools.product(*([axis] * model.n))
    return np.array(list(pts))


def _damp_block(model, X, opts):
    """Damped iteration on a block of starts until the Newton trigger."""
    theta = opts.damping
    active = np.ones(len(X), dtype=bool)
    for _ in range(opts.max_iter):
        if not active.any():
            break
        mapped = np.atleast_2d(mean_field_map(model, X[active]))
        res = np.max(np.abs(X[active] - mapped), axis=1)
        X[active] = (1.0 - theta) * X[active] + theta * mapped
        still = res > opts.newton_trigger
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
    return X


def _map_defect(model: ValidatedModel, x: np.ndarray) -> np.ndarray:
    """x - map(x) at a single point, compensated against cancellation.

    For binary spins, x - tanh(u) is regrouped as (I - B)x - h + r(u)
    with r(u) = u - tanh(u) evaluated by series: near degenerate roots
    the naive difference rounds to zero long before the root is located.
    """
    if not model.is_binary:
        return x - mean_field_map(model, x)
    B = model.J * model.alpha[None, :]
    u = B @ x + model.h
    return (x - B @ x) - model.h + _u_minus_tanh(u)


def _newton_polish(model, x, opts):
    """Newton on x - map(x) = 0; returns (x, residual) or None on failure.

    The stop requires a small defect AND a small last step: at a
    degenerate root the defect is cubically flat in x, so a residual
    test alone would accept points far from the root.
    """
    n = model.n
    step_norm = np.inf
    for _ in range(opts.newton_max_iter):
        F = _map_defect(model, x)
        res = float(np.max(np.abs(F)))
        if res <= opts.tol and step_norm <= opts.tol * (1.0 + np.max(np.abs(x))):
            break
        JF = np.eye(n) - _map_jacobian(model, x)
        try:
            step = np.linalg.solve(JF, F)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            return None
        x = x - step
        step_norm = float(np.max(np.abs(step)))
    res = float(np.max(np.abs(x - mean_field_map(model, x))))
    return (x, res) if res <= opts.tol else None


def solve_fixed_points(model: ValidatedModel,
                       opts: SolverOptions | None = None) -> list[StationaryPoint]:
    """All distinct solutions of the self-consistency system.

    Damped iteration from every grid start, Newton polish to the target
    residual, then a lexicographic sort and dedup.  Starts that fail to
    converge are dropped; NoConvergence is raised only if all fail.
    """
    model = _require_validated(model)
    _check_multi_binary(model, "solve_fixed_points")
    opts = opts or SolverOptions()
    starts = _start_grid(model, opts)

    if opts.threads > 1:
        chunks = np.array_split(starts, opts.threads)
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            damped = list(pool.map(lambda c: _damp_block(model, c.copy(), opts),
                                   [c for c in chunks if len(c)]))
        damped = np.concatenate(damped)
    else:
        damped = _damp_block(model, starts.copy(), opts)

    solutions = []
    for x in damped:
        polished = _newton_polish(model, x.copy(), opts)
        if polished is not None:
            solutions.append(polished)
    if not solutions:
        raise NoConvergence("no start converged to the requested residual")

    pts = np.array([s[0] for s in solutions])
    res = np.array([s[1] for s in solutions])
    order = np.lexsort(pts.T[::-1])
    pts, res = pts[order], res[order]
    kept = _dedup_points(pts, res, opts.dedup_radius)

    out = []
    for x, r in kept:
        fv = float(_f_batch(model, x[None, :])[0])
        fbv = functional_fbar(model, x) if model.is_binary else None
        out.append(StationaryPoint(x=x, residual=r, f_value=fv, fbar_value=fbv))
    return out


def _dedup_points(pts: np.ndarray, res: np.ndarray,
                  radius: float) -> list[tuple[np.ndarray, float]]:
    """Single-linkage clustering; each cluster keeps its best-residual point.

    Input must be lexicographically sorted; the output preserves that
    order, so the result is independent of how starts were scheduled.
    """
    count = len(pts)
    parent = list(range(count))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dist = np.max(np.abs(pts[:, None, :] - pts[None, :, :]), axis=2)
    for i, j in zip(*np.nonzero(dist <= radius)):
        if i < j:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    def key(i):
        return (res[i], float(np.max(np.abs(pts[i]))))

    best: dict[int, int] = {}
    for i in range(count):
        root = find(i)
        if root not in best or key(i) < key(best[root]):
            best[root] = i
    reps = sorted(best.values())
    return [(pts[i], float(res[i])) for i in reps]


# --- classification -------------------------------------------------------


def _derivatives_1d(model: ValidatedModel, x: float, max_order: int) -> np.ndarray:
    """Derivatives f'', f''', ..., f^(max_order) at x for a one-species model."""
    J = float(model.J[0, 0])
    u = np.array([J * x + model.h[0]])
    mom = _tilted_moments(model, u, max_order)[:, 0]
    kappa = _cumulants_from_moments(mom)
    out = np.empty(max_order - 1)
    out[0] = -J + J ** 2 * kappa[1]
    for m in range(3, max_order + 1):
        out[m - 2] = J ** m * kappa[m - 1]
    return out


def _hessian_f(model: ValidatedModel, x: np.ndarray) -> np.ndarray:
    u = _fields(model, x[None, :])[0]
    mom = _tilted_moments(model, u, 2)
    var = mom[1] - mom[0] ** 2
    inner = model.J @ ((model.alpha * var)[:, None] * model.J) - model.J
    return (model.alpha[:, None] * model.alpha[None, :]) * inner


def _quartic_form(model: ValidatedModel, x: np.ndarray) -> HomogeneousForm:
    """Degree-4 Taylor form of f at x: sum_l alpha_l kappa4(u_l)/24 * <row_l, v>^4."""
    u = _fields(model, x[None, :])[0]
    mom = _tilted_moments(model, u, 4)
    kappa4 = _cumulants_from_moments(mom)[3]
    rows = model.J * model.alpha[None, :]
    coeffs = tuple(float(model.alpha[l] * kappa4[l] / 24.0) for l in range(model.n))
    return HomogeneousForm(4, coeffs, tuple(tuple(r) for r in rows))


def _probe_is_maximum(model: ValidatedModel, x: np.ndarray, radius: float) -> bool:
    """No ascent direction on a sphere of the given radius (up to fp noise)."""
    n = model.n
    dirs = [v for i in range(n) for v in (np.eye(n)[i], -np.eye(n)[i])]
    rng = np.random.Generator(np.random.PCG64(20210613))
    extra = rng.standard_normal((32, n))
    dirs += [d / np.linalg.norm(d) for d in extra]
    f0 = float(_f_batch(model, x[None, :])[0])
    probes = x[None, :] + radius * np.array(dirs)
    fv = _f_batch(model, probes)
    slack = 64.0 * np.finfo(float).eps * max(1.0, abs(f0))
    return bool(np.all(fv <= f0 + slack))


def _unit_sphere(n: int, count: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(777))
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def classify_maximum(model: ValidatedModel, point: StationaryPoint,
                     *, probe_radius: float = 1e-4,
                     deriv_tol: float = _DERIV_TOL,
                     max_order: int = 8) -> MaximumClassification:
    """Type k and strength of a local maximum of f.

    One species: scan analytic derivatives up to ``max_order``; k is half
    the first even order whose derivative exceeds the vanishing threshold.
    Several species: k=1 via a negative-definite Hessian, or k=2 via the
    homogeneous quartic form when the Hessian vanishes entirely.  Mixed
    degeneracies are refused rather than guessed.
    """
    model = _require_validated(model)
    x = np.asarray(point.x, dtype=float)
    if not _probe_is_maximum(model, x, probe_radius):
        raise NotAMaximum("ascent direction found on the probe sphere")

    if model.n == 1:
        derivs = _derivatives_1d(model, float(x[0]), max_order)
        leading = None
        for order in range(2, max_order + 1, 2):
            if abs(derivs[order - 2]) > deriv_tol:
                leading = order
                break
        if leading is None:
            raise UnsupportedDegeneracy(
                f"all even derivatives through order {max_order} vanish")
        value = float(derivs[leading - 2])
        if value > 0:
            raise NotAMaximum(f"derivative of order {leading} is positive")
        # The maximum is localized to ~1e-6 at worst (flat roots resolve no
        # better in double precision); intermediate odd derivatives then
        # pick up |lambda| * offset^(2k - j) and must only vanish to that.
        pos_err = 1e-6
        for j in range(3, leading, 2):
            allowed = max(deriv_tol, 10.0 * abs(value) * pos_err ** (leading - j))
            if abs(derivs[j - 2]) > allowed:
                raise UnsupportedDegeneracy(
                    f"odd derivative of order {j} dominates at the maximum")
        k = leading // 2
        hess = np.array([[derivs[0]]]) if k == 1 else None
        return MaximumClassification(point=point, k=k, strength=value,
                                     hessian=hess)

    _check_multi_binary(model, "classify_maximum")
    H = _hessian_f(model, x)
    eigs = np.linalg.eigvalsh(H)
    if eigs.max() < -deriv_tol:
        return MaximumClassification(point=point, k=1, hessian=H)
    if eigs.min() < -deriv_tol:
        raise UnsupportedDegeneracy(
            "Hessian is singular but not zero: mixed-homogeneity maximum")
    form = _quartic_form(model, x)
    samples = _unit_sphere(model.n, _SPHERE_SAMPLES)
    values = form(samples)
    if np.any(values >= -1e-14):
        raise UnsupportedDegeneracy(
            "quartic form is not negative definite on the sphere")
    return MaximumClassification(point=point, k=2, quartic_form=form)


# --- pressure limit and scans ---------------------------------------------


def _is_core_posdef(model: ValidatedModel) -> bool:
    try:
        np.linalg.cholesky(model.coupling_core())
        return True
    except np.linalg.LinAlgError:
        return False


def _max_f_direct(model: ValidatedModel) -> float:
    """Global maximum of f by quasi-Newton descent from a coarse grid."""
    lo, hi = model.support_range
    axis = np.linspace(lo * 0.9, hi * 0.9, 5) if model.n > 1 else \
        np.linspace(lo * 0.99, hi * 0.99, 9)
    best = -np.inf
    for start in itertools.product(*([axis] * model.n)):
        res = minimize(lambda v: -_f_batch(model, v[None, :])[0],
                       np.array(start),
                       jac=lambda v: -_grad_f_batch(model, v[None, :])[0],
                       method="L-BFGS-B",
                       options={"gtol": 1e-12, "ftol": 1e-15})
        best = max(best, -float(res.fun))
    return best


def pressure_limit(model: ValidatedModel,
                   opts: SolverOptions | None = None) -> PressureResult:
    """Thermodynamic pressure limit and the classified set of global maxima."""
    model = _require_validated(model)
    opts = opts or SolverOptions()
    points = solve_fixed_points(model, opts)
    if model.is_binary:
        values = np.array([p.fbar_value for p in points])
    else:
        values = np.array([p.f_value for p in points])
    limit = float(values.max())
    maxima = []
    for p, v in zip(points, values):
        if v >= limit - 1e-9:
            cls = classify_maximum(model, p)
            maxima.append(replace(cls, is_global=True))
    if _is_core_posdef(model) and model.is_binary:
        agreement = abs(limit - _max_f_direct(model))
    else:
        agreement = math.nan
    return PressureResult(limit_value=limit, maxima=maxima,
                          method_agreement=agreement)


def cw_phase_scan(J_grid, h: float,
                  opts: SolverOptions | None = None) -> dict[str, np.ndarray]:
    """Single-species scan: magnetization, pressure and its J-derivatives.

    Columns: J, mu (largest fixed point), pressure, dp_dJ (= mu^2 / 2) and
    the centered second difference of the pressure over the grid (nan at
    the ends).
    """
    from .model import FiniteMeasure, ModelSpec, validate_model

    J_grid = np.asarray(J_grid, dtype=float)
    if np.any(J_grid <= 0) or np.any(np.diff(J_grid) <= 0):
        raise DomainError("J grid must be positive and strictly increasing")
    mu = np.empty_like(J_grid)
    pressure = np.empty_like(J_grid)
    for i, J in enumerate(J_grid):
        m = validate_model(ModelSpec(n=1, alpha=(1.0,), J=((float(J),),), h=(float(h),),
                                     site_measure=FiniteMeasure.symmetric_binary()))
        pts = solve_fixed_points(m, opts)
        mu[i] = max(p.x[0] for p in pts)
        pressure[i] = max(p.fbar_value for p in pts)
    d2p = np.full_like(J_grid, np.nan)
    if len(J_grid) >= 3:
        dj = np.diff(J_grid)
        inner = (pressure[2:] - 2.0 * pressure[1:-1] + pressure[:-2]) / (dj[1:] * dj[:-1])
        d2p[1:-1] = inner
    return {"J": J_grid, "mu": mu, "pressure": pressure,
            "dp_dJ": 0.5 * mu ** 2, "d2p": d2p}
