"""Deviation rate functions via a shared Legendre-transform engine.

Two regimes: the moderate-deviation rate built from the torus family of
diffusion matrices v -> D(v), and the large-deviation rate of the
permutation-chain position built from Perron roots of tilted transition
matrices.  Both are computed as suprema of smooth concave dual problems.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chain import ChainModel, irreducible
from .errors import ConvergenceError, DegenerateMaximumError, ValidationError

FD_STEP = 1e-6
DIVERGENCE_RADIUS = 1e3
ARGMAX_GRID = 256


# ---------------------------------------------------------------------------
# tilted chains and the large-deviation rate


def tilted_matrix(model: ChainModel, lam) -> np.ndarray:
    """Pi_lambda(sigma, tau) = P(sigma, tau) e^{<lambda, r(tau)>}."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    weights = np.exp(model.jump.displacements @ lam)
    return model.transition * weights[None, :]


def perron_root(pi: np.ndarray) -> float:
    """Largest real eigenvalue of an irreducible nonnegative matrix."""
    pi = np.asarray(pi, dtype=float)
    if pi.min() < 0:
        raise ValidationError("tilted matrix must be nonnegative")
    if not irreducible(pi):
        raise ValidationError("tilted matrix must be irreducible")
    w = np.linalg.eigvals(pi)
    i = int(np.argmax(w.real))
    rho = w[i]
    if abs(rho.imag) > 1e-9 * max(1.0, abs(rho.real)):
        raise ValidationError("leading eigenvalue is not real")
    return float(rho.real)


def log_perron(model: ChainModel, lam) -> float:
    """ln rho(lambda), evaluated with the largest tilt factored out so that
    arbitrarily large tilts never overflow."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    exponents = model.jump.displacements @ lam
    m = float(exponents.max())
    scaled = model.transition * np.exp(exponents - m)[None, :]
    w = np.linalg.eigvals(scaled)
    rho = float(w.real.max())
    if rho <= 0:
        raise ConvergenceError("scaled Perron root underflowed to zero")
    return m + float(np.log(rho))


def _grad_hess(f, lam, h=FD_STEP):
    d = lam.size
    g = np.zeros(d)
    H = np.zeros((d, d))
    f0 = f(lam)
    for i in range(d):
        e = np.zeros(d); e[i] = h
        fp, fm = f(lam + e), f(lam - e)
        g[i] = (fp - fm) / (2 * h)
        H[i, i] = (fp - 2 * f0 + fm) / h**2
    for i in range(d):
        for j in range(i + 1, d):
            ei = np.zeros(d); ei[i] = h
            ej = np.zeros(d); ej[j] = h
            H[i, j] = H[j, i] = (
                f(lam + ei + ej) - f(lam + ei - ej) - f(lam - ei + ej) + f(lam - ei - ej)
            ) / (4 * h**2)
    return f0, g, H


def _escape_slope(objective, lam, radius_hit_tol=1e-6):
    """Directional derivative of the objective along the current ray."""
    norm = np.linalg.norm(lam)
    step = lam / norm * max(1.0, 1e-3 * norm)
    return (objective(lam + step) - objective(lam)) / np.linalg.norm(step)


def ld_rate(model: ChainModel, x, grad_tol: float = 1e-9, max_iter: int = 200):
    """Large-deviation rate I(x) = sup_lambda (<lambda, x> - ln rho(lambda)).

    Newton ascent with finite-difference derivatives of ln rho and step
    halving.  When the iterates leave the search radius with the objective
    still climbing at a nonvanishing slope, the supremum diverges and inf is
    returned (x strictly outside the achievable velocity range); a vanishing
    escape slope means x sits on the boundary, where the finite limit value
    is reported.  Non-convergence inside the region raises instead of
    silently returning inf.
    """
    if not irreducible(model.transition):
        raise ValidationError("large deviations need an irreducible chain")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = model.jump.dimension
    radius = min(DIVERGENCE_RADIUS, 300.0 / max(1, 2 * model.jump.range_bound))

    def objective(lam):
        return float(lam @ x) - log_perron(model, lam)

    starts = [np.zeros(d)]
    gen = np.random.Generator(np.random.Philox(key=(97, 3)))
    starts += [gen.normal(scale=2.0, size=d) for _ in range(3)]
    best = None
    for lam in starts:
        lam = lam.copy()
        val = objective(lam)
        escaped = False
        for _ in range(max_iter):
            _, g_ln, H_ln = _grad_hess(lambda l: log_perron(model, l), lam)
            grad = x - g_ln
            if np.linalg.norm(grad) < grad_tol:
                break
            moved = False
            # Newton step while the finite-difference curvature is trustworthy
            # (toward the boundary it decays below the h^2 noise floor)
            curav = np.abs(H_ln).max()
            if curav > 1e-3:
                try:
                    step = np.linalg.solve(-H_ln, -grad)
                except np.linalg.LinAlgError:
                    step = grad
                if step @ grad <= 0:
                    step = grad
                scale = 1.0
                while scale > 1e-12:
                    cand = lam + scale * step
                    cval = objective(cand)
                    if cval >= val + 1e-15:
                        lam, val = cand, cval
                        moved = True
                        break
                    scale /= 2
            if not moved:
                # degenerate curvature: ascend the gradient ray with
                # doubling steps (boundary and divergent cases live here)
                u = grad / np.linalg.norm(grad)
                t = 1.0
                while t <= 2.0**30:
                    cand = lam + t * u
                    cval = objective(cand)
                    if cval > val:
                        lam, val = cand, cval
                        moved = True
                        t *= 2
                        if np.linalg.norm(lam) > radius:
                            break
                    else:
                        break
                if not moved:
                    t = 0.5
                    while t > 1e-12:
                        cand = lam + t * u
                        cval = objective(cand)
                        if cval > val:
                            lam, val = cand, cval
                            moved = True
                            break
                        t /= 2
            if not moved:
                break
            if np.linalg.norm(lam) > radius:
                escaped = True
                break
        if escaped:
            slope = _escape_slope(objective, lam)
            if slope > 1e-6:
                return float("inf"), lam
            # boundary of the achievable range: the bounded limit value
            if best is None or val > best[0]:
                best = (val, lam)
            continue
        _, g_ln, _ = _grad_hess(lambda l: log_perron(model, l), lam)
        if np.linalg.norm(x - g_ln) < 1e-6:
            if best is None or val > best[0]:
                best = (val, lam)
    if best is None:
        raise ConvergenceError(f"dual ascent did not converge at x = {x}")
    return max(best[0], 0.0), best[1]


# ---------------------------------------------------------------------------
# diffusion families and the moderate-deviation rate


@dataclass
class DiffusionFamily:
    """Callable torus family v -> D(v) with a cached scan grid."""

    func: object
    dimension: int
    grid_size: int = ARGMAX_GRID
    flat_tol: float = 1e-10

    def __post_init__(self):
        nodes = 2.0 * np.pi * np.arange(self.grid_size) / self.grid_size
        self._nodes = list(itertools.product(nodes, repeat=self.dimension))
        self._values = np.array([self.func(np.asarray(v)) for v in self._nodes])

    @classmethod
    def from_model(cls, model, grid_size: int = ARGMAX_GRID) -> "DiffusionFamily":
        from .spectral import diffusion_matrix
        return cls(lambda v: diffusion_matrix(model, v), model.dimension, grid_size)

    @classmethod
    def constant(cls, D: np.ndarray) -> "DiffusionFamily":
        D = np.atleast_2d(np.asarray(D, dtype=float))
        return cls(lambda v: D, D.shape[0], grid_size=4)

    def __call__(self, v) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.func(np.asarray(v)), dtype=float))

    def is_constant(self) -> bool:
        spread = np.abs(self._values - self._values[0]).max()
        return bool(spread <= self.flat_tol * max(1.0, np.abs(self._values).max()))

    def mean(self) -> np.ndarray:
        return self._values.mean(axis=0)

    def positive_definite(self, tol: float = 1e-12) -> bool:
        return all(np.linalg.eigvalsh((D + D.T) / 2).min() > tol for D in self._values)


def argmax_v(family: DiffusionFamily, y, newton_steps: int = 3):
    """Maximizer of v -> <y, D(v) y> on the torus.

    Grid scan plus a few 1D Newton refinements per coordinate.  A constant
    family is flagged (maximizer undefined); a flat but non-constant maximum
    raises, matching the non-degeneracy hypothesis of the moderate-deviation
    statement.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))

    def quad(v):
        return float(y @ family(v) @ y)

    if family.is_constant():
        return None, quad(np.zeros(family.dimension)), True
    vals = np.array([y @ D @ y for D in family._values])
    top = int(np.argmax(vals))
    vmax = np.asarray(family._nodes[top], dtype=float)
    spacing = 2 * np.pi / family.grid_size
    near_top = vals >= vals[top] - family.flat_tol * max(1.0, abs(vals[top]))
    if near_top.sum() > 2 * family.dimension + 1:
        spread = np.abs(vals - vals[top]).max()
        if spread > family.flat_tol * max(1.0, abs(vals[top])):
            raise DegenerateMaximumError("flat non-constant maximum of <y, D(v) y>")
    h = spacing / 8
    for _ in range(newton_steps):
        for axis in range(family.dimension):
            e = np.zeros(family.dimension); e[axis] = h
            fp, f0, fm = quad(vmax + e), quad(vmax), quad(vmax - e)
            d1 = (fp - fm) / (2 * h)
            d2 = (fp - 2 * f0 + fm) / h**2
            if d2 < 0:
                vmax[axis] -= d1 / d2
    vmax = np.mod(vmax, 2 * np.pi)
    return vmax, quad(vmax), False


def md_rate(family: DiffusionFamily, x, max_iter: int = 100, tol: float = 1e-12):
    """Moderate-deviation rate sup_y (<y, x> - (1/2) <y, D(v1(y)) y>).

    Requires D(v) positive definite across the grid.  For a constant family
    this is the explicit quadratic (1/2) <x, D^(-1) x>; otherwise the
    stationarity condition D(v1(y)) y = x is iterated, with the value
    recomputed from the defining supremum.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not family.positive_definite():
        raise ValidationError("diffusion family must be positive definite")
    if family.is_constant():
        D = family(np.zeros(family.dimension))
        y = np.linalg.solve(D, x)
        return 0.5 * float(x @ y), y, None
    if np.abs(x).max() == 0.0:
        return 0.0, np.zeros_like(x), None
    y = np.linalg.solve(family.mean(), x)
    last = None
    for _ in range(max_iter):
        vstar, _, _ = argmax_v(family, y)
        y_new = np.linalg.solve(family(vstar), x)
        if last is not None and np.abs(y_new - y).max() < tol * max(1.0, np.abs(y).max()):
            y = y_new
            break
        last, y = y, y_new
    else:
        raise ConvergenceError(f"moderate-deviation ascent stalled at x = {x}")
    vstar, value, _ = argmax_v(family, y)
    rate = float(y @ x) - 0.5 * value
    return max(rate, 0.0), y, vstar


# ---------------------------------------------------------------------------
# tables


@dataclass
class RateRow:
    x: np.ndarray
    rate: float
    maximizer: object


@dataclass
class RateFunctionTable:
    rows: list
    kind: str                 # "md" or "ld"

    def rates(self) -> np.ndarray:
        return np.array([r.rate for r in self.rows])

    def lln_zero_ok(self, lln_point, tol: float = 1e-10) -> bool:
        """rate vanishes at the law-of-large-numbers point."""
        best = min(self.rows,
                   key=lambda r: np.abs(np.atleast_1d(r.x) - lln_point).max())
        return bool(
            np.abs(np.atleast_1d(best.x) - lln_point).max() < 1e-12
            and abs(best.rate) <= tol
        )

    def midpoint_convex(self, tol: float = 1e-8) -> bool:
        """Discrete midpoint convexity along a 1D evaluation grid."""
        finite = [r for r in self.rows if np.isfinite(r.rate)]
        vals = [r.rate for r in finite]
        for a, b, c in zip(vals, vals[1:], vals[2:]):
            if b > (a + c) / 2 + tol:
                return False
        return True


def md_rate_table(family: DiffusionFamily, xs) -> RateFunctionTable:
    rows = []
    for x in xs:
        rate, y, vstar = md_rate(family, x)
        rows.append(RateRow(np.atleast_1d(np.asarray(x, float)), rate, (y, vstar)))
    return RateFunctionTable(rows, "md")


def ld_rate_table(model: ChainModel, xs) -> RateFunctionTable:
    rows = []
    for x in xs:
        rate, lam = ld_rate(model, x)
        rows.append(RateRow(np.atleast_1d(np.asarray(x, float)), rate, lam))
    return RateFunctionTable(rows, "ld")
