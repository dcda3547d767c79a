"""Markov-chain reduction of permutation-coin walks.

For coins that permute the internal labels (up to phases), the walk's
position law is classical: given the permutation sequence, the internal
label follows the composed permutations and the position is the running sum
of jumps along that path.  Averaging over i.i.d. permutations makes the
label path a Markov chain on I_pm with a doubly stochastic transition
matrix, so its asymptotics (CLT covariance, exact finite-time laws, the law
of per-realization diffusion constants) are computable in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import PermutationMeasure, SeededStream, marginal_permutation_measure
from .errors import SupportGuardError, ValidationError
from .walk import JumpFunction, LatticeDistribution

STOCHASTIC_TOL = 1e-12


@dataclass
class ChainModel:
    """Doubly stochastic label chain induced by a permutation measure.

    ``transition[i, j]`` is the probability that label j follows label i
    (indices in the fixed I_pm order).  ``initial`` is the label law at time
    zero; ``measure`` keeps the generating permutation measure when known,
    which per-realization statistics need.
    """

    transition: np.ndarray
    jump: JumpFunction
    initial: np.ndarray
    measure: PermutationMeasure | None = None

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        n = 2 * self.jump.dimension
        if P.shape != (n, n):
            raise ValidationError(f"transition shape {P.shape} != ({n}, {n})")
        if P.min() < 0:
            raise ValidationError("transition entries must be nonnegative")
        if np.abs(P.sum(axis=1) - 1).max() > STOCHASTIC_TOL or \
           np.abs(P.sum(axis=0) - 1).max() > STOCHASTIC_TOL:
            raise ValidationError("transition matrix must be doubly stochastic")
        p0 = np.asarray(self.initial, dtype=float)
        if p0.shape != (n,) or p0.min() < 0 or abs(p0.sum() - 1) > STOCHASTIC_TOL:
            raise ValidationError("initial law must be a probability vector on I_pm")
        self.transition = P
        self.initial = p0

    @property
    def size(self) -> int:
        return self.transition.shape[0]


def initial_from_state(phi0) -> np.ndarray:
    """Label law |a_tau|^2 carried by an internal state."""
    phi0 = np.asarray(phi0, dtype=np.complex128)
    return np.abs(phi0) ** 2


def build_chain(measure: PermutationMeasure, jump: JumpFunction, initial=None) -> ChainModel:
    """Transition matrix P(sigma', sigma) = sum_pi mu(pi) [sigma = pi(sigma')]."""
    d = jump.dimension
    if measure.dimension != d:
        raise ValidationError("measure and jump dimensions differ")
    n = 2 * d
    P = np.zeros((n, n))
    for perm, p in measure.items():
        for i, img in enumerate(perm):
            P[i, img] += p
    if initial is None:
        p0 = np.full(n, 1.0 / n)
    else:
        p0 = np.asarray(initial, dtype=float)
        if p0.dtype == complex or p0.shape != (n,) or abs(p0.sum() - 1) > 1e-9:
            p0 = initial_from_state(initial)
    return ChainModel(P, jump, p0, measure)


def chain_from_ensemble(ensemble, jump: JumpFunction, initial=None) -> ChainModel:
    """Convenience: marginal permutation measure, then the chain."""
    return build_chain(marginal_permutation_measure(ensemble), jump, initial)


def irreducible(P: np.ndarray) -> bool:
    """Strong connectivity of the positive-entry digraph."""
    P = np.asarray(P)
    n = P.shape[0]
    reach = (P > 0) | np.eye(n, dtype=bool)
    power = reach.copy()
    for _ in range(max(0, int(math.ceil(math.log2(n))) if n > 1 else 0)):
        power = power @ power
    return bool(power.all())


def periodic(P: np.ndarray) -> bool:
    """True when the chain has period > 1 (diagnostic only)."""
    P = np.asarray(P)
    n = P.shape[0]
    lengths = set()
    # gcd of cycle lengths through state 0 via BFS levels
    level = {0: 0}
    frontier = [0]
    g = 0
    steps = 0
    while frontier and steps <= 2 * n:
        steps += 1
        nxt = []
        for i in frontier:
            for j in np.nonzero(P[i] > 0)[0]:
                if j in level:
                    g = math.gcd(g, level[i] + 1 - level[j])
                else:
                    level[j] = level[i] + 1
                    nxt.append(j)
        frontier = nxt
    return g > 1


def stationary(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Invariant law of an irreducible chain (uniform when doubly stochastic)."""
    P = np.asarray(P, dtype=float)
    if not irreducible(P):
        raise ValidationError("transition matrix is not irreducible")
    w, V = np.linalg.eig(P.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[i] - 1.0) > tol:
        raise ValidationError("no unit eigenvalue found")
    u = np.real(V[:, i])
    u = u / u.sum()
    if u.min() < -tol:
        raise ValidationError("invariant vector has negative entries")
    return np.clip(u, 0.0, None) / np.clip(u, 0.0, None).sum()


@dataclass
class ChainCovariance:
    """Asymptotic covariance of the centered jump sums.

    ``sigma`` follows the reduced-resolvent formula; ``alternative`` the
    equivalent (I_Q - P_Q)^(-1) (I_Q + P_Q) quadratic form.  ``singular``
    flags a positive-semidefinite-but-singular sigma, for which normal-law
    comparisons are skipped downstream.
    """

    sigma: np.ndarray
    alternative: np.ndarray
    singular: bool
    resolvent: np.ndarray


def chain_covariance(model: ChainModel, tol: float = 1e-10) -> ChainCovariance:
    """Covariance Sigma of lim (1/sqrt n) sum (r(tau_j) - r_bar).

    Sigma_ij = -(1/2d) <r_i, r_j> + rbar_i rbar_j
               - (1/2d)(<r_i, S(1) r_j> + <r_j, S(1) r_i>),
    with S(1) the reduced resolvent of P at 1 on the complement of the
    uniform vector.
    """
    P = model.transition
    if not irreducible(P):
        raise ValidationError("chain covariance needs an irreducible chain")
    n = model.size
    d = model.jump.dimension
    w = np.linalg.eigvals(P)
    if int((np.abs(w - 1.0) <= 1e-8).sum()) != 1:
        raise ValidationError("eigenvalue 1 of the transition matrix is not simple")
    proj = np.full((n, n), 1.0 / n)
    S = np.linalg.solve(P - np.eye(n) + proj, np.eye(n) - proj)
    rvecs = model.jump.displacements.astype(float)        # (2d, d)
    rbar = model.jump.drift
    sigma = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            ri, rj = rvecs[:, i], rvecs[:, j]
            sigma[i, j] = (-(ri @ rj) / n + rbar[i] * rbar[j]
                           - (ri @ S @ rj + rj @ S @ ri) / n)
    # alternative form through the restricted inverse
    Q = np.eye(n) - proj
    PQ = Q @ P @ Q
    core = np.linalg.solve(Q - PQ + proj, (Q + PQ))
    alt = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            ri, rj = Q @ rvecs[:, i], Q @ rvecs[:, j]
            alt[i, j] = (ri @ core @ rj + rj @ core @ ri) / (2 * n)
    eigs = np.linalg.eigvalsh((sigma + sigma.T) / 2)
    if eigs.min() < -1e-10:
        raise ValidationError(f"covariance has negative eigenvalue {eigs.min()}")
    return ChainCovariance(sigma, alt, bool(eigs.min() < tol), S)


def exact_sn_distribution(model: ChainModel, n: int,
                          support_limit: int = 10**7) -> LatticeDistribution:
    """Exact law of S_n = sum_{j=1..n} r(tau_j) by dynamic programming.

    The walker's averaged position law for the permutation model coincides
    with this chain law; probabilities propagate by convex combination so
    the result sums to 1 exactly.
    """
    d = model.jump.dimension
    rho = model.jump.range_bound
    side = 2 * rho * n + 1
    if side**d > support_limit:
        raise SupportGuardError(f"support {side}**{d} exceeds the guard")
    nstates = model.size
    shape = (nstates,) + (side,) * d
    w = np.zeros(shape)
    center = (rho * n,) * d
    w[(slice(None),) + center] = model.initial
    disp = model.jump.displacements
    P = model.transition
    for _ in range(n):
        new = np.zeros_like(w)
        mixed = np.tensordot(P.T, w, axes=(1, 0))   # arrive-at-state marginals
        for s in range(nstates):
            shift = disp[s]
            src = tuple(
                slice(max(0, -int(sh)), side - max(0, int(sh))) for sh in shift
            )
            dst = tuple(
                slice(max(0, int(sh)), side - max(0, -int(sh))) for sh in shift
            )
            new[(s,) + dst] += mixed[(s,) + src]
        w = new
    weights = w.sum(axis=0)
    origin = np.full(d, -rho * n, dtype=np.int64)
    return LatticeDistribution(weights, origin, d)


@dataclass
class CltRow:
    n: int
    mean_over_n: np.ndarray
    covariance_over_n: np.ndarray
    residual: float


def clt_probe(model: ChainModel, n_list) -> list:
    """Var(S_n)/n against the asymptotic covariance, per n."""
    sigma = chain_covariance(model).sigma
    d = model.jump.dimension
    rbar = model.jump.drift
    rows = []
    for n in n_list:
        dist = exact_sn_distribution(model, int(n))
        mean = np.array([dist_moment_first(dist, i) for i in range(d)])
        cov = np.zeros((d, d))
        for i in range(d):
            for j in range(d):
                cov[i, j] = _central_mixed(dist, i, j, n * rbar)
        rows.append(CltRow(int(n), mean / n, cov / n,
                           float(np.abs(cov / n - sigma).max())))
    return rows


def dist_moment_first(dist: LatticeDistribution, axis: int) -> float:
    grid = dist.site_grid().astype(float)
    return float((dist.weights * grid[..., axis]).sum())


def _central_mixed(dist: LatticeDistribution, i: int, j: int, center) -> float:
    grid = dist.site_grid().astype(float) - np.atleast_1d(center)
    return float((dist.weights * grid[..., i] * grid[..., j]).sum())


@dataclass
class RandomDiffusionStats:
    """Sampled per-realization diffusion constants D^omega."""

    samples: np.ndarray        # (S, d, d)
    mean: np.ndarray
    stderr: np.ndarray
    target: np.ndarray
    singular: bool


def random_diffusion_law(model: ChainModel, n: int, samples: int,
                         stream: SeededStream) -> RandomDiffusionStats:
    """Sample per-sequence diffusion constants of the permutation walk.

    Each sampled permutation sequence fixes the walk completely except for
    the initial label, so D^omega_n = sum_tau0 p0(tau0) (S_n - n r_bar)^2 is
    computed exactly per realization; no inner Monte Carlo is involved.
    """
    if model.measure is None:
        raise ValidationError("model carries no permutation measure to sample")
    d = model.jump.dimension
    nstates = model.size
    perms = np.array(model.measure.atoms, dtype=np.int64)      # (m, 2d)
    probs = np.asarray(model.measure.probs)
    cum = np.cumsum(probs)
    gen = stream.generator()
    draws = np.searchsorted(cum, gen.random((samples, n)), side="right")
    state = np.tile(np.arange(nstates), (samples, 1))           # (S, 2d) per start
    sums = np.zeros((samples, nstates, d))
    disp = model.jump.displacements.astype(float)
    for t in range(n):
        state = perms[draws[:, t]][np.arange(samples)[:, None], state]
        sums += disp[state]
    centered = sums - n * model.jump.drift
    dsamp = np.einsum("st,sti,stj->sij", np.tile(model.initial, (samples, 1)),
                      centered, centered) / n
    mean = dsamp.mean(axis=0)
    stderr = dsamp.std(axis=0, ddof=1) / np.sqrt(samples)
    try:
        cov = chain_covariance(model)
        target, singular = cov.sigma, cov.singular
    except ValidationError:
        target, singular = None, True
    return RandomDiffusionStats(dsamp, mean, stderr, target, singular)


def ks_distance_chi_square(values: np.ndarray, scale: float) -> float:
    """Kolmogorov-Smirnov distance of values/scale to the chi-square(1) law."""
    t = np.sort(np.asarray(values, dtype=float) / scale)
    n = t.size
    cdf = np.array([math.erf(math.sqrt(max(x, 0.0) / 2.0)) for x in t])
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.abs(cdf - upper).max(), np.abs(cdf - lower).max()))
