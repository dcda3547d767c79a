"""Averaged dynamics on the doubled internal space C^{2d} (x) C^{2d}.

Averaging the walk over coin randomness turns one step into the contraction
E = E(C (x) conj(C)); together with the diagonal phase operator D(Y) this
gives the transfer family M(Y) = D(Y) E whose powers produce averaged
characteristic functions.  The isolated eigenvalue of M(y-v, v) near 1
carries the drift at first order in y and the diffusion matrix D(v) at
second order; both are extracted here, by second-order eigenvalue
perturbation (projector plus reduced resolvent) and independently by finite
differences of the tracked eigenvalue.

All spectral work happens on the cyclic subspace generated by the
trace-preservation vector Psi_1 = sum_tau |tau (x) tau>, which is the part
of the doubled space the averaged characteristic function ever sees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionFailedError,
    DimensionMismatchError,
    TrackingLostError,
    ValidationError,
)
from .walk import DensityKernel, JumpFunction

HESSIAN_STEP = 1e-4
EIGENVALUE_ONE_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-6
SVD_CUT = 1e-10


# ---------------------------------------------------------------------------
# basic doubled-space objects


def psi1_vector(d: int) -> np.ndarray:
    """Unnormalized trace vector sum_tau |tau (x) tau>."""
    n = 2 * d
    v = np.zeros(n * n, dtype=np.complex128)
    v[np.arange(n) * n + np.arange(n)] = 1.0
    return v


def swap_operator(d: int) -> np.ndarray:
    """Unitary involution |phi (x) psi> -> |psi (x) phi>."""
    n = 2 * d
    S = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            S[j * n + i, i * n + j] = 1.0
    return S


def expected_doubled(ensemble) -> np.ndarray:
    """E = sum_j p_j C_j (x) conj(C_j), the one-step averaged operator."""
    coins = getattr(ensemble, "coins", None)
    if coins is None:
        ensemble = ensemble.to_coin_ensemble()
        coins = ensemble.coins
    n = 2 * ensemble.dimension
    E = np.zeros((n * n, n * n), dtype=np.complex128)
    for coin, p in zip(coins, ensemble.probs):
        E += p * np.kron(coin.matrix, coin.matrix.conj())
    return E


def phase_diag(Y, jump: JumpFunction) -> np.ndarray:
    """Diagonal of D(Y) = d(y) (x) d(y') for Y = (y, y')."""
    y, yp = Y
    return np.kron(jump.phase_diag(y), jump.phase_diag(yp))


def phase_matrix(Y, jump: JumpFunction) -> np.ndarray:
    """D(Y) as a full (diagonal unitary) matrix."""
    return np.diag(phase_diag(Y, jump))


def m_matrix(E: np.ndarray, Y, jump: JumpFunction) -> np.ndarray:
    """M(Y) = D(Y) E."""
    return phase_diag(Y, jump)[:, None] * E


# ---------------------------------------------------------------------------
# cyclic subspace


@dataclass
class CyclicSubspace:
    """Orthonormal basis of the smallest M*(Y)-invariant space containing Psi_1."""

    basis: np.ndarray        # (ambient, rank), orthonormal columns
    rank: int
    residual: float          # a-posteriori invariance defect on the check grid
    svd_cut: float

    def compress(self, op: np.ndarray) -> np.ndarray:
        return self.basis.conj().T @ op @ self.basis

    def project_vector(self, vec: np.ndarray) -> np.ndarray:
        return self.basis.conj().T @ vec


def _torus_grid(points: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(points) / points


def _y_pairs(d: int, points: int, n_random: int, seed: int):
    nodes = _torus_grid(points)
    pairs = [
        (np.asarray(y), np.asarray(yp))
        for y in itertools.product(nodes, repeat=d)
        for yp in itertools.product(nodes, repeat=d)
    ]
    gen = np.random.Generator(np.random.Philox(key=(seed, 0)))
    for _ in range(n_random):
        pairs.append((gen.uniform(0, 2 * np.pi, d), gen.uniform(0, 2 * np.pi, d)))
    return pairs


def _grow_invariant(seed_vecs, operators, cut: float) -> np.ndarray:
    """Closure of span(seed_vecs) under the given operators (Gram-Schmidt)."""
    ambient = seed_vecs[0].shape[0]
    basis = np.zeros((ambient, 0), dtype=np.complex128)

    def try_add(vec):
        nonlocal basis
        w = vec - basis @ (basis.conj().T @ vec)
        w = w - basis @ (basis.conj().T @ w)  # second pass for orthogonality
        nrm = np.linalg.norm(w)
        if nrm > cut:
            basis = np.hstack([basis, (w / nrm)[:, None]])
            return True
        return False

    for v in seed_vecs:
        try_add(v)
    grew = True
    while grew and basis.shape[1] < ambient:
        grew = False
        cols = basis.shape[1]
        for op in operators:
            img = op @ basis[:, :cols]
            for j in range(img.shape[1]):
                if try_add(img[:, j]):
                    grew = True
    return basis


def cyclic_subspace(E: np.ndarray, jump: JumpFunction, svd_cut: float = SVD_CUT,
                    grid_points: int | None = None, n_random: int = 4,
                    seed: int = 20250810) -> CyclicSubspace:
    """Span of the M*(Y)-orbit of Psi_1 over a frequency-resolving Y grid.

    ``grid_points`` defaults to 2*rho + 1 per torus dimension, which resolves
    every phase frequency of D(Y), so the grid span equals the torus span;
    the invariance residual is re-checked a posteriori on random points.
    """
    d = jump.dimension
    if grid_points is None:
        grid_points = 2 * jump.range_bound + 1
    pairs = _y_pairs(d, grid_points, n_random, seed)
    adjoints = [m_matrix(E, Y, jump).conj().T for Y in pairs]
    psi = psi1_vector(d)
    basis = _grow_invariant([psi / np.linalg.norm(psi)], adjoints, svd_cut)
    # a-posteriori invariance defect
    gen = np.random.Generator(np.random.Philox(key=(seed, 1)))
    residual = 0.0
    check = pairs + [
        (gen.uniform(0, 2 * np.pi, d), gen.uniform(0, 2 * np.pi, d)) for _ in range(8)
    ]
    P = basis @ basis.conj().T
    for Y in check:
        A = m_matrix(E, Y, jump).conj().T
        residual = max(residual, float(np.abs(A @ basis - P @ (A @ basis)).max()))
    return CyclicSubspace(basis, basis.shape[1], residual, svd_cut)


# ---------------------------------------------------------------------------
# model container


@dataclass
class AveragedModel:
    """Doubled operator, jump table and cyclic subspace of one coin model."""

    doubled: np.ndarray
    jump: JumpFunction
    subspace: CyclicSubspace

    @property
    def dimension(self) -> int:
        return self.jump.dimension

    def m_full(self, Y) -> np.ndarray:
        return m_matrix(self.doubled, Y, self.jump)

    def compressed_m(self, Y) -> np.ndarray:
        U = self.subspace.basis
        return U.conj().T @ self.m_full(Y) @ U

    def left_form(self) -> np.ndarray:
        """Psi_1 expressed in subspace coordinates."""
        return self.subspace.project_vector(psi1_vector(self.dimension))

    def first_order_diag(self, y) -> np.ndarray:
        """Pair-space diagonal of the first expansion block: i y.r(tau)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        f = 1j * (self.jump.displacements @ y)
        return np.repeat(f, 2 * self.dimension)

    def second_order_diag(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        f = -0.5 * (self.jump.displacements @ y) ** 2
        return np.repeat(f.astype(np.complex128), 2 * self.dimension)


def averaged_model(ensemble, jump: JumpFunction, subspace: CyclicSubspace | None = None,
                   **subspace_kwargs) -> AveragedModel:
    """Assemble the spectral model for an i.i.d. coin ensemble."""
    if ensemble.dimension != jump.dimension:
        raise DimensionMismatchError("ensemble and jump dimensions differ")
    E = expected_doubled(ensemble)
    if subspace is None:
        subspace = cyclic_subspace(E, jump, **subspace_kwargs)
    return AveragedModel(E, jump, subspace)


def drift(jump: JumpFunction) -> np.ndarray:
    """r_bar = (1/2d) sum_tau r(tau)."""
    return jump.drift


# ---------------------------------------------------------------------------
# assumption check


@dataclass
class AssumptionReport:
    """Outcome of the peripheral-spectrum check over a torus grid.

    ``gap`` is min over the grid of (1 - second largest modulus) on the
    cyclic subspace; ``degeneracy`` the worst multiplicity of eigenvalues
    within ``one_tol`` of 1 there; ``full_degeneracy`` the same count on the
    ambient doubled space (>= 2d for any deterministic unitary coin).
    """

    holds: bool
    gap: float
    simplicity_margin: float
    degeneracy: int
    full_degeneracy: int
    offending: list
    v_points: int
    one_tol: float
    gap_tol: float

    def require(self):
        if not self.holds:
            raise AssumptionFailedError(
                f"spectral assumption fails: gap={self.gap:.3e}, "
                f"degeneracy={self.degeneracy}, offending v={self.offending[:3]}"
            )


def check_assumption(model: AveragedModel, v_points: int | None = None,
                     one_tol: float = EIGENVALUE_ONE_TOL,
                     gap_tol: float = DEFAULT_GAP_TOL) -> AssumptionReport:
    """Check that 1 is the unique peripheral eigenvalue of M(-v,v)|_I.

    Failure is reported, never raised; callers that need the assumption use
    AssumptionReport.require().
    """
    d = model.dimension
    if v_points is None:
        v_points = 256 if d == 1 else 64
    nodes = _torus_grid(v_points)
    gap = np.inf
    margin = np.inf
    worst_degeneracy = 1
    full_degeneracy = 1
    offending = []
    for vtuple in itertools.product(nodes, repeat=d):
        v = np.asarray(vtuple)
        A0 = model.compressed_m((-v, v))
        eigs = np.linalg.eigvals(A0)
        dist = np.abs(eigs - 1.0)
        near = dist <= one_tol
        count = int(near.sum())
        others = np.abs(eigs[~near])
        second = float(others.max()) if others.size else 0.0
        this_gap = 1.0 - second
        this_margin = float(dist[~near].min()) if (~near).any() else 0.0
        full_eigs = np.linalg.eigvals(model.m_full((-v, v)))
        full_degeneracy = max(full_degeneracy, int((np.abs(full_eigs - 1.0) <= one_tol).sum()))
        worst_degeneracy = max(worst_degeneracy, count)
        gap = min(gap, this_gap)
        margin = min(margin, this_margin)
        if count != 1 or this_gap < gap_tol:
            offending.append(tuple(float(x) for x in v))
    holds = not offending
    return AssumptionReport(holds, float(gap), float(margin), worst_degeneracy,
                            full_degeneracy, offending, v_points, one_tol, gap_tol)


# ---------------------------------------------------------------------------
# eigen machinery


def eig_near_one(A: np.ndarray, tol: float = EIGENVALUE_ONE_TOL):
    """(eigenvalue, right eigenvector, left eigenvector) nearest to 1.

    Raises when no eigenvalue sits within ``tol`` of 1 or when that
    eigenvalue is not simple, since every consumer (spectral projector,
    reduced resolvent) is meaningless for a degenerate peripheral value.
    """
    w, Vr = np.linalg.eig(A)
    dist = np.abs(w - 1.0)
    i = int(np.argmin(dist))
    if dist[i] > tol:
        raise AssumptionFailedError(f"no eigenvalue within {tol} of 1 (closest {w[i]})")
    if int((dist <= tol).sum()) > 1:
        raise AssumptionFailedError("the eigenvalue at 1 is degenerate")
    wl, Vl = np.linalg.eig(A.conj().T)
    j = int(np.argmin(np.abs(wl - 1.0)))
    return w[i], Vr[:, i], Vl[:, j]


def reduced_resolvent(m0: np.ndarray, projector: np.ndarray | None = None) -> np.ndarray:
    """S(1), the inverse of (M0 - 1) on the complement of the 1-eigenspace.

    Solves (M0 - I + P) S = I - P with P the rank-one spectral projector, so
    S P = P S = 0 and (M0 - I) S = I - P; the conditioning is set by the
    spectral gap, not by a global pseudo-inverse.
    """
    n = m0.shape[0]
    if projector is None:
        _, r, l = eig_near_one(m0)
        projector = np.outer(r, l.conj()) / (l.conj() @ r)
    return np.linalg.solve(m0 - np.eye(n) + projector, np.eye(n) - projector)


def spectral_projector(m0: np.ndarray) -> np.ndarray:
    """Rank-one spectral projector of the eigenvalue of m0 nearest 1."""
    _, r, l = eig_near_one(m0)
    return np.outer(r, l.conj()) / (l.conj() @ r)


# ---------------------------------------------------------------------------
# diffusion matrices


def eigenvalue_quadratic_form(model, v) -> tuple[np.ndarray, np.ndarray]:
    """Drift and quadratic coefficient of the tracked eigenvalue at y = 0.

    Evaluates the second-order perturbation series lambda_1(y) = 1
    + tr(A1 P) + tr(A2 P) - tr(A1 S A1 P) with exact first/second-order
    perturbation blocks, on the cyclic-subspace compression.  Works for any
    model exposing m_full / first_order_diag / second_order_diag, including
    the block operators of Markov coin processes (where the spectral
    projector P is built from distinct left and right eigenvectors).
    """
    d = model.dimension
    U = model.subspace.basis
    v = np.atleast_1d(np.asarray(v, dtype=float))
    M0_full = model.m_full((-v, v))
    A0 = U.conj().T @ M0_full @ U
    lam, r, l = eig_near_one(A0)
    P = np.outer(r, l.conj()) / (l.conj() @ r)
    S = reduced_resolvent(A0, P)

    def lam_error_terms(y):
        f1 = model.first_order_diag(y)
        f2 = model.second_order_diag(y)
        A1 = U.conj().T @ (f1[:, None] * M0_full) @ U
        A2 = U.conj().T @ (f2[:, None] * M0_full) @ U
        lin = np.trace(A1 @ P)
        quad = np.trace(A2 @ P) - np.trace(A1 @ (S @ (A1 @ P)))
        return lin, quad

    basis_dirs = [np.eye(d)[i] for i in range(d)]
    lin_coeffs = np.zeros(d, dtype=np.complex128)
    H = np.zeros((d, d))
    quad_diag = np.zeros(d)
    for i, e in enumerate(basis_dirs):
        lin, quad = lam_error_terms(e)
        lin_coeffs[i] = lin
        quad_diag[i] = quad.real
        H[i, i] = quad.real
    for i in range(d):
        for j in range(i + 1, d):
            _, quad = lam_error_terms(basis_dirs[i] + basis_dirs[j])
            H[i, j] = H[j, i] = (quad.real - quad_diag[i] - quad_diag[j]) / 2.0
    return lin_coeffs.imag, H


def perturbative_diffusion(model, v, drift_vec: np.ndarray) -> np.ndarray:
    """D(v) from the perturbation series, with the drift consistency check."""
    lin, H = eigenvalue_quadratic_form(model, v)
    if np.abs(lin - drift_vec).max() > 1e-8:
        raise AssumptionFailedError(
            f"first-order coefficient {lin} does not match the drift {drift_vec}"
        )
    D = -2.0 * H - np.outer(drift_vec, drift_vec)
    return (D + D.T) / 2.0


def _tracked_eigenvalue(model, y, v) -> complex:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    A = model.compressed_m((y - v, v))
    w = np.linalg.eigvals(A)
    lam = w[int(np.argmin(np.abs(w - 1.0)))]
    if abs(lam - 1.0) > 0.5:
        raise TrackingLostError(f"eigenvalue drifted to {lam}")
    return complex(lam)


def _hessian_diffusion(model, v, step: float = HESSIAN_STEP) -> np.ndarray:
    """D from central second differences of log lambda_1(y, v) at y = 0."""
    d = model.dimension

    def loglam(y):
        return np.log(_tracked_eigenvalue(model, y, v))

    h = step
    D = np.zeros((d, d))
    base = loglam(np.zeros(d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        D[i, i] = -((loglam(e) - 2 * base + loglam(-e)) / h**2).real
    for i in range(d):
        for j in range(i + 1, d):
            ei = np.zeros(d); ei[i] = h
            ej = np.zeros(d); ej[j] = h
            mixed = (loglam(ei + ej) - loglam(ei - ej)
                     - loglam(-ei + ej) + loglam(-ei - ej)) / (4 * h**2)
            D[i, j] = D[j, i] = -mixed.real
    return D


def diffusion_matrix(model: AveragedModel, v, method: str = "resolvent") -> np.ndarray:
    """Diffusion matrix D(v), real symmetric positive semidefinite.

    The tracked eigenvalue satisfies log lambda_1(y, v) = i r_bar.y
    - (1/2) <y, D(v) y> + O(|y|^3); equivalently, centered second moments of
    the averaged walk grow like n <e_i, D e_j> after torus-averaging over v.

    method "resolvent" evaluates the second-order perturbation series with
    the reduced resolvent; "hessian" uses central differences of the tracked
    eigenvalue (step 1e-4).  The two agree to ~1e-6 and the resolvent route
    is exact to rounding.
    """
    if method == "resolvent":
        return perturbative_diffusion(model, v, model.jump.drift)
    if method == "hessian":
        D = _hessian_diffusion(model, v)
        return (D + D.T) / 2.0
    raise ValidationError(f"unknown diffusion method {method!r}")


def averaged_diffusion(model: AveragedModel, grid_size: int = 64,
                       method: str = "resolvent") -> np.ndarray:
    """Torus average integral of D(v) by the uniform (trapezoidal) rule."""
    d = model.dimension
    nodes = _torus_grid(grid_size)
    acc = np.zeros((d, d))
    for vtuple in itertools.product(nodes, repeat=d):
        acc += diffusion_matrix(model, np.asarray(vtuple), method)
    return acc / grid_size**d


@dataclass
class DiffusionReport:
    """Drift, sampled diffusion matrices and their torus average."""

    drift: np.ndarray
    v_values: list
    d_values: list
    averaged: np.ndarray
    grid_size: int
    methods: tuple
    cross_check_residual: float
    v_independent: bool


def diffusion_report(model: AveragedModel, grid_size: int = 64,
                     cross_check_points: int = 8) -> DiffusionReport:
    """Sample D(v) on a grid, average it, and cross-check both methods."""
    d = model.dimension
    nodes = _torus_grid(grid_size)
    v_values, d_values = [], []
    for vtuple in itertools.product(nodes, repeat=d):
        v = np.asarray(vtuple)
        v_values.append(v)
        d_values.append(diffusion_matrix(model, v, "resolvent"))
    averaged = np.mean(d_values, axis=0)
    stride = max(1, len(v_values) // cross_check_points)
    resid = 0.0
    for v, Dv in list(zip(v_values, d_values))[::stride]:
        resid = max(resid, float(np.abs(Dv - diffusion_matrix(model, v, "hessian")).max()))
    spread = float(np.max(np.abs(np.array(d_values) - averaged)))
    return DiffusionReport(model.jump.drift, v_values, d_values, averaged,
                           grid_size, ("resolvent", "hessian"), resid,
                           spread <= 1e-10)


# ---------------------------------------------------------------------------
# averaged characteristic functions


def _initial_vector_factory(model: AveragedModel, initial):
    """Return f(y, v) -> doubled-space initial vector for the quadrature."""
    n = 2 * model.dimension
    if isinstance(initial, DensityKernel):
        if initial.dimension != model.dimension:
            raise DimensionMismatchError("kernel dimension does not match the model")
        return lambda y, v: initial.fourier_vector(y - v, v)
    phi0 = np.asarray(initial, dtype=np.complex128)
    if phi0.shape != (n,):
        raise DimensionMismatchError("initial internal state must have 2d components")
    vec = np.kron(phi0, phi0.conj())
    return lambda y, v: vec


def averaged_char_function(model: AveragedModel, y, n: int, initial,
                           grid_size: int | None = None) -> complex:
    """E(Phi_n)(y): torus quadrature of <Psi_1| M(y-v, v)^n Phi_0>.

    ``initial`` is an internal state (2d vector) or a DensityKernel.  With
    ``grid_size`` left at None the quadrature uses 2*rho*n + 1 nodes per
    dimension, which integrates the trigonometric integrand exactly.
    """
    if n < 0:
        raise ValidationError("n must be nonnegative")
    d = model.dimension
    if grid_size is None:
        spread = 0
        if isinstance(initial, DensityKernel):
            spread = max((abs(c) for x in initial._sites for c in x), default=0)
        grid_size = 2 * (model.jump.range_bound * max(n, 1) + spread) + 1
    y = np.atleast_1d(np.asarray(y, dtype=float))
    make_vec = _initial_vector_factory(model, initial)
    left = model.left_form().conj()
    U = model.subspace.basis
    nodes = _torus_grid(grid_size)
    acc = 0.0 + 0.0j
    for vtuple in itertools.product(nodes, repeat=d):
        v = np.asarray(vtuple)
        A = model.compressed_m((y - v, v))
        vec = U.conj().T @ make_vec(y, v)
        acc += left @ np.linalg.matrix_power(A, n) @ vec
    return complex(acc / grid_size**d)


def averaged_distribution(model: AveragedModel, n: int, initial,
                          grid_size: int | None = None):
    """Averaged position law at time n via inverse transform of E(Phi_n).

    Returns ({site: weight}, max imaginary residue) over the support box.
    """
    d = model.dimension
    rho = model.jump.range_bound
    points = 2 * rho * max(n, 1) + 1
    nodes = _torus_grid(points)
    phis = {}
    for ytuple in itertools.product(nodes, repeat=d):
        phis[ytuple] = averaged_char_function(model, np.asarray(ytuple), n, initial, grid_size)
    out = {}
    imag_max = 0.0
    ks = range(-rho * n, rho * n + 1)
    for ktuple in itertools.product(ks, repeat=d):
        k = np.asarray(ktuple, dtype=float)
        acc = 0.0 + 0.0j
        for ytuple, val in phis.items():
            acc += val * np.exp(-1j * np.dot(np.asarray(ytuple), k))
        w = acc / points**d
        imag_max = max(imag_max, abs(w.imag))
        out[ktuple if d > 1 else ktuple[0]] = w.real
    return out, imag_max


@dataclass
class ProbeRow:
    n: int
    value: complex
    limit: complex
    error: float


def scaling_limit_probe(model: AveragedModel, y, t: float, n_list, initial,
                        mode: str = "diffusive", grid_size: int = 64) -> list:
    """Convergence table for the rescaled averaged characteristic function.

    mode "diffusive": e^{-i[tn] r_bar.y / sqrt(n)} E(Phi_[tn])(y/sqrt(n))
    against the torus average of e^{-(t/2) <y, D(v) y>}; mode "ballistic":
    E(Phi_[tn])(y/n) against e^{i t y.r_bar}.
    """
    d = model.dimension
    y = np.atleast_1d(np.asarray(y, dtype=float))
    rbar = model.jump.drift
    if mode == "diffusive":
        nodes = _torus_grid(grid_size)
        acc = 0.0
        for vtuple in itertools.product(nodes, repeat=d):
            Dv = diffusion_matrix(model, np.asarray(vtuple))
            acc += np.exp(-0.5 * t * (y @ Dv @ y))
        limit = complex(acc / grid_size**d)
    elif mode == "ballistic":
        limit = complex(np.exp(1j * t * float(y @ rbar)))
    else:
        raise ValidationError(f"unknown probe mode {mode!r}")
    rows = []
    for n in n_list:
        m = int(t * n)
        if mode == "diffusive":
            val = averaged_char_function(model, y / np.sqrt(n), m, initial, grid_size)
            val *= np.exp(-1j * m * float(rbar @ y) / np.sqrt(n))
        else:
            val = averaged_char_function(model, y / n, m, initial, grid_size)
        rows.append(ProbeRow(n, complex(val), limit, abs(val - limit)))
    return rows


# ---------------------------------------------------------------------------
# mobility scan


@dataclass
class EinsteinRow:
    s: int
    velocity: np.ndarray
    diffusion: np.ndarray
    mobility: np.ndarray


def einstein_scan(ensemble, jump_centered: JumpFunction, jump_drift: JumpFunction,
                  s_list, grid_size: int = 64) -> list:
    """Rescaled-jump scan r_s = s*r1 + r0 on the lattice scaled by l = s.

    ``jump_centered`` (r1) must have zero drift and ``jump_drift`` (r0) a
    nonzero one.  For each s the row reports the rescaled velocity r0_bar/s,
    the rescaled averaged diffusion D^Y = D^(s)/s^2 (which tends to the
    averaged diffusion of the r1 model), and the mobility estimate
    velocity * s = r0_bar.
    """
    r1bar = jump_centered.drift
    r0bar = jump_drift.drift
    if np.abs(r1bar).max() > 1e-12:
        raise ValidationError("the rescaled jump component must have zero drift")
    if np.abs(r0bar).max() <= 1e-12:
        raise ValidationError("the bias jump component must have nonzero drift")
    rows = []
    for s in s_list:
        s = int(s)
        jump_s = JumpFunction(
            s * jump_centered.displacements + jump_drift.displacements,
            jump_centered.dimension,
        )
        model_s = averaged_model(ensemble, jump_s)
        D_s = averaged_diffusion(model_s, grid_size)
        rows.append(EinsteinRow(s, r0bar / s, D_s / s**2, r0bar.copy()))
    return rows
