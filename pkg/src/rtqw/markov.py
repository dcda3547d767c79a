"""Markov-distributed coins: block transfer operators on C^F (x) C^{4d^2}.

When the coin sequence follows a finite-state Markov chain, the averaged
characteristic function is read off powers of a block operator whose (j, k)
block couples chain states through the transition matrix while applying the
doubled one-step operator of the arriving coin.  The spectral pipeline
(fixed vectors, cyclic subspace, perturbation of the eigenvalue near 1) is
the same as in the i.i.d. case, with the rank-one spectral projector built
from distinct left and right Perron data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chain import irreducible
from .ensembles import MarkovCoinProcess
from .errors import DimensionMismatchError, ValidationError
from .spectral import (
    AssumptionReport,
    CyclicSubspace,
    _grow_invariant,
    _torus_grid,
    _y_pairs,
    psi1_vector,
)
from .spectral import m_matrix as _m_matrix
from .walk import DensityKernel, JumpFunction

SVD_CUT = 1e-10


def chi_p(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Left Perron vector of P normalized against the all-ones vector."""
    P = np.asarray(P, dtype=float)
    if not irreducible(P):
        raise ValidationError("chi_p needs an irreducible transition matrix")
    w, V = np.linalg.eig(P.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[i] - 1.0) > tol:
        raise ValidationError("transition matrix has no unit eigenvalue")
    v = np.real(V[:, i])
    s = v.sum()
    if abs(s) < tol:
        raise ValidationError("left Perron vector is orthogonal to the ones vector")
    return v / s


def block_operator(process: MarkovCoinProcess, Y, jump: JumpFunction) -> np.ndarray:
    """Block transfer operator; block (j, k) is P^T(j, k) M_j(Y).

    The arriving-coin index j carries the one-step operator: summing blocks
    against the chain then reproduces the path expectation
    E(M_{omega_n} ... M_{omega_1}) exactly (checked against enumeration).
    """
    F = len(process.coins)
    nn = (2 * jump.dimension) ** 2
    PT = process.transition.T
    out = np.zeros((F * nn, F * nn), dtype=np.complex128)
    for j in range(F):
        Mj = _single_m(process, j, Y, jump)
        for k in range(F):
            if PT[j, k]:
                out[j * nn:(j + 1) * nn, k * nn:(k + 1) * nn] = PT[j, k] * Mj
    return out


def block_initial(process: MarkovCoinProcess, Y, jump: JumpFunction) -> np.ndarray:
    """Initial block column: rows p0(j) M_j(Y), shape (F*4d^2, 4d^2)."""
    F = len(process.coins)
    nn = (2 * jump.dimension) ** 2
    out = np.zeros((F * nn, nn), dtype=np.complex128)
    for j in range(F):
        out[j * nn:(j + 1) * nn] = process.initial[j] * _single_m(process, j, Y, jump)
    return out


def _single_m(process: MarkovCoinProcess, j: int, Y, jump: JumpFunction) -> np.ndarray:
    coin = process.coins[j]
    V = np.kron(coin.matrix, coin.matrix.conj())
    return _m_matrix(V, Y, jump)


@dataclass
class MarkovModel:
    """Markov coin process with its block cyclic subspace."""

    process: MarkovCoinProcess
    jump: JumpFunction
    subspace: CyclicSubspace

    @property
    def dimension(self) -> int:
        return self.jump.dimension

    def m_full(self, Y) -> np.ndarray:
        return block_operator(self.process, Y, self.jump)

    def compressed_m(self, Y) -> np.ndarray:
        U = self.subspace.basis
        return U.conj().T @ self.m_full(Y) @ U

    def left_form(self) -> np.ndarray:
        F = len(self.process.coins)
        return self.subspace.project_vector(
            np.kron(np.ones(F), psi1_vector(self.dimension))
        )

    def first_order_diag(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        f = 1j * (self.jump.displacements @ y)
        F = len(self.process.coins)
        return np.tile(np.repeat(f, 2 * self.dimension), F)

    def second_order_diag(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        f = -0.5 * (self.jump.displacements @ y) ** 2
        F = len(self.process.coins)
        return np.tile(np.repeat(f.astype(np.complex128), 2 * self.dimension), F)


def markov_model(process: MarkovCoinProcess, jump: JumpFunction,
                 svd_cut: float = SVD_CUT, n_random: int = 4,
                 seed: int = 20250810) -> MarkovModel:
    """Assemble the block model; the cyclic subspace is grown from the
    left fixed vector chi_1 (x) Psi_1 under the adjoint block operators."""
    if process.dimension != jump.dimension:
        raise DimensionMismatchError("process and jump dimensions differ")
    d = jump.dimension
    F = len(process.coins)
    grid_points = 2 * jump.range_bound + 1
    pairs = _y_pairs(d, grid_points, n_random, seed)
    adjoints = [block_operator(process, Y, jump).conj().T for Y in pairs]
    seedvec = np.kron(np.ones(F), psi1_vector(d))
    basis = _grow_invariant([seedvec / np.linalg.norm(seedvec)], adjoints, svd_cut)
    gen = np.random.Generator(np.random.Philox(key=(seed, 1)))
    P = basis @ basis.conj().T
    residual = 0.0
    check = pairs + [
        (gen.uniform(0, 2 * np.pi, d), gen.uniform(0, 2 * np.pi, d)) for _ in range(8)
    ]
    for Y in check:
        A = block_operator(process, Y, jump).conj().T
        residual = max(residual, float(np.abs(A @ basis - P @ (A @ basis)).max()))
    return MarkovModel(process, jump, CyclicSubspace(basis, basis.shape[1], residual, svd_cut))


def perron_projector(process: MarkovCoinProcess, d: int) -> np.ndarray:
    """Rank-one spectral projector at eigenvalue 1 of the block operator.

    Built as |chi_p (x) Psi_1><chi_1 (x) Psi_1| normalized by the computed
    pairing (which equals 2d); idempotence is asserted rather than assumed.
    """
    F = len(process.coins)
    left = np.kron(np.ones(F), psi1_vector(d))
    right = np.kron(chi_p(process.transition), psi1_vector(d))
    pairing = left.conj() @ right
    proj = np.outer(right, left.conj()) / pairing
    if np.abs(proj @ proj - proj).max() > 1e-10:
        raise ValidationError("Perron projector failed the idempotence check")
    return proj


def averaged_char_markov(model: MarkovModel, y, n: int, initial,
                         grid_size: int | None = None) -> complex:
    """E(Phi_n)(y) for the Markov process, n >= 1.

    Quadrature over v of <chi_1 (x) Psi_1 | B(Y)^{n-1} B_0(Y) Phi_0> with
    B the block operator and B_0 the initial block column.
    """
    if n < 1:
        raise ValidationError("the block expression needs n >= 1")
    d = model.dimension
    if grid_size is None:
        grid_size = 2 * model.jump.range_bound * n + 1
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if isinstance(initial, DensityKernel):
        make_vec = lambda yy, vv: initial.fourier_vector(yy - vv, vv)
    else:
        phi0 = np.asarray(initial, dtype=np.complex128)
        vec0 = np.kron(phi0, phi0.conj())
        make_vec = lambda yy, vv: vec0
    left = model.left_form().conj()
    U = model.subspace.basis
    nodes = _torus_grid(grid_size)
    acc = 0.0 + 0.0j
    for vtuple in itertools.product(nodes, repeat=d):
        v = np.asarray(vtuple)
        Y = (y - v, v)
        A = model.compressed_m(Y)
        start = U.conj().T @ (block_initial(model.process, Y, model.jump) @ make_vec(y, v))
        acc += left @ np.linalg.matrix_power(A, n - 1) @ start
    return complex(acc / grid_size**d)


def check_assumption_s2(model: MarkovModel, v_points: int | None = None,
                        one_tol: float = 1e-8, gap_tol: float = 1e-6) -> AssumptionReport:
    """Peripheral-spectrum check of the block operator on its cyclic subspace."""
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
        eigs = np.linalg.eigvals(model.compressed_m((-v, v)))
        dist = np.abs(eigs - 1.0)
        near = dist <= one_tol
        count = int(near.sum())
        others = np.abs(eigs[~near])
        second = float(others.max()) if others.size else 0.0
        this_gap = 1.0 - second
        full_eigs = np.linalg.eigvals(model.m_full((-v, v)))
        full_degeneracy = max(full_degeneracy, int((np.abs(full_eigs - 1.0) <= one_tol).sum()))
        worst_degeneracy = max(worst_degeneracy, count)
        gap = min(gap, this_gap)
        if (~near).any():
            margin = min(margin, float(dist[~near].min()))
        if count != 1 or this_gap < gap_tol:
            offending.append(tuple(float(x) for x in v))
    return AssumptionReport(not offending, float(gap), float(margin), worst_degeneracy,
                            full_degeneracy, offending, v_points, one_tol, gap_tol)


def markov_diffusion(model: MarkovModel, v, method: str = "resolvent") -> np.ndarray:
    """Diffusion matrix of the Markov-coin walk at torus point v.

    The drift is (1/2d) sum_tau r(tau) regardless of the transition matrix;
    the quadratic term goes through the same perturbation series as the
    i.i.d. case, with the block reduced resolvent and the non-orthogonal
    rank-one projector built from the left/right Perron data.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if method == "hessian":
        from .spectral import _hessian_diffusion
        D = _hessian_diffusion(model, v)
        return (D + D.T) / 2.0
    if method != "resolvent":
        raise ValidationError(f"unknown diffusion method {method!r}")
    from .spectral import perturbative_diffusion
    return perturbative_diffusion(model, v, model.jump.drift)


def markov_averaged_diffusion(model: MarkovModel, grid_size: int = 64) -> np.ndarray:
    d = model.dimension
    nodes = _torus_grid(grid_size)
    acc = np.zeros((d, d))
    for vtuple in itertools.product(nodes, repeat=d):
        acc += markov_diffusion(model, np.asarray(vtuple))
    return acc / grid_size**d


def blockmax_norm(x: np.ndarray, F: int) -> float:
    """max over chain blocks of the Euclidean norm of the block component."""
    parts = x.reshape(F, -1)
    return float(np.linalg.norm(parts, axis=1).max())
