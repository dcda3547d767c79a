"""Exact unitary evolution of a coined walker on the integer lattice.

A walker on Z^d carries a 2d-dimensional internal (coin) state.  One time
step applies a unitary coin matrix to the internal state and then shifts
each internal component tau by an integer displacement r(tau).  Internal
basis labels live in I_pm = {+1, ..., +d, -1, ..., -d}, always enumerated
in that fixed order; every matrix in the package uses it.

States with finite support are stored as dense boxes (a complex array over
a rectangular window of sites plus the lattice coordinate of its corner),
which keeps single-step evolution vectorised while remaining exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, SupportGuardError, ValidationError

UNITARITY_TOL = 1e-12
KERNEL_TOL = 1e-12


def coin_labels(d: int) -> tuple[int, ...]:
    """Internal basis labels (+1, ..., +d, -1, ..., -d) in package order."""
    return tuple(range(1, d + 1)) + tuple(range(-1, -d - 1, -1))


def label_index(tau: int, d: int) -> int:
    """Position of label tau in the fixed I_pm ordering."""
    if not 1 <= abs(tau) <= d:
        raise ValidationError(f"label {tau} outside I_pm for dimension {d}")
    return tau - 1 if tau > 0 else d - tau - 1


def _as_site(x, d: int) -> tuple[int, ...]:
    if np.isscalar(x):
        site = (int(x),)
    else:
        site = tuple(int(c) for c in x)
    if len(site) != d:
        raise DimensionMismatchError(f"site {x} is not a point of Z^{d}")
    return site


@dataclass(frozen=True)
class JumpFunction:
    """Map from internal labels to integer lattice displacements.

    ``displacements`` has shape (2d, d); row ``label_index(tau, d)`` holds
    r(tau).  The range bound rho = max |r(tau)_j| controls support growth:
    after n steps the walker occupies sites with max_j |k_j| <= rho * n.
    """

    displacements: np.ndarray
    dimension: int

    def __post_init__(self):
        arr = np.asarray(self.displacements, dtype=np.int64)
        d = self.dimension
        if arr.shape != (2 * d, d):
            raise DimensionMismatchError(
                f"jump table shape {arr.shape} does not match dimension {d}"
            )
        object.__setattr__(self, "displacements", arr)

    @classmethod
    def from_map(cls, entries: dict, dimension: int | None = None) -> "JumpFunction":
        """Build from {tau: displacement}; every label of I_pm must appear."""
        if dimension is None:
            dimension = max(abs(int(t)) for t in entries)
        d = dimension
        arr = np.zeros((2 * d, d), dtype=np.int64)
        seen = set()
        for tau, disp in entries.items():
            tau = int(tau)
            site = _as_site(disp, d)
            arr[label_index(tau, d)] = site
            seen.add(tau)
        missing = set(coin_labels(d)) - seen
        if missing:
            raise ValidationError(f"jump function missing labels {sorted(missing)}")
        return cls(arr, d)

    @classmethod
    def standard(cls, d: int = 1) -> "JumpFunction":
        """r(+-j) = +-e_j, the nearest-neighbour jump table."""
        arr = np.vstack([np.eye(d, dtype=np.int64), -np.eye(d, dtype=np.int64)])
        return cls(arr, d)

    def vector(self, tau: int) -> np.ndarray:
        return self.displacements[label_index(tau, self.dimension)]

    @property
    def range_bound(self) -> int:
        """rho = max_tau max_j |r(tau)_j|."""
        return int(np.abs(self.displacements).max())

    @property
    def drift(self) -> np.ndarray:
        """Ballistic velocity (1/2d) sum_tau r(tau), independent of the coins."""
        return self.displacements.mean(axis=0)

    def phase_diag(self, y) -> np.ndarray:
        """Diagonal of d(y): entries e^{i y.r(tau)} in label order."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.exp(1j * (self.displacements @ y))


@dataclass(frozen=True)
class Coin:
    """A unitary 2d x 2d matrix acting on the internal state."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2:
            raise ValidationError(f"coin matrix shape {mat.shape} is not 2d x 2d")
        dev = np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])).max()
        if dev > UNITARITY_TOL:
            raise ValidationError(f"coin is not unitary (deviation {dev:.3e})")
        object.__setattr__(self, "matrix", mat)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0] // 2

    @classmethod
    def identity(cls, d: int = 1) -> "Coin":
        return cls(np.eye(2 * d))


def _check_dims(coin: Coin, jump: JumpFunction) -> int:
    if coin.dimension != jump.dimension:
        raise DimensionMismatchError(
            f"coin dimension {coin.dimension} != jump dimension {jump.dimension}"
        )
    return jump.dimension


@dataclass
class WalkState:
    """Finitely supported internal-state field over Z^d.

    ``amplitudes`` has shape (2d, n_1, ..., n_d); ``origin`` is the lattice
    coordinate of box index (0, ..., 0).  Sites outside the box carry no
    amplitude.  Amplitudes inside the box are kept exactly, however small.
    """

    amplitudes: np.ndarray
    origin: np.ndarray
    dimension: int

    @classmethod
    def point(cls, phi0, site=None, d: int | None = None) -> "WalkState":
        """Walker at a single site with internal state phi0."""
        phi0 = np.asarray(phi0, dtype=np.complex128)
        if d is None:
            d = phi0.shape[0] // 2
        if phi0.shape != (2 * d,):
            raise DimensionMismatchError("internal state must have 2d components")
        site = (0,) * d if site is None else _as_site(site, d)
        amp = phi0.reshape((2 * d,) + (1,) * d)
        return cls(amp.copy(), np.asarray(site, dtype=np.int64), d)

    @classmethod
    def from_map(cls, entries: dict, d: int) -> "WalkState":
        """Build from {site: internal vector}."""
        sites = [_as_site(x, d) for x in entries]
        lo = np.min(sites, axis=0)
        hi = np.max(sites, axis=0)
        shape = (2 * d,) + tuple(int(h - l + 1) for l, h in zip(lo, hi))
        amp = np.zeros(shape, dtype=np.complex128)
        for x, vec in entries.items():
            site = _as_site(x, d)
            vec = np.asarray(vec, dtype=np.complex128)
            if vec.shape != (2 * d,):
                raise DimensionMismatchError("internal vectors must have 2d components")
            idx = tuple(int(c - l) for c, l in zip(site, lo))
            amp[(slice(None),) + idx] = vec
        return cls(amp, np.asarray(lo, dtype=np.int64), d)

    def norm(self) -> float:
        return float(np.sqrt((np.abs(self.amplitudes) ** 2).sum()))

    def site_amplitude(self, x) -> np.ndarray:
        """Internal vector at site x (zeros outside the box)."""
        site = _as_site(x, self.dimension)
        idx = np.asarray(site) - self.origin
        shape = self.amplitudes.shape[1:]
        if np.any(idx < 0) or np.any(idx >= shape):
            return np.zeros(2 * self.dimension, dtype=np.complex128)
        return self.amplitudes[(slice(None),) + tuple(int(i) for i in idx)]

    def to_map(self, tol: float = 0.0) -> dict:
        """Dict {site: internal vector} over sites with any amplitude > tol."""
        out = {}
        flat = self.amplitudes.reshape(self.amplitudes.shape[0], -1)
        mags = np.abs(flat).max(axis=0)
        shape = self.amplitudes.shape[1:]
        for flat_idx in np.nonzero(mags > tol)[0]:
            idx = np.unravel_index(flat_idx, shape)
            site = tuple(int(i + o) for i, o in zip(idx, self.origin))
            out[site if self.dimension > 1 else site[0]] = flat[:, flat_idx].copy()
        return out


def apply_step(state: WalkState, coin: Coin, jump: JumpFunction) -> WalkState:
    """One step: coin update followed by the conditional shift.

    Returns S (C tensor I) applied to ``state``.  The support box grows by
    at most the jump range in each coordinate and the norm is preserved.
    """
    d = _check_dims(coin, jump)
    if state.dimension != d:
        raise DimensionMismatchError("state dimension does not match coin/jump")
    disp = jump.displacements
    lo_shift = disp.min(axis=0)
    hi_shift = disp.max(axis=0)
    old_shape = state.amplitudes.shape[1:]
    new_shape = tuple(int(s + h - l) for s, l, h in zip(old_shape, lo_shift, hi_shift))
    new = np.zeros((2 * d,) + new_shape, dtype=np.complex128)
    updated = np.tensordot(coin.matrix, state.amplitudes, axes=(1, 0))
    for t in range(2 * d):
        off = disp[t] - lo_shift
        sl = tuple(slice(int(o), int(o + s)) for o, s in zip(off, old_shape))
        new[(t,) + sl] += updated[t]
    return WalkState(new, state.origin + lo_shift, d)


def evolve(state0: WalkState, coins, jump: JumpFunction) -> WalkState:
    """Apply a sequence of coins left to right (the first coin acts first)."""
    state = state0
    for coin in coins:
        state = apply_step(state, coin, jump)
    return state


@dataclass
class LatticeDistribution:
    """Probability weights over a finite box of lattice sites."""

    weights: np.ndarray
    origin: np.ndarray
    dimension: int

    def total(self) -> float:
        return float(self.weights.sum())

    def probability(self, x) -> float:
        site = _as_site(x, self.dimension)
        idx = np.asarray(site) - self.origin
        if np.any(idx < 0) or np.any(idx >= self.weights.shape):
            return 0.0
        return float(self.weights[tuple(int(i) for i in idx)])

    def to_map(self, tol: float = 0.0) -> dict:
        out = {}
        for idx in np.argwhere(self.weights > tol):
            site = tuple(int(i + o) for i, o in zip(idx, self.origin))
            out[site if self.dimension > 1 else site[0]] = float(self.weights[tuple(idx)])
        return out

    def site_grid(self) -> np.ndarray:
        """Array of shape (*box, d) holding the lattice coordinate of each cell."""
        axes = [np.arange(s) + o for s, o in zip(self.weights.shape, self.origin)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @classmethod
    def from_map(cls, entries: dict, d: int) -> "LatticeDistribution":
        sites = [_as_site(x, d) for x in entries]
        lo = np.min(sites, axis=0)
        hi = np.max(sites, axis=0)
        w = np.zeros(tuple(int(h - l + 1) for l, h in zip(lo, hi)))
        for x, p in entries.items():
            site = _as_site(x, d)
            w[tuple(int(c - l) for c, l in zip(site, lo))] = p
        return cls(w, np.asarray(lo, dtype=np.int64), d)


def position_distribution(state: WalkState) -> LatticeDistribution:
    """W_k = squared norm of the internal vector at site k."""
    w = (np.abs(state.amplitudes) ** 2).sum(axis=0)
    return LatticeDistribution(w, state.origin.copy(), state.dimension)


def characteristic_function(dist: LatticeDistribution, y) -> complex:
    """Phi(y) = sum_k W_k e^{i y.k} on the torus."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    phases = np.exp(1j * (dist.site_grid() @ y))
    return complex((dist.weights * phases).sum())


def moments(dist: LatticeDistribution, s, center=None) -> float:
    """Mixed moment E((X - c)_1^{s_1} ... (X - c)_d^{s_d}) of the distribution.

    ``s`` is a multi-index (an int for d = 1); ``center`` defaults to 0.
    """
    d = dist.dimension
    if np.isscalar(s):
        s = (int(s),)
    if len(s) != d:
        raise DimensionMismatchError("multi-index length must equal the dimension")
    grid = dist.site_grid().astype(float)
    if center is not None:
        grid = grid - np.atleast_1d(np.asarray(center, dtype=float))
    mono = np.ones(dist.weights.shape)
    for j, sj in enumerate(s):
        if sj:
            mono = mono * grid[..., j] ** int(sj)
    return float((dist.weights * mono).sum())


def jk_matrices(coins, jump: JumpFunction) -> dict:
    """Site-resolved evolution blocks after the given coin sequence.

    Returns {k: J_k(n)} where J_k(n) collects every n-step path from the
    origin to k; evolving any phi0 from the origin and reading site k gives
    J_k(n) phi0, and sum_k J_k* J_k = identity.  Computed by dynamic
    programming over sites, never by path enumeration.
    """
    coins = list(coins)
    if not coins:
        raise ValidationError("jk_matrices requires at least one step")
    d = _check_dims(coins[0], jump)
    n2 = 2 * d
    disp = jump.displacements
    lo_shift = disp.min(axis=0)
    hi_shift = disp.max(axis=0)
    blocks = np.eye(n2, dtype=np.complex128).reshape((1,) * d + (n2, n2))
    origin = np.zeros(d, dtype=np.int64)
    for coin in coins:
        _check_dims(coin, jump)
        old_shape = blocks.shape[:d]
        new_shape = tuple(int(s + h - l) for s, l, h in zip(old_shape, lo_shift, hi_shift))
        new = np.zeros(new_shape + (n2, n2), dtype=np.complex128)
        updated = np.einsum("ts,...su->...tu", coin.matrix, blocks)
        for t in range(n2):
            off = disp[t] - lo_shift
            sl = tuple(slice(int(o), int(o + s)) for o, s in zip(off, old_shape))
            new[sl + (t, slice(None))] += updated[..., t, :]
        blocks = new
        origin = origin + lo_shift
    out = {}
    box = blocks.shape[:d]
    for idx in itertools.product(*(range(s) for s in box)):
        mat = blocks[idx]
        if np.any(mat != 0):
            site = tuple(int(i + o) for i, o in zip(idx, origin))
            out[site if d > 1 else site[0]] = mat
    return out


def fourier_jn(coins, jump: JumpFunction, y) -> np.ndarray:
    """Fourier transform of the site-resolved blocks: d(y)C_n ... d(y)C_1."""
    coins = list(coins)
    d = jump.dimension
    phases = jump.phase_diag(y)
    out = np.eye(2 * d, dtype=np.complex128)
    for coin in coins:
        _check_dims(coin, jump)
        out = phases[:, None] * (coin.matrix @ out)
    return out


def char_function_via_fourier(coins, jump: JumpFunction, phi0, y, v_points: int | None = None) -> complex:
    """Characteristic function evaluated from the Fourier blocks alone.

    Integrates Tr(J*(-v) J(y-v) |phi0><phi0|) over the torus with a uniform
    grid; exact once v_points >= 2*rho*n + 1 per dimension (the integrand is
    a trigonometric polynomial).
    """
    coins = list(coins)
    d = jump.dimension
    phi0 = np.asarray(phi0, dtype=np.complex128)
    n = len(coins)
    if v_points is None:
        v_points = 2 * jump.range_bound * n + 1
    y = np.atleast_1d(np.asarray(y, dtype=float))
    nodes = 2.0 * np.pi * np.arange(v_points) / v_points
    acc = 0.0 + 0.0j
    for vtuple in itertools.product(nodes, repeat=d):
        v = np.asarray(vtuple)
        left = fourier_jn(coins, jump, -v) @ phi0
        right = fourier_jn(coins, jump, y - v) @ phi0
        acc += np.vdot(left, right)
    return complex(acc / v_points**d)


@dataclass
class DensityKernel:
    """Finitely supported density-matrix kernel rho(x, y).

    ``entries`` maps ordered site pairs to 2d x 2d blocks.  Validation
    enforces the Hermitian pair symmetry rho(x, y) = rho(y, x)*, positive
    semidefinite diagonal blocks and unit trace.
    """

    entries: dict
    dimension: int
    _sites: list = field(init=False, repr=False)

    def __post_init__(self):
        d = self.dimension
        norm_entries = {}
        for (x, y), block in self.entries.items():
            block = np.asarray(block, dtype=np.complex128)
            if block.shape != (2 * d, 2 * d):
                raise ValidationError("kernel blocks must be 2d x 2d")
            norm_entries[(_as_site(x, d), _as_site(y, d))] = block
        for (x, y), block in norm_entries.items():
            partner = norm_entries.get((y, x))
            if partner is None or np.abs(partner - block.conj().T).max() > KERNEL_TOL:
                raise ValidationError(f"kernel is not Hermitian at pair ({x}, {y})")
        trace = 0.0
        for (x, y), block in norm_entries.items():
            if x == y:
                if np.linalg.eigvalsh((block + block.conj().T) / 2).min() < -KERNEL_TOL:
                    raise ValidationError(f"diagonal block at {x} is not PSD")
                trace += block.trace().real
        if abs(trace - 1.0) > KERNEL_TOL:
            raise ValidationError(f"kernel trace {trace} != 1")
        self.entries = norm_entries
        sites = sorted({x for x, _ in norm_entries} | {y for _, y in norm_entries})
        self._sites = sites

    @classmethod
    def pure(cls, phi0, site=None, d: int | None = None) -> "DensityKernel":
        """Rank-one kernel |phi0 x site><phi0 x site|."""
        phi0 = np.asarray(phi0, dtype=np.complex128)
        if d is None:
            d = phi0.shape[0] // 2
        site = (0,) * d if site is None else _as_site(site, d)
        return cls({(site, site): np.outer(phi0, phi0.conj())}, d)

    @classmethod
    def mixture(cls, kernels, weights) -> "DensityKernel":
        """Convex combination of kernels."""
        weights = np.asarray(weights, dtype=float)
        if weights.min() < 0 or abs(weights.sum() - 1.0) > KERNEL_TOL:
            raise ValidationError("mixture weights must be a probability vector")
        d = kernels[0].dimension
        entries: dict = {}
        for k, w in zip(kernels, weights):
            for pair, block in k.entries.items():
                entries[pair] = entries.get(pair, 0) + w * block
        return cls(entries, d)

    def eigenstates(self, tol: float = 1e-14):
        """Spectral decomposition as (weight, WalkState) pairs."""
        d = self.dimension
        sites = self._sites
        m = len(sites)
        pos = {x: i for i, x in enumerate(sites)}
        big = np.zeros((m * 2 * d, m * 2 * d), dtype=np.complex128)
        for (x, y), block in self.entries.items():
            i, j = pos[x], pos[y]
            big[i * 2 * d:(i + 1) * 2 * d, j * 2 * d:(j + 1) * 2 * d] = block
        vals, vecs = np.linalg.eigh((big + big.conj().T) / 2)
        out = []
        for lam, vec in zip(vals, vecs.T):
            if lam <= tol:
                continue
            amp = {x: vec[i * 2 * d:(i + 1) * 2 * d] for x, i in pos.items()}
            out.append((float(lam), WalkState.from_map(amp, d)))
        return out

    def fourier_vector(self, y, yp) -> np.ndarray:
        """Doubled-space vector of the kernel's Fourier transform at (y, y').

        Component (tau, tau') is sum_{k,k'} e^{i(y.k + y'.k')} rho(k, k')
        read off as <tau| . |tau'>, flattened in row-major label order.
        """
        d = self.dimension
        y = np.atleast_1d(np.asarray(y, dtype=float))
        yp = np.atleast_1d(np.asarray(yp, dtype=float))
        R = np.zeros((2 * d, 2 * d), dtype=np.complex128)
        for (x, xp), block in self.entries.items():
            phase = np.exp(1j * (np.dot(y, x) + np.dot(yp, xp)))
            R += phase * block
        return R.reshape(-1)


def density_distribution(rho0: DensityKernel, coins, jump: JumpFunction,
                         support_limit: int = 10**7) -> LatticeDistribution:
    """Position distribution of an evolved density kernel.

    Decomposes the kernel spectrally and evolves each eigenvector as a pure
    state; the result is the weighted mixture of the pure distributions.
    """
    coins = list(coins)
    d = jump.dimension
    rho = jump.range_bound
    span = max(abs(c) for x in rho0._sites for c in x) + rho * len(coins)
    if (2 * span + 1) ** d > support_limit:
        raise SupportGuardError("evolved kernel support exceeds the guard")
    pieces = []
    for lam, state in rho0.eigenstates():
        dist = position_distribution(evolve(state, coins, jump))
        pieces.append((lam, dist))
    if not pieces:
        raise ValidationError("kernel has no positive spectral weight")
    los = np.array([p.origin for _, p in pieces])
    his = np.array([p.origin + p.weights.shape for _, p in pieces])
    lo, hi = los.min(axis=0), his.max(axis=0)
    w = np.zeros(tuple(int(h - l) for l, h in zip(lo, hi)))
    for lam, p in pieces:
        off = p.origin - lo
        sl = tuple(slice(int(o), int(o + s)) for o, s in zip(off, p.weights.shape))
        w[sl] += lam * p.weights
    return LatticeDistribution(w, lo.astype(np.int64), d)


def norm_deviation(state: WalkState) -> float:
    """|norm^2 - 1| of a nominally normalized state."""
    return abs(state.norm() ** 2 - 1.0)


def support_radius(dist: LatticeDistribution, tol: float = 0.0) -> int:
    """Largest max_j |k_j| carrying weight above tol."""
    idx = np.argwhere(dist.weights > tol)
    if idx.size == 0:
        return 0
    sites = idx + dist.origin
    return int(np.abs(sites).max())
