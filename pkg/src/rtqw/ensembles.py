"""Coin-matrix distributions: finite i.i.d. ensembles, permutation-phase
coins, and Markov processes over a finite coin set.

Sampling is backed by counter-based Philox streams keyed on (seed, stream
index), so identical keys reproduce identical sequences regardless of how
calls are scheduled across workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EnumerationGuardError, ValidationError
from .walk import Coin, coin_labels, label_index

PROB_TOL = 1e-12
_MASK64 = (1 << 64) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN64) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class SeededStream:
    """Reproducible random stream keyed by (seed, stream index)."""

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=(self.seed & _MASK64, self.index & _MASK64))
        )

    def child(self, k: int) -> "SeededStream":
        """Derived stream; distinct k values give decorrelated streams."""
        return SeededStream(self.seed, _splitmix64(self.index ^ ((k + 1) * _GOLDEN64)))


def _check_probs(probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise ValidationError("probabilities must form a nonempty vector")
    if probs.min() < 0:
        raise ValidationError("probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > PROB_TOL:
        raise ValidationError(f"probabilities sum to {probs.sum()}, not 1")
    return probs


@dataclass(frozen=True)
class FiniteCoinEnsemble:
    """I.i.d. draws from a finite set of unitary coins."""

    coins: tuple
    probs: np.ndarray

    def __post_init__(self):
        coins = tuple(self.coins)
        if not coins:
            raise ValidationError("ensemble needs at least one coin")
        probs = _check_probs(self.probs)
        if len(coins) != probs.size:
            raise ValidationError("coins and probabilities have different lengths")
        d = coins[0].dimension
        for c in coins:
            if c.dimension != d:
                raise DimensionMismatchError("all coins must share one dimension")
        object.__setattr__(self, "coins", coins)
        object.__setattr__(self, "probs", probs)

    @property
    def dimension(self) -> int:
        return self.coins[0].dimension

    def __len__(self) -> int:
        return len(self.coins)


@dataclass(frozen=True)
class PermutationCoinSpec:
    """A permutation of I_pm together with one phase per label.

    The coin C(pi, Theta) has entries e^{i theta_sigma} delta(sigma, pi(tau));
    equivalently Delta(Theta) C(pi) with C(pi) the permutation matrix.
    """

    permutation: dict
    phases: np.ndarray
    dimension: int

    def __post_init__(self):
        d = self.dimension
        labels = coin_labels(d)
        perm = {int(k): int(v) for k, v in self.permutation.items()}
        if sorted(perm) != sorted(labels) or sorted(perm.values()) != sorted(labels):
            raise ValidationError("permutation must be a bijection of I_pm")
        phases = np.zeros(2 * d) if self.phases is None else np.asarray(self.phases, dtype=float)
        if phases.shape != (2 * d,):
            raise ValidationError("need one phase per internal label")
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "phases", phases)

    @classmethod
    def from_cycles(cls, d: int, mapping: dict | None = None, phases=None) -> "PermutationCoinSpec":
        mapping = dict(mapping or {})
        full = {t: mapping.get(t, t) for t in coin_labels(d)}
        return cls(full, phases if phases is not None else np.zeros(2 * d), d)

    def permutation_array(self) -> np.ndarray:
        """pi as an index map: entry i is label_index(pi(label_i))."""
        d = self.dimension
        out = np.zeros(2 * d, dtype=np.int64)
        for tau, sigma in self.permutation.items():
            out[label_index(tau, d)] = label_index(sigma, d)
        return out


def make_permutation_coin(spec: PermutationCoinSpec) -> Coin:
    """Unitary coin with entries e^{i theta_sigma} delta(sigma, pi(tau))."""
    d = spec.dimension
    mat = np.zeros((2 * d, 2 * d), dtype=np.complex128)
    for tau, sigma in spec.permutation.items():
        i, j = label_index(sigma, d), label_index(tau, d)
        mat[i, j] = np.exp(1j * spec.phases[i])
    return Coin(mat)


def permutation_spec_from_coin(coin: Coin, tol: float = 1e-12) -> PermutationCoinSpec:
    """Recognize a permutation-phase coin; raises if the matrix has any
    other structure."""
    d = coin.dimension
    labels = coin_labels(d)
    perm = {}
    phases = np.zeros(2 * d)
    for j, tau in enumerate(labels):
        col = coin.matrix[:, j]
        nz = np.nonzero(np.abs(col) > tol)[0]
        if nz.size != 1 or abs(abs(col[nz[0]]) - 1.0) > tol:
            raise ValidationError("coin is not a permutation-phase matrix")
        perm[tau] = labels[nz[0]]
        phases[nz[0]] = float(np.angle(col[nz[0]]))
    return PermutationCoinSpec(perm, phases, d)


@dataclass(frozen=True)
class PermutationEnsemble:
    """I.i.d. draws over permutation-phase coins."""

    specs: tuple
    probs: np.ndarray

    def __post_init__(self):
        specs = tuple(self.specs)
        probs = _check_probs(self.probs)
        if len(specs) != probs.size:
            raise ValidationError("specs and probabilities have different lengths")
        d = specs[0].dimension
        if any(s.dimension != d for s in specs):
            raise DimensionMismatchError("all specs must share one dimension")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "probs", probs)

    @property
    def dimension(self) -> int:
        return self.specs[0].dimension

    def to_coin_ensemble(self) -> FiniteCoinEnsemble:
        return FiniteCoinEnsemble(tuple(make_permutation_coin(s) for s in self.specs), self.probs)


def bernoulli_identity_swap(p: float, phases_id=None, phases_swap=None) -> PermutationEnsemble:
    """d = 1 ensemble: identity with probability p, label swap with 1 - p."""
    ident = PermutationCoinSpec.from_cycles(1, {}, phases_id)
    swap = PermutationCoinSpec.from_cycles(1, {1: -1, -1: 1}, phases_swap)
    return PermutationEnsemble((ident, swap), np.array([p, 1.0 - p]))


@dataclass(frozen=True)
class PermutationMeasure:
    """Probability measure on permutations of I_pm (phases discarded)."""

    atoms: tuple          # tuples of label_index images, hashable
    probs: np.ndarray
    dimension: int

    def items(self):
        return zip(self.atoms, self.probs)


def marginal_permutation_measure(ensemble) -> PermutationMeasure:
    """Forget phases and merge equal permutations.

    Accepts a PermutationEnsemble or any FiniteCoinEnsemble whose atoms are
    permutation-phase coins (anything else raises).
    """
    if isinstance(ensemble, PermutationEnsemble):
        specs, probs = ensemble.specs, ensemble.probs
    else:
        specs = tuple(permutation_spec_from_coin(c) for c in ensemble.coins)
        probs = ensemble.probs
    d = specs[0].dimension
    merged: dict = {}
    for spec, p in zip(specs, probs):
        key = tuple(spec.permutation_array())
        merged[key] = merged.get(key, 0.0) + float(p)
    atoms = tuple(sorted(merged))
    return PermutationMeasure(atoms, np.array([merged[a] for a in atoms]), d)


@dataclass(frozen=True)
class MarkovCoinProcess:
    """Coin sequence driven by a finite-state Markov chain.

    ``transition[j, k]`` is the probability of moving from coin j to coin k;
    ``initial`` is the law of the first coin.
    """

    coins: tuple
    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        coins = tuple(self.coins)
        P = np.asarray(self.transition, dtype=float)
        p0 = _check_probs(self.initial)
        F = len(coins)
        if P.shape != (F, F):
            raise ValidationError(f"transition matrix shape {P.shape} != ({F}, {F})")
        if P.min() < 0 or np.abs(P.sum(axis=1) - 1.0).max() > PROB_TOL:
            raise ValidationError("transition matrix rows must be probability vectors")
        if p0.size != F:
            raise ValidationError("initial law length must match the coin count")
        d = coins[0].dimension
        if any(c.dimension != d for c in coins):
            raise DimensionMismatchError("all coins must share one dimension")
        object.__setattr__(self, "coins", coins)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial", p0)

    @property
    def dimension(self) -> int:
        return self.coins[0].dimension

    @classmethod
    def iid_embedding(cls, ensemble: FiniteCoinEnsemble) -> "MarkovCoinProcess":
        """Rank-one chain (every row equals the i.i.d. law)."""
        F = len(ensemble)
        P = np.tile(ensemble.probs, (F, 1))
        return cls(ensemble.coins, P, ensemble.probs.copy())


def sample_sequence(model, n: int, stream: SeededStream) -> np.ndarray:
    """Sequence of coin indices of length n, deterministic per stream."""
    if n < 0:
        raise ValidationError("sequence length must be nonnegative")
    gen = stream.generator()
    if isinstance(model, PermutationEnsemble):
        model = FiniteCoinEnsemble(tuple(make_permutation_coin(s) for s in model.specs), model.probs)
    if isinstance(model, FiniteCoinEnsemble):
        cum = np.cumsum(model.probs)
        return np.searchsorted(cum, gen.random(n), side="right").astype(np.int64)
    if isinstance(model, MarkovCoinProcess):
        u = gen.random(n)
        out = np.empty(n, dtype=np.int64)
        if n == 0:
            return out
        cum0 = np.cumsum(model.initial)
        cumP = np.cumsum(model.transition, axis=1)
        state = int(np.searchsorted(cum0, u[0], side="right"))
        out[0] = state
        for t in range(1, n):
            state = int(np.searchsorted(cumP[state], u[t], side="right"))
            out[t] = state
        return out
    raise ValidationError(f"cannot sample from {type(model).__name__}")


def sequence_probability(model, seq) -> float:
    """Probability of an index sequence under the model."""
    seq = np.asarray(seq, dtype=int)
    if isinstance(model, PermutationEnsemble):
        probs = model.probs
        return float(np.prod(probs[seq])) if seq.size else 1.0
    if isinstance(model, FiniteCoinEnsemble):
        return float(np.prod(model.probs[seq])) if seq.size else 1.0
    if isinstance(model, MarkovCoinProcess):
        if seq.size == 0:
            return 1.0
        p = float(model.initial[seq[0]])
        for a, b in zip(seq[:-1], seq[1:]):
            p *= float(model.transition[a, b])
        return p
    raise ValidationError(f"cannot evaluate probabilities for {type(model).__name__}")


def enumerate_sequences(model, n: int, guard: int = 10**7):
    """All length-n index sequences with their probabilities.

    Works for i.i.d. ensembles and Markov processes; the total count
    len(coins)**n must stay within ``guard``.
    """
    if isinstance(model, PermutationEnsemble):
        size = len(model.specs)
    elif isinstance(model, FiniteCoinEnsemble):
        size = len(model.coins)
    elif isinstance(model, MarkovCoinProcess):
        size = len(model.coins)
    else:
        raise ValidationError(f"cannot enumerate {type(model).__name__}")
    if size**n > guard:
        raise EnumerationGuardError(f"{size}**{n} sequences exceed the guard {guard}")
    out = []
    for seq in itertools.product(range(size), repeat=n):
        out.append((seq, sequence_probability(model, seq)))
    return out
