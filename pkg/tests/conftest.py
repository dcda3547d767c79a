"""Shared reference models and closed forms used across the suite."""

import numpy as np
import pytest

from rtqw import Coin, FiniteCoinEnsemble, JumpFunction

SQRT2 = np.sqrt(2.0)


def hadamard() -> Coin:
    return Coin(np.array([[1, 1], [1, -1]]) / SQRT2)


def swap_coin() -> Coin:
    return Coin(np.array([[0, 1], [1, 0]], dtype=float))


def paired_hadamard() -> Coin:
    """Hadamard written with the labels exchanged; the three-coin reference
    ensemble uses this form so its doubled operator matches the closed-form
    matrix entry for entry."""
    return Coin(np.array([[-1, 1], [1, 1]]) / SQRT2)


def three_coin_reference():
    """d=1 ensemble {identity: p/2, swap: p/2, Hadamard: 1-p}, p = 1/sqrt(2)."""
    p = 1.0 / SQRT2
    ens = FiniteCoinEnsemble(
        (Coin.identity(1), swap_coin(), paired_hadamard()),
        np.array([p / 2, p / 2, 1.0 - p]),
    )
    return ens, JumpFunction.standard(1)


def reference_diffusion(v: float) -> float:
    """Closed-form diffusion profile of the three-coin reference model."""
    return (16 - 9 * SQRT2 + 2 * np.cos(2 * v) * (5 - 4 * SQRT2)) / (
        5 * SQRT2 - 4 - 2 * np.cos(2 * v)
    )


def bernoulli_ld_closed_form(p: float, x: float) -> float:
    """Closed-form large-deviation rate of the identity/swap chain, |x| < 1."""
    q = 1.0 - p
    return x * np.arcsinh(q * x / (p * np.sqrt(1 - x * x))) - np.log(
        (q + np.sqrt(p * p + x * x * (q - p))) / np.sqrt(1 - x * x)
    )


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def two_coin_corpus():
    """Small bank of 2-coin d=1 ensembles used by the enumeration oracle."""
    rng = np.random.default_rng(42)
    corpus = [
        FiniteCoinEnsemble((hadamard(), Coin.identity(1)), np.array([0.5, 0.5])),
        FiniteCoinEnsemble((hadamard(), swap_coin()), np.array([0.3, 0.7])),
        FiniteCoinEnsemble(
            (Coin(random_unitary(2, rng)), Coin(random_unitary(2, rng))),
            np.array([0.35, 0.65]),
        ),
        FiniteCoinEnsemble(
            (Coin(random_unitary(2, rng)), Coin(random_unitary(2, rng))),
            np.array([0.8, 0.2]),
        ),
    ]
    return corpus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
