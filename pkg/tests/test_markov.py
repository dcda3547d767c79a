"""markov module: block operators for Markov-distributed coins."""

import numpy as np
import pytest

from rtqw import (
    Coin,
    FiniteCoinEnsemble,
    JumpFunction,
    MarkovCoinProcess,
    WalkState,
    averaged_char_function,
    averaged_char_markov,
    averaged_model,
    block_initial,
    block_operator,
    characteristic_function,
    check_assumption_s2,
    chi_p,
    diffusion_matrix,
    enumerate_sequences,
    evolve,
    make_permutation_coin,
    markov_averaged_diffusion,
    markov_diffusion,
    markov_model,
    position_distribution,
    psi1_vector,
)
from rtqw.ensembles import PermutationCoinSpec
from rtqw.errors import ValidationError
from rtqw.markov import blockmax_norm, perron_projector

from conftest import hadamard, random_unitary, three_coin_reference

JUMP1 = JumpFunction.standard(1)


def rotation_coin(theta: float) -> Coin:
    return Coin(np.array([[np.cos(theta), np.sin(theta)],
                          [-np.sin(theta), np.cos(theta)]]))


def two_coin_process(transition=None):
    """Hadamard/rotation pair: a genuinely Markov process with a healthy
    spectral gap (~0.32), so diffusion tolerances are meaningful."""
    coins = (hadamard(), rotation_coin(0.7))
    P = np.array([[0.7, 0.3], [0.45, 0.55]]) if transition is None else transition
    return MarkovCoinProcess(coins, P, np.array([0.5, 0.5]))


def random_process(rng):
    """Haar-ish coins; fine for algebraic identities, gap not controlled."""
    coins = (Coin(random_unitary(2, rng)), Coin(random_unitary(2, rng)))
    return MarkovCoinProcess(coins, np.array([[0.7, 0.3], [0.45, 0.55]]),
                             np.array([0.5, 0.5]))


class TestChiP:
    def test_doubly_stochastic_uniform(self):
        P = np.array([[0.7, 0.3], [0.3, 0.7]])
        np.testing.assert_allclose(chi_p(P), [0.5, 0.5], atol=1e-12)

    def test_rank_one_rows_give_the_law(self):
        mu = np.array([0.2, 0.5, 0.3])
        P = np.tile(mu, (3, 1))
        np.testing.assert_allclose(chi_p(P), mu, atol=1e-12)

    def test_residual(self):
        P = np.array([[0.6, 0.4], [0.15, 0.85]])
        v = chi_p(P)
        assert np.abs(P.T @ v - v).max() < 1e-12
        assert v.sum() == pytest.approx(1.0)

    def test_reducible_rejected(self):
        with pytest.raises(ValidationError):
            chi_p(np.eye(2))


class TestBlockOperator:
    def test_path_enumeration_identity(self, rng):
        proc = random_process(rng)
        y, yp = 0.41, -0.13
        n = 4
        # expectation of the transfer product over all weighted paths
        mats = []
        for coin in proc.coins:
            V = np.kron(coin.matrix, coin.matrix.conj())
            from rtqw.spectral import m_matrix
            mats.append(m_matrix(V, (y, yp), JUMP1))
        acc = np.zeros((4, 4), dtype=complex)
        for seq, pr in enumerate_sequences(proc, n):
            prod = np.eye(4, dtype=complex)
            for k in seq:
                prod = mats[k] @ prod
            acc += pr * prod
        B = block_operator(proc, (y, yp), JUMP1)
        B0 = block_initial(proc, (y, yp), JUMP1)
        top = np.linalg.matrix_power(B, n - 1) @ B0
        summed = sum(top[j * 4:(j + 1) * 4] for j in range(2))
        np.testing.assert_allclose(summed, acc, atol=1e-13)

    def test_fixed_vectors(self, rng):
        proc = random_process(rng)
        v = 0.9
        B = block_operator(proc, (-v, v), JUMP1)
        left = np.kron(np.ones(2), psi1_vector(1))
        right = np.kron(chi_p(proc.transition), psi1_vector(1))
        np.testing.assert_allclose(B.conj().T @ left, left, atol=1e-12)
        np.testing.assert_allclose(B @ right, right, atol=1e-12)

    def test_spectral_radius_bound(self, rng):
        proc = random_process(rng)
        for Y in [(0.3, 1.1), (2.0, -0.4)]:
            B = block_operator(proc, Y, JUMP1)
            assert np.abs(np.linalg.eigvals(B)).max() <= 1 + 1e-10

    def test_blockmax_contraction(self, rng):
        proc = random_process(rng)
        B = block_operator(proc, (0.7, 0.2), JUMP1)
        for _ in range(10):
            x = rng.normal(size=8) + 1j * rng.normal(size=8)
            lhs = blockmax_norm(B.conj().T @ x, 2)
            rhs = blockmax_norm(x, 2)
            assert lhs <= rhs + 1e-12

    def test_perron_projector_idempotent(self, rng):
        proc = random_process(rng)
        proj = perron_projector(proc, 1)
        np.testing.assert_allclose(proj @ proj, proj, atol=1e-12)


class TestCharFunction:
    def test_normalized_at_zero(self, rng):
        proc = random_process(rng)
        model = markov_model(proc, JUMP1)
        phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi0 /= np.linalg.norm(phi0)
        for n in (1, 3, 9):
            assert averaged_char_markov(model, 0.0, n, phi0) == pytest.approx(1.0, abs=1e-12)

    def test_iid_embedding_reduces(self, rng):
        ens = FiniteCoinEnsemble(
            (Coin(random_unitary(2, rng)), Coin(random_unitary(2, rng))),
            np.array([0.35, 0.65]))
        proc = MarkovCoinProcess.iid_embedding(ens)
        mk = markov_model(proc, JUMP1)
        am = averaged_model(ens, JUMP1)
        phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi0 /= np.linalg.norm(phi0)
        for n in (1, 5, 12, 20):
            for y in (0.3, 1.4, 2.9):
                a = averaged_char_markov(mk, y, n, phi0)
                b = averaged_char_function(am, y, n, phi0)
                assert abs(a - b) < 1e-12

    def test_matches_path_enumeration(self, rng):
        proc = random_process(rng)
        model = markov_model(proc, JUMP1)
        phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi0 /= np.linalg.norm(phi0)
        state0 = WalkState.point(phi0)
        for n in (1, 3, 5):
            for y in (0.7, 2.1):
                acc = 0.0 + 0.0j
                for seq, pr in enumerate_sequences(proc, n):
                    dist = position_distribution(
                        evolve(state0, [proc.coins[i] for i in seq], JUMP1))
                    acc += pr * characteristic_function(dist, y)
                got = averaged_char_markov(model, y, n, phi0)
                assert abs(got - acc) < 1e-12


class TestAssumptionS2:
    def test_iid_embedding_passes(self, rng):
        ens, jump = three_coin_reference()
        proc = MarkovCoinProcess.iid_embedding(ens)
        rep = check_assumption_s2(markov_model(proc, jump), v_points=64)
        assert rep.holds
        assert rep.gap > 0.1

    def test_frozen_unitary_coin_fails(self):
        proc = MarkovCoinProcess((hadamard(),), np.eye(1), np.array([1.0]))
        rep = check_assumption_s2(markov_model(proc, JUMP1), v_points=32)
        assert not rep.holds
        assert rep.full_degeneracy >= 2

    def test_gap_stable_under_grid_refinement(self, rng):
        proc = two_coin_process()
        model = markov_model(proc, JUMP1)
        a = check_assumption_s2(model, v_points=64)
        b = check_assumption_s2(model, v_points=128)
        assert abs(a.gap - b.gap) < 1e-6


class TestMarkovDiffusion:
    def test_iid_embedding_matches(self, rng):
        ens, jump = three_coin_reference()
        proc = MarkovCoinProcess.iid_embedding(ens)
        mk = markov_model(proc, jump)
        am = averaged_model(ens, jump)
        for v in (0.0, 0.8, 2.2):
            a = markov_diffusion(mk, v)
            b = diffusion_matrix(am, v)
            assert np.abs(a - b).max() < 1e-9

    def test_methods_agree(self):
        proc = two_coin_process()
        model = markov_model(proc, JUMP1)
        for v in (0.2, 1.5):
            a = markov_diffusion(model, v, "resolvent")
            b = markov_diffusion(model, v, "hessian")
            assert np.abs(a - b).max() < 1e-6

    def test_drift_term_ignores_transition_matrix(self):
        jump = JumpFunction.from_map({1: 1, -1: 0}, 1)
        proc = two_coin_process()
        model = markov_model(proc, jump)
        # markov_diffusion validates internally that the first-order
        # coefficient equals the drift (1/2d) sum r(tau) = 0.5
        D = markov_diffusion(model, 0.6)
        assert D.shape == (1, 1)

    def test_permutation_markov_process_matches_lifted_chain(self):
        # coins {identity, swap} driven by a 2-state chain: the pair
        # (coin state, label) is itself Markov; compare Var(S_n) increments
        # from exact dynamic programming against the spectral diffusion
        ident = make_permutation_coin(PermutationCoinSpec.from_cycles(1, {}))
        swap = make_permutation_coin(PermutationCoinSpec.from_cycles(1, {1: -1, -1: 1}))
        Pc = np.array([[0.6, 0.4], [0.25, 0.75]])
        proc = MarkovCoinProcess((ident, swap), Pc, chi_p(Pc))
        model = markov_model(proc, JUMP1)
        D = markov_averaged_diffusion(model, grid_size=8)
        # lifted chain over (coin, label): exact second-moment increments
        perms = [np.array([0, 1]), np.array([1, 0])]
        jumps = np.array([1.0, -1.0])
        K = 220
        side = 2 * K + 1
        w = np.zeros((2, 2, side))
        for f in range(2):
            for t in range(2):
                w[f, t, K] = chi_p(Pc)[f] * 0.5
        variances = {}
        for step in range(1, K + 1):
            new = np.zeros_like(w)
            for f in range(2):
                for g in range(2):
                    pr = Pc[f, g]
                    if pr == 0:
                        continue
                    for t in range(2):
                        t2 = perms[g][t]
                        sh = int(jumps[t2])
                        src = slice(max(0, -sh), side - max(0, sh))
                        dst = slice(max(0, sh), side - max(0, -sh))
                        new[g, t2, dst] += pr * w[f, t, src]
            w = new
            if step in (K - 1, K):
                law = w.sum(axis=(0, 1))
                ks = np.arange(-K, K + 1, dtype=float)
                variances[step] = float((law * ks**2).sum()) - float((law * ks).sum()) ** 2
        increment = variances[K] - variances[K - 1]
        assert abs(D[0, 0] - increment) < 1e-9

    def test_markov_diffusion_v_dependence_integrates(self):
        proc = two_coin_process()
        model = markov_model(proc, JUMP1)
        a = markov_averaged_diffusion(model, 32)
        b = markov_averaged_diffusion(model, 64)
        assert np.abs(a - b).max() < 1e-10
