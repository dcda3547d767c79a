"""spectral module: doubled operators, assumption checks, diffusion matrices."""

import numpy as np
import pytest

from rtqw import (
    Coin,
    FiniteCoinEnsemble,
    JumpFunction,
    WalkState,
    averaged_char_function,
    averaged_diffusion,
    averaged_distribution,
    averaged_model,
    bernoulli_identity_swap,
    characteristic_function,
    check_assumption,
    cyclic_subspace,
    diffusion_matrix,
    diffusion_report,
    drift,
    einstein_scan,
    enumerate_sequences,
    evolve,
    expected_doubled,
    fourier_jn,
    m_matrix,
    phase_matrix,
    position_distribution,
    psi1_vector,
    reduced_resolvent,
    scaling_limit_probe,
    swap_operator,
)
from rtqw.errors import AssumptionFailedError
from rtqw.spectral import spectral_projector

from conftest import (
    hadamard,
    paired_hadamard,
    random_unitary,
    reference_diffusion,
    swap_coin,
    three_coin_reference,
    two_coin_corpus,
)

JUMP1 = JumpFunction.standard(1)
SQRT2 = np.sqrt(2.0)

# product-basis permutation onto the ordering (-1 -1, 1 1, -1 1, 1 -1)
# used by the closed-form reference matrices (d = 1)
PAIR_PERM = [3, 0, 2, 1]


@pytest.fixture(scope="module")
def reference_model():
    ens, jump = three_coin_reference()
    return averaged_model(ens, jump)


class TestExpectedDoubled:
    def test_single_coin_is_tensor_square(self, rng):
        U = random_unitary(2, rng)
        ens = FiniteCoinEnsemble((Coin(U),), np.array([1.0]))
        np.testing.assert_allclose(expected_doubled(ens), np.kron(U, U.conj()), atol=1e-14)

    def test_reference_matrix_entries(self):
        ens, _ = three_coin_reference()
        p = 1 / SQRT2
        q = 1 - p
        expect = 0.5 * np.array([
            [1, 1, q, q],
            [1, 1, -q, -q],
            [q, -q, p - q, 1],
            [q, -q, 1, p - q],
        ])
        E = expected_doubled(ens)[np.ix_(PAIR_PERM, PAIR_PERM)]
        np.testing.assert_allclose(E, expect, atol=1e-14)

    def test_contraction_and_fixed_vector(self, rng):
        coins = tuple(Coin(random_unitary(2, rng)) for _ in range(3))
        ens = FiniteCoinEnsemble(coins, np.array([0.2, 0.5, 0.3]))
        E = expected_doubled(ens)
        psi = psi1_vector(1)
        assert np.linalg.norm(E, 2) <= 1 + 1e-12
        np.testing.assert_allclose(E @ psi, psi, atol=1e-12)
        np.testing.assert_allclose(E.conj().T @ psi, psi, atol=1e-12)

    def test_swap_conjugation(self, rng):
        coins = tuple(Coin(random_unitary(2, rng)) for _ in range(2))
        ens = FiniteCoinEnsemble(coins, np.array([0.4, 0.6]))
        E = expected_doubled(ens)
        S = swap_operator(1)
        np.testing.assert_allclose(S @ E @ S, E.conj(), atol=1e-12)


class TestPhaseMatrix:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(phase_matrix((0.0, 0.0), JUMP1), np.eye(4))

    def test_reference_diagonal(self):
        v = 0.37
        D = phase_matrix((-v, v), JUMP1)[np.ix_(PAIR_PERM, PAIR_PERM)]
        np.testing.assert_allclose(
            np.diag(D), [1, 1, np.exp(2j * v), np.exp(-2j * v)], atol=1e-14)

    def test_diagonal_factorization(self):
        y, yp = 0.31, -1.2
        lhs = phase_matrix((y, 0.0), JUMP1) @ phase_matrix((0.0, yp), JUMP1)
        np.testing.assert_allclose(lhs, phase_matrix((y, yp), JUMP1), atol=1e-14)


class TestMMatrix:
    def test_zero_frequency_is_doubled_operator(self, reference_model):
        E = reference_model.doubled
        np.testing.assert_allclose(m_matrix(E, (0.0, 0.0), JUMP1), E, atol=1e-14)

    def test_adjoint_fixes_trace_vector(self, reference_model):
        y = 0.3
        M = m_matrix(reference_model.doubled, (y, -y), JUMP1)
        psi = psi1_vector(1)
        np.testing.assert_allclose(M.conj().T @ psi, psi, atol=1e-12)
        np.testing.assert_allclose(M @ psi, psi, atol=1e-12)

    def test_spectrum_conjugation_symmetric(self, reference_model, rng):
        y = float(rng.uniform(0, 2 * np.pi))
        M = m_matrix(reference_model.doubled, (y, -y), JUMP1)
        eigs = np.sort_complex(np.linalg.eigvals(M))
        conj = np.sort_complex(np.linalg.eigvals(M).conj())
        np.testing.assert_allclose(eigs, conj, atol=1e-9)

    def test_spectral_radius_bound(self, reference_model, rng):
        for _ in range(5):
            Y = (rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
            M = m_matrix(reference_model.doubled, Y, JUMP1)
            assert np.abs(np.linalg.eigvals(M)).max() <= 1 + 1e-10


class TestCyclicSubspace:
    def test_permutation_ensemble_diagonal_span(self):
        ens = bernoulli_identity_swap(0.6).to_coin_ensemble()
        sub = cyclic_subspace(expected_doubled(ens), JUMP1)
        assert sub.rank == 2
        # basis spans {|tau x tau>}: off-diagonal pair components vanish
        off = sub.basis[[1, 2], :]
        assert np.abs(off).max() < 1e-12
        assert sub.residual < 1e-10

    def test_reference_model_full_rank(self, reference_model):
        assert reference_model.subspace.rank == 4
        assert reference_model.subspace.residual < 1e-10

    def test_single_hadamard_invariance(self):
        ens = FiniteCoinEnsemble((hadamard(),), np.array([1.0]))
        sub = cyclic_subspace(expected_doubled(ens), JUMP1)
        assert sub.residual < 1e-10
        psi = psi1_vector(1) / np.sqrt(2)
        proj = sub.basis @ (sub.basis.conj().T @ psi)
        np.testing.assert_allclose(proj, psi, atol=1e-10)


class TestAssumptionCheck:
    def test_deterministic_coin_fails_with_degeneracy(self):
        ens = FiniteCoinEnsemble((hadamard(),), np.array([1.0]))
        rep = check_assumption(averaged_model(ens, JUMP1), v_points=64)
        assert not rep.holds
        assert rep.full_degeneracy >= 2
        assert rep.offending

    def test_reference_model_passes(self, reference_model):
        rep = check_assumption(reference_model, v_points=128)
        assert rep.holds
        assert rep.gap > 0.1
        assert rep.degeneracy == 1

    def test_reference_determinant_is_negative(self, reference_model):
        # det(N_v - I) < 0 on the orthogonal complement of the fixed vector
        psi0 = psi1_vector(1) / np.sqrt(2)
        basis = np.linalg.svd(np.eye(4) - np.outer(psi0, psi0))[0][:, :3]
        for v in np.linspace(0, 2 * np.pi, 17):
            M0 = m_matrix(reference_model.doubled, (-v, v), JUMP1)
            N = basis.conj().T @ M0 @ basis
            det = np.linalg.det(N - np.eye(3))
            assert abs(det.imag) < 1e-12
            assert det.real < 0

    def test_bernoulli_chain_passes_on_cyclic_subspace(self):
        ens = bernoulli_identity_swap(0.7).to_coin_ensemble()
        rep = check_assumption(averaged_model(ens, JUMP1), v_points=32)
        assert rep.holds
        assert rep.gap > 0.1


class TestDrift:
    def test_symmetric_jump(self):
        assert drift(JUMP1) == pytest.approx(0.0)

    def test_one_sided_jump(self):
        jump = JumpFunction.from_map({1: 1, -1: 0}, 1)
        assert drift(jump)[0] == pytest.approx(0.5)

    def test_symmetric_2d(self):
        np.testing.assert_allclose(drift(JumpFunction.standard(2)), [0.0, 0.0])


class TestReducedResolvent:
    def test_defining_identity(self, reference_model):
        M0 = reference_model.compressed_m((-0.9, 0.9))
        S = reduced_resolvent(M0)
        P = spectral_projector(M0)
        Q = np.eye(4) - P
        np.testing.assert_allclose((M0 - np.eye(4)) @ S, Q, atol=1e-10)
        np.testing.assert_allclose(S @ P, 0 * S, atol=1e-10)
        np.testing.assert_allclose(P @ S, 0 * S, atol=1e-10)

    def test_reference_matrix_element(self, reference_model):
        # <phi_1 | S_v(1) phi_1> with phi_1 = (|-1,-1> - |1,1>)/sqrt(2)
        gamma = (SQRT2 - 1) / 2
        for v in (0.0, 0.4, 1.3):
            M0 = reference_model.m_full((-v, v))
            S = reduced_resolvent(M0)
            phi1 = np.zeros(4, dtype=complex)
            phi1[3] = 1 / SQRT2   # |-1 x -1>
            phi1[0] = -1 / SQRT2  # |1 x 1>
            got = phi1.conj() @ S @ phi1
            expect = (gamma**2 - 2 * np.cos(2 * v) * gamma + 0.75) / (
                2 * np.cos(2 * v) * (gamma**2 + gamma) - (2 * gamma**3 + 0.75))
            assert got == pytest.approx(expect, abs=1e-12)

    def test_diagonal_elements_real(self, reference_model):
        M0 = reference_model.m_full((-0.7, 0.7))
        S = reduced_resolvent(M0)
        for i in (0, 3):
            for j in (0, 3):
                assert abs(S[i, j].imag) < 1e-12


class TestDiffusionMatrix:
    def test_reference_profile(self, reference_model):
        for v in np.linspace(0, 2 * np.pi, 64, endpoint=False):
            D = diffusion_matrix(reference_model, v)
            assert abs(D[0, 0] - reference_diffusion(v)) < 1e-9

    def test_value_at_zero(self, reference_model):
        D = diffusion_matrix(reference_model, 0.0)
        assert D[0, 0] == pytest.approx(2 * SQRT2 - 1, abs=1e-12)

    def test_value_at_half_pi(self, reference_model):
        D = diffusion_matrix(reference_model, np.pi / 2)
        expect = (6 - SQRT2) / (5 * SQRT2 - 2)
        assert D[0, 0] == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(reference_diffusion(np.pi / 2), abs=1e-12)

    def test_methods_agree(self, reference_model):
        for v in (0.0, 0.8, 2.4):
            Dr = diffusion_matrix(reference_model, v, "resolvent")
            Dh = diffusion_matrix(reference_model, v, "hessian")
            assert np.abs(Dr - Dh).max() < 1e-6

    def test_eigenvalue_expansion_cubic_remainder(self, reference_model):
        from rtqw.spectral import _tracked_eigenvalue
        v = 0.6
        D = diffusion_matrix(reference_model, v)[0, 0]
        ys = np.geomspace(1e-3, 1e-1, 12)
        resid = []
        for y in ys:
            lam = _tracked_eigenvalue(reference_model, np.array([y]), np.array([v]))
            model_val = 1.0 - 0.5 * D * y * y  # drift is zero here
            resid.append(abs(lam - model_val))
        slope = np.polyfit(np.log(ys), np.log(resid), 1)[0]
        assert 2.6 < slope < 3.4

    def test_assumption_required(self):
        ens = FiniteCoinEnsemble((hadamard(),), np.array([1.0]))
        model = averaged_model(ens, JUMP1)
        with pytest.raises(AssumptionFailedError):
            diffusion_matrix(model, 0.3)

    def test_methods_agree_with_drift(self):
        ens, _ = three_coin_reference()
        jump = JumpFunction.from_map({1: 2, -1: 0}, 1)
        model = averaged_model(ens, jump)
        for v in (0.0, 1.1):
            Dr = diffusion_matrix(model, v, "resolvent")
            Dh = diffusion_matrix(model, v, "hessian")
            assert np.abs(Dr - Dh).max() < 1e-6

    def test_tracking_lost_far_from_origin(self, reference_model):
        from rtqw.errors import TrackingLostError
        from rtqw.spectral import _tracked_eigenvalue
        with pytest.raises(TrackingLostError):
            # at y = pi the continued branch sits far from 1
            _tracked_eigenvalue(reference_model, np.array([np.pi]), np.array([0.3]))


class TestAveragedDiffusion:
    def test_permutation_model_is_v_independent(self):
        ens = bernoulli_identity_swap(0.7).to_coin_ensemble()
        model = averaged_model(ens, JUMP1)
        rep = diffusion_report(model, grid_size=16)
        assert rep.v_independent
        np.testing.assert_allclose(
            rep.averaged, diffusion_matrix(model, 0.0), atol=1e-12)

    def test_quadrature_grid_converged(self, reference_model):
        a = averaged_diffusion(reference_model, 64)
        b = averaged_diffusion(reference_model, 128)
        assert np.abs(a - b).max() < 1e-10

    def test_symmetric_psd(self, reference_model):
        D = averaged_diffusion(reference_model, 64)
        np.testing.assert_allclose(D, D.T, atol=1e-10)
        assert np.linalg.eigvalsh(D).min() > -1e-10


class TestAveragedCharFunction:
    def test_normalization_at_zero(self, reference_model, rng):
        phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi0 /= np.linalg.norm(phi0)
        for n in (0, 1, 5):
            val = averaged_char_function(reference_model, 0.0, n, phi0)
            assert val == pytest.approx(1.0, abs=1e-12)

    def test_left_fixed_point_invariance(self, reference_model, rng):
        phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi0 /= np.linalg.norm(phi0)
        vec = np.kron(phi0, phi0.conj())
        left = psi1_vector(1)
        for n in (1, 3, 7):
            v = 0.83
            M = m_matrix(reference_model.doubled, (-v, v), JUMP1)
            got = left.conj() @ np.linalg.matrix_power(M, n) @ vec
            assert got == pytest.approx(left.conj() @ vec, abs=1e-12)

    def test_matches_enumeration_average(self, rng):
        for ens in two_coin_corpus()[:2]:
            model = averaged_model(ens, JUMP1)
            phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
            phi0 /= np.linalg.norm(phi0)
            n = 5
            y = 0.7
            state0 = WalkState.point(phi0)
            acc = 0.0 + 0.0j
            for seq, pr in enumerate_sequences(ens, n):
                dist = position_distribution(
                    evolve(state0, [ens.coins[i] for i in seq], JUMP1))
                acc += pr * characteristic_function(dist, y)
            got = averaged_char_function(model, y, n, phi0)
            assert abs(got - acc) < 1e-12

    def test_tensor_product_identity(self, rng):
        coins = [Coin(random_unitary(2, rng)) for _ in range(4)]
        y, yp = 0.5, 1.7
        prod = np.eye(4, dtype=complex)
        for c in coins:
            V = np.kron(c.matrix, c.matrix.conj())
            prod = m_matrix(V, (y, yp), JUMP1) @ prod
        expect = np.kron(fourier_jn(coins, JUMP1, y),
                         fourier_jn(coins, JUMP1, -yp).conj())
        np.testing.assert_allclose(prod, expect, atol=1e-12)

    def test_density_kernel_initial(self, reference_model, rng):
        from rtqw import DensityKernel
        phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi0 /= np.linalg.norm(phi0)
        rho = DensityKernel.pure(phi0)
        for n in (1, 4):
            a = averaged_char_function(reference_model, 0.9, n, phi0)
            b = averaged_char_function(reference_model, 0.9, n, rho)
            assert a == pytest.approx(b, abs=1e-12)


class TestAveragedDistributionOracle:
    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_matches_enumeration(self, n, rng):
        for ens in two_coin_corpus():
            model = averaged_model(ens, JUMP1)
            phi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
            phi0 /= np.linalg.norm(phi0)
            got, imag_max = averaged_distribution(model, n, phi0)
            assert imag_max < 1e-12
            expect: dict = {}
            state0 = WalkState.point(phi0)
            for seq, pr in enumerate_sequences(ens, n):
                dist = position_distribution(
                    evolve(state0, [ens.coins[i] for i in seq], JUMP1))
                for site, w in dist.to_map().items():
                    expect[site] = expect.get(site, 0.0) + pr * w
            for site in got:
                assert abs(got[site] - expect.get(site, 0.0)) < 1e-10


class TestScalingProbe:
    def test_zero_frequency_trivial(self, reference_model):
        rows = scaling_limit_probe(
            reference_model, 0.0, 1.0, [10, 40], np.array([1.0, 0.0]))
        for row in rows:
            assert row.value == pytest.approx(1.0, abs=1e-12)
            assert row.limit == pytest.approx(1.0, abs=1e-12)

    def test_diffusive_errors_decrease(self, reference_model):
        phi0 = np.array([1.0, 1.0j]) / SQRT2
        rows = scaling_limit_probe(
            reference_model, 1.0, 1.0, [400, 1600, 6400], phi0, grid_size=64)
        assert rows[-1].error < rows[0].error

    def test_ballistic_errors_decrease(self):
        jump = JumpFunction.from_map({1: 1, -1: 0}, 1)
        ens, _ = three_coin_reference()
        model = averaged_model(ens, jump)
        phi0 = np.array([1.0, 0.0], dtype=complex)
        rows = scaling_limit_probe(
            model, 1.0, 1.0, [100, 400, 1600], phi0, mode="ballistic", grid_size=48)
        assert rows[-1].error < rows[0].error
        assert abs(rows[-1].limit - np.exp(0.5j)) < 1e-12


class TestEinsteinScan:
    def test_scan_rows(self):
        ens, _ = three_coin_reference()
        r1 = JUMP1
        r0 = JumpFunction.from_map({1: 1, -1: 0}, 1)
        rows = einstein_scan(ens, r1, r0, [2, 4, 8, 16], grid_size=32)
        target = averaged_diffusion(averaged_model(ens, r1), 32)[0, 0]
        for row in rows:
            assert row.velocity[0] == pytest.approx(0.5 / row.s)
            assert row.mobility[0] == pytest.approx(0.5)  # velocity * s = drift
        errs = [abs(row.diffusion[0, 0] - target) for row in rows]
        assert abs(rows[-1].diffusion[0, 0] - rows[-2].diffusion[0, 0]) < \
            abs(rows[0].diffusion[0, 0] - rows[1].diffusion[0, 0])
        assert errs[-1] < errs[0]

    def test_drift_constraints_validated(self):
        ens, _ = three_coin_reference()
        r0 = JumpFunction.from_map({1: 1, -1: 0}, 1)
        from rtqw.errors import ValidationError
        with pytest.raises(ValidationError):
            einstein_scan(ens, r0, r0, [2])
        with pytest.raises(ValidationError):
            einstein_scan(ens, JUMP1, JUMP1, [2])
