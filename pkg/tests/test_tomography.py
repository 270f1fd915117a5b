import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from basisdesigns.design import (
    corpus,
    dim6_design,
    family_from_bases,
    mub_family,
    standard_basis_family,
)
from basisdesigns.exceptions import DomainError, NotInformationallyCompleteError
from basisdesigns.tomography import (
    RankOnePovm,
    ShotAllocation,
    as_density_matrix,
    canonical_dual,
    cloning_fidelity,
    dual_residual,
    estimate_state,
    expected_error_closed_form,
    expected_error_fixed,
    expected_error_general,
    expected_error_random_bases,
    expected_error_tight,
    frame_superop,
    haar_unitary,
    is_informationally_complete,
    maximally_mixed,
    monte_carlo_error,
    povm_from_family,
    project_to_states,
    pure_state,
    purity,
    random_pure_state,
    reconstruct,
    rotate_basis,
    simulate,
    tight_dual,
    tight_frame_target,
    trace_inverse_frame,
    traceless_restriction,
    vec,
    worst_case_fidelity,
)

FAMILIES = list(corpus().items())


def rotation(theta):
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def perturbed_d2(theta=0.6):
    return rotate_basis(mub_family(2), 1, rotation(theta))


class TestPovm:
    def test_dim6(self):
        P = povm_from_family(dim6_design())
        assert P.outcomes == 48
        assert np.allclose(P.tau[:6], 1 / 7) and np.allclose(P.tau[6:], 6 / 49)

    def test_single_basis(self):
        assert np.allclose(povm_from_family(standard_basis_family(4)).tau, 1)

    def test_mub3(self):
        P = povm_from_family(mub_family(3))
        assert P.outcomes == 12 and np.allclose(P.tau, 1 / 4)

    @pytest.mark.parametrize("name,family", FAMILIES)
    def test_completeness(self, name, family):
        P = povm_from_family(family)
        assert np.allclose((P.vectors * P.tau) @ P.vectors.conj().T, np.eye(family.dimension),
                           atol=1e-10)

    def test_invalid(self):
        with pytest.raises(DomainError):
            RankOnePovm(np.eye(2), np.array([1.0, 0.5]))


class TestFrame:
    @pytest.mark.parametrize("name,family", FAMILIES)
    def test_tight_form(self, name, family):
        d = family.dimension
        F = frame_superop(povm_from_family(family))
        assert np.linalg.norm(F - tight_frame_target(d)) < 1e-9
        eigs = np.sort(np.linalg.eigvalsh(F))
        assert abs(eigs[-1] - 1) < 1e-9
        assert np.allclose(eigs[:-1], 1 / (d + 1), atol=1e-9)
        assert np.allclose(F @ vec(np.eye(d)), vec(np.eye(d)), atol=1e-10)
        restricted = traceless_restriction(F, d)
        assert np.allclose(restricted, np.eye(d * d - 1) / (d + 1), atol=1e-9)

    def test_vectorization_convention(self):
        rng = np.random.default_rng(0)
        A, B, X = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
        superop = np.outer(vec(A), vec(B).conj())
        assert np.allclose(superop @ vec(X), vec(A * np.trace(B.conj().T @ X)))

    def test_single_basis_rank(self):
        F = frame_superop(povm_from_family(standard_basis_family(3)))
        assert np.linalg.matrix_rank(F, tol=1e-10) == 3

    def test_trace_inverse(self):
        assert abs(trace_inverse_frame(povm_from_family(mub_family(2))) - 10) < 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_random_bases_ic(self, seed):
        rng = np.random.default_rng(seed)
        d = 3
        fam = family_from_bases([haar_unitary(d, rng) for _ in range(d + 1)])
        assert is_informationally_complete(povm_from_family(fam))

    def test_copies_not_ic(self):
        P = povm_from_family(standard_basis_family(3, copies=3))
        assert not is_informationally_complete(P)
        with pytest.raises(NotInformationallyCompleteError):
            canonical_dual(P)

    @pytest.mark.parametrize("name,family", FAMILIES)
    def test_constructed_ic(self, name, family):
        assert is_informationally_complete(povm_from_family(family))


class TestDuals:
    @pytest.mark.parametrize("family", [dim6_design(), mub_family(2)])
    def test_canonical_is_tight(self, family):
        P = povm_from_family(family)
        d = family.dimension
        expected = (d + 1) * P.projectors() - np.eye(d)
        assert np.max(np.abs(canonical_dual(P).operators - expected)) < 1e-8

    def test_perturbed_differs(self):
        rng = np.random.default_rng(5)
        fam = mub_family(3)
        small = haar_unitary(3, rng)
        h = (small + small.conj().T) / 2
        vals, vecs = np.linalg.eigh(h)
        U = (vecs * np.exp(0.2j * vals)) @ vecs.conj().T
        P = povm_from_family(rotate_basis(fam, 2, U))
        expected = 4 * P.projectors() - np.eye(3)
        assert np.linalg.norm(canonical_dual(P).operators - expected) > 1e-3

    @pytest.mark.parametrize("name,family", FAMILIES)
    def test_dual_conditions(self, name, family):
        P = povm_from_family(family)
        assert dual_residual(canonical_dual(P), P) < 1e-8
        assert dual_residual(tight_dual(P), P) < 1e-8

    def test_shifted_dual(self):
        fam = mub_family(3)
        P = povm_from_family(fam)
        eps = 0.3
        D = np.zeros((4, 3, 3), complex)
        D[0] = eps * np.eye(3)
        D[1:] = -eps / 3 * np.eye(3)
        dual = tight_dual(P, D)
        assert dual_residual(dual, P) < 1e-8
        assert np.allclose(dual.operators[:3], tight_dual(P).operators[:3] + D[0])

    def test_bad_shift(self):
        P = povm_from_family(mub_family(2))
        with pytest.raises(DomainError):
            tight_dual(P, np.stack([np.eye(2), np.zeros((2, 2)), np.zeros((2, 2))]))

    def test_non_tight_residual(self):
        P = povm_from_family(perturbed_d2())
        assert dual_residual(tight_dual(P), P) > 1e-6
        assert dual_residual(canonical_dual(P), P) < 1e-8


class TestReconstruction:
    def test_maximally_mixed(self):
        P = povm_from_family(mub_family(3))
        rho = reconstruct(P.tau / 3, tight_dual(P))
        assert np.allclose(rho, np.eye(3) / 3, atol=1e-12)

    def test_dim6_round_trip(self):
        P = povm_from_family(dim6_design())
        dual = tight_dual(P)
        rng = np.random.default_rng(2)
        for _ in range(10):
            rho = pure_state(random_pure_state(6, rng))
            assert np.linalg.norm(reconstruct(P.probabilities(rho), dual) - rho) <= 1e-10

    def test_hand_example(self):
        P = povm_from_family(mub_family(2))
        p = P.probabilities(pure_state([1, 0]))
        assert np.allclose(p, np.array([1, 0, 0.5, 0.5, 0.5, 0.5]) / 3)
        assert np.allclose(reconstruct(p, tight_dual(P)), np.diag([1, 0]), atol=1e-12)

    def test_length_mismatch(self):
        P = povm_from_family(mub_family(2))
        with pytest.raises(DomainError):
            reconstruct(np.ones(5), tight_dual(P))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6), st.sampled_from(["mub2", "mub4", "exp4"]))
    def test_hermitian_output(self, seed, name):
        fam = corpus()[name]
        P = povm_from_family(fam)
        rng = np.random.default_rng(seed)
        rho = pure_state(random_pure_state(fam.dimension, rng))
        out = reconstruct(P.probabilities(rho), canonical_dual(P))
        assert np.allclose(out, out.conj().T, atol=1e-12)


class TestCloning:
    def test_dim6_constant(self):
        P = povm_from_family(dim6_design())
        rng = np.random.default_rng(4)
        for _ in range(20):
            assert abs(cloning_fidelity(P, random_pure_state(6, rng)) - 2 / 7) < 1e-10

    def test_single_basis(self):
        P = povm_from_family(standard_basis_family(2))
        assert abs(cloning_fidelity(P, [1, 0]) - 1) < 1e-15
        assert abs(cloning_fidelity(P, [1, 1]) - 0.5) < 1e-15

    def test_worst_case(self):
        assert abs(worst_case_fidelity(povm_from_family(mub_family(3))) - 0.5) < 1e-10
        assert worst_case_fidelity(povm_from_family(perturbed_d2())) < 2 / 3


class TestSimulation:
    def test_eigenstate(self):
        counts = simulate(standard_basis_family(3), pure_state([1, 0, 0]),
                          ShotAllocation((50,)), seed=1)
        assert counts.tolist() == [[50, 0, 0]]

    def test_frequency(self):
        counts = simulate(standard_basis_family(2), maximally_mixed(2), ShotAllocation((10 ** 4,)), 3)
        assert abs(counts[0, 0] / 1e4 - 0.5) < 0.02

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=20, deadline=None)
    def test_conservation_and_determinism(self, seed):
        fam = dim6_design()
        alloc = ShotAllocation.for_family(fam, 420)
        rho = pure_state(random_pure_state(6, np.random.default_rng(seed)))
        c1 = simulate(fam, rho, alloc, seed)
        assert c1.sum(axis=1).tolist() == list(alloc.counts)
        assert np.array_equal(c1, simulate(fam, rho, alloc, seed))

    def test_invalid_state(self):
        with pytest.raises(DomainError):
            simulate(mub_family(2), np.diag([1.5, -0.5]), ShotAllocation.uniform(3, 10), 0)

    def test_allocation(self):
        a = ShotAllocation.for_family(dim6_design(), 420)
        assert a.counts[0] == 60 and a.total == 420
        assert ShotAllocation.for_family(dim6_design(), 4200).counts[0] == 600
        with pytest.raises(DomainError):
            ShotAllocation((3, 0, 2))

    def test_estimator_moments(self):
        fam = mub_family(2)
        alloc = ShotAllocation.uniform(3, 10 ** 4)
        rho = pure_state([math.cos(0.3), math.sin(0.3) * 1j])
        P = povm_from_family(fam, alloc.weights)
        p = P.probabilities(rho).reshape(3, 2)
        T = 400
        draws = np.array([simulate(fam, rho, alloc, [9, t]) / alloc.total for t in range(T)])
        mean = draws.mean(axis=0)
        v = alloc.weights[:, None]
        n = np.array(alloc.counts)[:, None]
        var = (v * p - p * p) / n
        assert np.all(np.abs(mean - p) <= 4 * np.sqrt(var / T))
        emp_var = draws.var(axis=0, ddof=1)
        assert np.all(np.abs(emp_var - var) <= 4 * var * math.sqrt(2 / (T - 1)))
        cov01 = np.mean((draws[:, :, 0] - p[:, 0]) * (draws[:, :, 1] - p[:, 1]), axis=0)
        assert np.all(np.abs(cov01 + p[:, 0] * p[:, 1] / n[:, 0]) <= 4 * var[:, 0] * math.sqrt(2 / (T - 1)))


class TestEstimate:
    def test_infinite_shot_limit(self):
        fam = dim6_design()
        alloc = ShotAllocation.for_family(fam, 49 * 10 ** 6)
        P = povm_from_family(fam, alloc.weights)
        rho = pure_state(random_pure_state(6, np.random.default_rng(0)))
        q = P.probabilities(rho).reshape(8, 6) / alloc.weights[:, None]
        counts = q * np.array(alloc.counts)[:, None]
        est = estimate_state(counts, fam, canonical_dual(P), alloc)
        assert np.linalg.norm(est - rho) < 1e-9

    def test_trace_one(self):
        fam = mub_family(3)
        alloc = ShotAllocation.uniform(4, 37)
        P = povm_from_family(fam, alloc.weights)
        counts = simulate(fam, maximally_mixed(3), alloc, 0)
        for dual in (tight_dual(P), canonical_dual(P)):
            assert abs(np.trace(estimate_state(counts, fam, dual, alloc)) - 1) < 1e-10

    def test_single_run_scale(self):
        fam = mub_family(2)
        alloc = ShotAllocation.uniform(3, 10 ** 4)
        rho = pure_state([1, 1j])
        counts = simulate(fam, rho, alloc, 12)
        err = np.linalg.norm(estimate_state(counts, fam, tight_dual(povm_from_family(fam)), alloc) - rho) ** 2
        target = 3 / alloc.total
        assert target / 5 <= err <= 5 * target

    def test_shape_mismatch(self):
        fam = mub_family(2)
        alloc = ShotAllocation.uniform(3, 10)
        with pytest.raises(DomainError):
            estimate_state(np.zeros((2, 2)), fam, tight_dual(povm_from_family(fam)), alloc)


class TestErrorLaws:
    def test_tight_formula(self):
        assert expected_error_tight(2, 300, pure_state([1, 0])) == pytest.approx(0.01)
        assert expected_error_tight(3, 50, maximally_mixed(3)) == pytest.approx(4 / 50 * (3 - 1 / 3))
        assert expected_error_tight(6, 4200, 1.0) == pytest.approx(1 / 120)
        with pytest.raises(DomainError):
            expected_error_tight(2, 0, 1.0)

    @pytest.mark.parametrize("name,family", FAMILIES)
    def test_general_equals_tight(self, name, family):
        d = family.dimension
        alloc = ShotAllocation.from_weights(family.weight_values * d, 49 * 60 * d * (d + 1))
        P = povm_from_family(family, alloc.weights)
        sigma = pure_state(random_pure_state(d, np.random.default_rng(1)))
        tight = expected_error_tight(d, alloc.total, sigma)
        assert abs(expected_error_general(P, sigma, alloc) - tight) < 1e-10
        assert abs(expected_error_closed_form(P, sigma, alloc.total) - tight) < 1e-10

    def test_d2_value(self):
        sigma = pure_state([0, 1])
        assert expected_error_tight(2, 100, sigma) == pytest.approx(0.03)
        alloc = ShotAllocation.for_family(mub_family(2), 100)
        assert alloc.counts == (34, 33, 33)
        P = povm_from_family(mub_family(2), alloc.weights)
        # N = 100 cannot be split evenly, so the realized weights sit slightly off the tight point
        assert expected_error_general(P, sigma, alloc) == pytest.approx(0.03, rel=1e-3)
        assert expected_error_general(P, sigma, alloc) >= 0.03

    @pytest.mark.parametrize("theta", [0.05, 0.3, 0.6, 1.0])
    def test_perturbed_strictly_larger(self, theta):
        fam = perturbed_d2(theta)
        alloc = ShotAllocation.uniform(3, 200)
        P = povm_from_family(fam, alloc.weights)
        sigma = pure_state([1, 0])
        general = expected_error_general(P, sigma, alloc)
        assert general > expected_error_tight(2, 600, sigma)
        assert general == pytest.approx(expected_error_closed_form(P, sigma, 600))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_inequality_random_families(self, seed):
        rng = np.random.default_rng(seed)
        fam = family_from_bases([haar_unitary(2, rng) for _ in range(3)])
        alloc = ShotAllocation.uniform(3, 100)
        P = povm_from_family(fam, alloc.weights)
        sigma = pure_state([1, 0])
        assert expected_error_general(P, sigma, alloc) >= expected_error_tight(2, 300, sigma) - 1e-12

    def test_fixed_matches_haar_average(self):
        fam = perturbed_d2()
        alloc = ShotAllocation.uniform(3, 200)
        P = povm_from_family(fam, alloc.weights)
        sigma = pure_state([1, 0])
        rng = np.random.default_rng(8)
        vals = []
        for _ in range(4000):
            U = haar_unitary(2, rng)
            vals.append(expected_error_fixed(P, U @ sigma @ U.conj().T, alloc))
        assert np.mean(vals) == pytest.approx(expected_error_general(P, sigma, alloc), rel=0.02)

    def test_random_bases_gap_formula(self):
        fam = mub_family(3)
        alloc = ShotAllocation.uniform(4, 100)
        P = povm_from_family(fam)
        rho = pure_state(random_pure_state(3, np.random.default_rng(3)))
        gap = expected_error_random_bases(P, rho, 400) - expected_error_fixed(P, rho, alloc)
        assert gap == pytest.approx((3 * purity(rho) - 1) / 400)


class TestMonteCarlo:
    def test_d2_pure(self):
        fam = mub_family(2)
        res = monte_carlo_error(fam, pure_state([1, 0]), ShotAllocation.uniform(3, 200), 2000, 0)
        assert abs(res.mean - 0.005) <= 3 * res.standard_error

    def test_d2_mixed(self):
        fam = mub_family(2)
        res = monte_carlo_error(fam, maximally_mixed(2), ShotAllocation.uniform(3, 100), 2000, 1)
        assert abs(res.mean - 3 / 300 * 1.5) <= 3 * res.standard_error

    def test_inverse_n_scaling(self):
        fam = mub_family(2)
        sigma = pure_state([1, 1])
        a = monte_carlo_error(fam, sigma, ShotAllocation.uniform(3, 100), 2000, 2)
        b = monte_carlo_error(fam, sigma, ShotAllocation.uniform(3, 200), 2000, 3)
        se = math.hypot(a.standard_error, b.standard_error / 2) * 2
        assert abs(a.mean - 2 * b.mean) <= 3 * se

    def test_random_versus_fixed(self):
        fam = mub_family(2)
        alloc = ShotAllocation.uniform(3, 200)
        sigma = pure_state([1, 0])
        fixed = monte_carlo_error(fam, sigma, alloc, 3000, 4)
        rand = monte_carlo_error(fam, sigma, alloc, 3000, 5, sampling="random")
        predicted = (2 * 1 - 1) / alloc.total
        se = math.hypot(fixed.standard_error, rand.standard_error)
        assert abs((rand.mean - fixed.mean) - predicted) <= 3 * se

    def test_thread_independence(self):
        fam = dim6_design()
        alloc = ShotAllocation.for_family(fam, 420)
        sigma = pure_state(np.ones(6))
        one = monte_carlo_error(fam, sigma, alloc, 40, 7, orientation="haar")
        three = monte_carlo_error(fam, sigma, alloc, 40, 7, orientation="haar", threads=3)
        assert np.array_equal(one.errors, three.errors)

    def test_trial_count(self):
        with pytest.raises(DomainError):
            monte_carlo_error(mub_family(2), maximally_mixed(2), ShotAllocation.uniform(3, 5), 1, 0)


class TestStates:
    def test_haar_unitary(self):
        U = haar_unitary(5, np.random.default_rng(0))
        assert np.allclose(U.conj().T @ U, np.eye(5), atol=1e-12)

    def test_density_validation(self):
        as_density_matrix(maximally_mixed(3))
        with pytest.raises(DomainError):
            as_density_matrix(np.array([[1, 1], [0, 0]]))
        with pytest.raises(DomainError):
            as_density_matrix(np.eye(2))

    def test_projection(self):
        rho = np.diag([1.2, -0.1, -0.1]).astype(complex)
        out = project_to_states(rho)
        assert abs(np.trace(out) - 1) < 1e-12
        assert np.linalg.eigvalsh(out).min() >= -1e-12
        state = pure_state([1, 2, 3])
        assert np.allclose(project_to_states(state), state)
