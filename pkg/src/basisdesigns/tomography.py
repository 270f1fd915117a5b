"""Basis families as rank-one measurements: frames, duals, estimation and error laws.

Operators are vectorized column-major, and ``|A)(B|`` acts as X -> A tr(B^dagger X).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .design import WeightedBasisFamily
from .exceptions import CapacityError, DomainError, NotInformationallyCompleteError

MAX_FRAME_DIMENSION = 32
IC_CUTOFF = 1e-10


# --------------------------------------------------------------------------
# states

def as_density_matrix(rho, tol: float = 1e-12) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError("a density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise DomainError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise DomainError("density matrix has a negative eigenvalue")
    return rho


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=np.complex128) / d


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho, rho)))


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary: QR of a complex Gaussian matrix with R's diagonal made positive."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def project_to_states(rho: np.ndarray) -> np.ndarray:
    """Closest density matrix in Frobenius norm (eigenvalues projected to the simplex).

    Not used by the error laws, which concern the raw linear estimate.
    """
    h = (rho + rho.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    mu = np.sort(vals)[::-1]
    cums = np.cumsum(mu) - 1
    idx = np.arange(1, len(mu) + 1)
    k = idx[mu - cums / idx > 0][-1]
    shifted = np.clip(vals - cums[k - 1] / k, 0, None)
    return (vecs * shifted) @ vecs.conj().T


# --------------------------------------------------------------------------
# measurements

def vec(op: np.ndarray) -> np.ndarray:
    return np.asarray(op).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


@dataclass(frozen=True, eq=False)
class RankOnePovm:
    """Outcomes tau(x) |x><x| with unit vectors stored as columns."""

    vectors: np.ndarray
    tau: np.ndarray
    basis_index: np.ndarray | None = None

    def __post_init__(self):
        V = np.asarray(self.vectors, dtype=np.complex128)
        tau = np.asarray(self.tau, dtype=float)
        d = V.shape[0]
        if V.ndim != 2 or tau.shape != (V.shape[1],):
            raise DomainError("vectors must be d x M with one weight per column")
        if np.any(tau <= 0):
            raise DomainError("outcome weights must be positive")
        if abs(tau.sum() - d) > 1e-10:
            raise DomainError(f"outcome weights sum to {tau.sum()}, expected {d}")
        if np.max(np.abs((V * tau) @ V.conj().T - np.eye(d))) > 1e-10:
            raise DomainError("outcomes do not resolve the identity")
        object.__setattr__(self, "vectors", V)
        object.__setattr__(self, "tau", tau)
        if self.basis_index is not None:
            object.__setattr__(self, "basis_index", np.asarray(self.basis_index, dtype=int))

    @property
    def dimension(self) -> int:
        return self.vectors.shape[0]

    @property
    def outcomes(self) -> int:
        return self.vectors.shape[1]

    def projectors(self) -> np.ndarray:
        V = self.vectors
        return np.einsum("ix,jx->xij", V, V.conj())

    def probabilities(self, rho) -> np.ndarray:
        """p(x) = tau(x) <x|rho|x>."""
        V = self.vectors
        q = np.real(np.einsum("ix,ij,jx->x", V.conj(), rho, V))
        return self.tau * q


def povm_from_family(family: WeightedBasisFamily, basis_weights: Sequence[float] | None = None
                     ) -> RankOnePovm:
    """Outcome e_j^a gets weight v_a; by default v_a = d w_a.

    ``basis_weights`` overrides v_a, for instance with the realized n_a/N of a shot
    allocation.  Any probability vector keeps the POVM complete.
    """
    m, d = family.size, family.dimension
    v = family.weight_values * d if basis_weights is None else np.asarray(basis_weights, float)
    if v.shape != (m,):
        raise DomainError(f"expected {m} basis weights")
    return RankOnePovm(family.vectors, np.repeat(v, d), np.repeat(np.arange(m), d))


def frame_superop(povm: RankOnePovm) -> np.ndarray:
    """F = sum_x tau(x) |pi(x))(pi(x)| as a d^2 x d^2 matrix."""
    d = povm.dimension
    if d > MAX_FRAME_DIMENSION:
        raise CapacityError(f"dimension {d} exceeds {MAX_FRAME_DIMENSION}")
    V = povm.vectors
    # vec(|x><x|) column-major is kron(conj(x), x)
    P = np.einsum("ix,jx->jix", V, V.conj()).reshape(d * d, -1)
    return (P * povm.tau) @ P.conj().T


def tight_frame_target(d: int) -> np.ndarray:
    """(I + |I)(I|)/(d+1), the frame superoperator of every tight rank-one IC-POVM."""
    eye = vec(np.eye(d))
    return (np.eye(d * d) + np.outer(eye, eye)) / (d + 1)


def traceless_restriction(superop: np.ndarray, d: int) -> np.ndarray:
    """Restriction to the traceless subspace in an orthonormal basis of it."""
    eye = vec(np.eye(d)) / math.sqrt(d)
    full = np.linalg.qr(np.column_stack([eye, np.eye(d * d)]))[0]
    basis = full[:, 1:d * d]
    return basis.conj().T @ superop @ basis


def is_informationally_complete(povm: RankOnePovm) -> bool:
    return float(np.linalg.eigvalsh(frame_superop(povm)).min()) > IC_CUTOFF


def inverse_frame(povm: RankOnePovm) -> np.ndarray:
    vals, vecs = np.linalg.eigh(frame_superop(povm))
    if vals.min() <= IC_CUTOFF:
        raise NotInformationallyCompleteError(
            f"frame superoperator has eigenvalue {vals.min():.3e} below {IC_CUTOFF}")
    return (vecs / vals) @ vecs.conj().T


def trace_inverse_frame(povm: RankOnePovm) -> float:
    return float(np.real(np.trace(inverse_frame(povm))))


@dataclass(frozen=True, eq=False)
class ReconstructionDual:
    """One reconstruction operator per outcome.

    Duals of the form Q(e_j^a) = base_j^a + D_a keep ``base``, ``shifts`` and the
    basis weights v_a (with sum_a v_a D_a = 0) separately, so estimates can apply
    the shifts through the exact per-basis totals of the counts.
    """

    operators: np.ndarray
    base: np.ndarray | None = None
    shifts: np.ndarray | None = None
    basis_weights: np.ndarray | None = None


def canonical_dual(povm: RankOnePovm) -> ReconstructionDual:
    """R(x) = F^{-1} |pi(x))."""
    d = povm.dimension
    Finv = inverse_frame(povm)
    P = np.einsum("ix,jx->jix", povm.vectors, povm.vectors.conj()).reshape(d * d, -1)
    R = Finv @ P
    ops = R.T.reshape(-1, d, d).transpose(0, 2, 1)
    return ReconstructionDual(np.ascontiguousarray(ops))


def tight_dual(povm: RankOnePovm, shifts: np.ndarray | None = None) -> ReconstructionDual:
    """Q(e_j^a) = (d+1) pi(e_j^a) - I + D_a, requiring sum_a v_a D_a = 0."""
    if povm.basis_index is None:
        raise DomainError("tight_dual needs the basis grouping of the outcomes")
    d = povm.dimension
    base = (d + 1) * povm.projectors() - np.eye(d)
    m = int(povm.basis_index.max()) + 1
    v = np.array([povm.tau[povm.basis_index == a][0] for a in range(m)])
    if shifts is None:
        D = np.zeros((m, d, d), dtype=np.complex128)
    else:
        D = np.asarray(shifts, dtype=np.complex128)
        if D.shape != (m, d, d):
            raise DomainError(f"shifts must have shape {(m, d, d)}")
        if np.max(np.abs(np.tensordot(v, D, axes=1))) > 1e-10:
            raise DomainError("shifts violate sum_a v_a D_a = 0")
    ops = base + D[povm.basis_index]
    return ReconstructionDual(ops, base, D, v)


def dual_residual(dual: ReconstructionDual, povm: RankOnePovm) -> float:
    """Frobenius norm of sum_x |Q(x))(F(x)| - identity."""
    d = povm.dimension
    Q = dual.operators.transpose(0, 2, 1).reshape(-1, d * d).T
    P = np.einsum("ix,jx->jix", povm.vectors, povm.vectors.conj()).reshape(d * d, -1)
    S = (Q * povm.tau) @ P.conj().T
    return float(np.linalg.norm(S - np.eye(d * d)))


def reconstruct(probabilities, dual: ReconstructionDual) -> np.ndarray:
    """rho = sum_x p(x) Q(x)."""
    p = np.asarray(probabilities, dtype=float)
    if p.shape != (dual.operators.shape[0],):
        raise DomainError(f"expected {dual.operators.shape[0]} probabilities, got {p.shape}")
    return np.tensordot(p, dual.operators, axes=1)


def cloning_fidelity(povm: RankOnePovm, psi) -> float:
    """sum_x tau(x) |<x|psi>|^4: measure, then prepare the observed outcome."""
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    overlaps = np.abs(povm.vectors.conj().T @ psi) ** 2
    return float(povm.tau @ overlaps ** 2)


def worst_case_fidelity(povm: RankOnePovm, samples: int = 200, seed: int = 0,
                        refine_steps: int = 200) -> float:
    """Sampled upper estimate of inf_psi cloning_fidelity.

    Random starts followed by a projected-gradient refinement of the best one;
    it never certifies the infimum.
    """
    rng = np.random.default_rng(seed)
    d = povm.dimension
    starts = [random_pure_state(d, rng) for _ in range(samples)]
    psi = min(starts, key=lambda s: cloning_fidelity(povm, s))
    best = cloning_fidelity(povm, psi)
    V, tau = povm.vectors, povm.tau
    step = 0.1
    for _ in range(refine_steps):
        amps = V.conj().T @ psi
        grad = V @ (tau * 2 * np.abs(amps) ** 2 * amps)
        trial = psi - step * grad
        trial /= np.linalg.norm(trial)
        val = cloning_fidelity(povm, trial)
        if val < best:
            psi, best = trial, val
        else:
            step /= 2
            if step < 1e-12:
                break
    return best


# --------------------------------------------------------------------------
# shot allocation and simulation

@dataclass(frozen=True)
class ShotAllocation:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if not counts or min(counts) < 1:
            raise DomainError("every basis needs at least one shot")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def weights(self) -> np.ndarray:
        return np.array(self.counts, dtype=float) / self.total

    @classmethod
    def uniform(cls, bases: int, per_basis: int) -> "ShotAllocation":
        return cls((per_basis,) * bases)

    @classmethod
    def from_weights(cls, weights: Sequence[float], total: int) -> "ShotAllocation":
        """n_a ~ v_a N, rounded by largest remainder (ties to the lower index)."""
        v = np.asarray([float(w) for w in weights])
        v = v / v.sum()
        raw = v * total
        base = np.floor(raw).astype(int)
        short = total - int(base.sum())
        order = sorted(range(len(v)), key=lambda a: (-(raw[a] - base[a]), a))
        for a in order[:short]:
            base[a] += 1
        return cls(tuple(int(n) for n in base))

    @classmethod
    def for_family(cls, family: WeightedBasisFamily, total: int) -> "ShotAllocation":
        return cls.from_weights(family.weight_values * family.dimension, total)


def simulate(family: WeightedBasisFamily, rho, alloc: ShotAllocation,
             seed: int | np.random.Generator | Sequence[int]) -> np.ndarray:
    """(m, d) outcome counts, n_a multinomial draws in basis a."""
    rho = as_density_matrix(rho, tol=1e-10)
    if len(alloc.counts) != family.size:
        raise DomainError("allocation and family sizes differ")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = np.real(np.einsum("aix,ij,ajx->ax", family.matrices.conj(), rho, family.matrices))
    q = np.clip(q, 0, None)
    q /= q.sum(axis=1, keepdims=True)
    return np.stack([rng.multinomial(n, q[a]) for a, n in enumerate(alloc.counts)])


def simulate_random_bases(family: WeightedBasisFamily, rho, total: int,
                          seed: int | np.random.Generator | Sequence[int]) -> np.ndarray:
    """Each shot picks basis a with probability v_a = d w_a; returns (m, d) counts."""
    rho = as_density_matrix(rho, tol=1e-10)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    povm = povm_from_family(family)
    p = np.clip(povm.probabilities(rho), 0, None)
    counts = rng.multinomial(total, p / p.sum())
    return counts.reshape(family.size, family.dimension)


def estimate_state(counts: np.ndarray, family: WeightedBasisFamily, dual: ReconstructionDual,
                   alloc: ShotAllocation) -> np.ndarray:
    """Linear estimate sum_x p_hat(x) Q(x) with p_hat(e_j^a) = (v_a/n_a) count = count/N.

    For a shifted tight dual the shifts enter as sum_a (sum_j p_hat(e_j^a) - v_a) D_a,
    which equals sum_a (sum_j p_hat(e_j^a)) D_a because sum_a v_a D_a = 0.  The
    per-basis total n_a/N is formed from integer counts, so when v_a = n_a/N the
    shifts contribute an exact zero.
    """
    counts = np.asarray(counts)
    m, d = family.size, family.dimension
    if counts.shape != (m, d) or len(alloc.counts) != m:
        raise DomainError(f"counts must have shape {(m, d)} matching the allocation")
    N = alloc.total
    p_hat = counts.reshape(-1) / N
    if dual.base is None:
        return np.tensordot(p_hat, dual.operators, axes=1)
    excess = counts.sum(axis=1) / N - dual.basis_weights
    return np.tensordot(p_hat, dual.base, axes=1) + np.tensordot(excess, dual.shifts, axes=1)


def estimate_from_counts(counts: np.ndarray, dual: ReconstructionDual, total: int) -> np.ndarray:
    """Estimate when shots were spread over bases at random: p_hat = count/N."""
    return np.tensordot(np.asarray(counts).reshape(-1) / total, dual.operators, axes=1)


# --------------------------------------------------------------------------
# error laws

def expected_error_tight(d: int, N: int, rho) -> float:
    """((d+1)/N)(d - tr rho^2); ``rho`` may be a matrix or its purity."""
    if N < 1:
        raise DomainError("N must be positive")
    s = float(rho) if np.isscalar(rho) else purity(rho)
    return (d + 1) / N * (d - s)


def _gram_blocks(dual: ReconstructionDual, m: int, d: int) -> np.ndarray:
    Q = dual.operators.reshape(m, d, d * d)
    return np.real(np.einsum("ajk,alk->ajl", Q.conj(), Q))


def expected_error_general(povm: RankOnePovm, sigma, alloc: ShotAllocation,
                           dual: ReconstructionDual | None = None) -> float:
    """Haar-orientation average of E||rho - rho_hat||^2 for rho = U sigma U^dagger.

    (d - tr sigma^2)/((d^2 - 1) N) * sum_a v_a sum_{jk} (delta_jk - 1/d) <Q_j^a, Q_k^a>;
    for the canonical dual the sum equals Tr F^{-1} - 1.
    """
    d = povm.dimension
    m = len(alloc.counts)
    if dual is None:
        dual = canonical_dual(povm)
    G = _gram_blocks(dual, m, d)
    kernel = np.eye(d) - 1.0 / d
    inner = float(alloc.weights @ np.einsum("ajk,jk->a", G, kernel))
    s = purity(sigma)
    return (d - s) / ((d * d - 1) * alloc.total) * inner


def expected_error_closed_form(povm: RankOnePovm, sigma, N: int) -> float:
    """(d - tr sigma^2)/((d^2 - 1) N) (Tr F^{-1} - 1) for the canonical dual."""
    d = povm.dimension
    return (d - purity(sigma)) / ((d * d - 1) * N) * (trace_inverse_frame(povm) - 1)


def expected_error_fixed(povm: RankOnePovm, rho, alloc: ShotAllocation,
                         dual: ReconstructionDual | None = None) -> float:
    """Exact E||rho - rho_hat||^2 for one fixed state and fixed allocation."""
    d = povm.dimension
    m = len(alloc.counts)
    if dual is None:
        dual = canonical_dual(povm)
    V = povm.vectors.reshape(d, m, d)
    q = np.real(np.einsum("iaj,ik,kaj->aj", V.conj(), rho, V))
    G = _gram_blocks(dual, m, d)
    cov = np.einsum("aj,jk->ajk", q, np.eye(d)) - np.einsum("aj,ak->ajk", q, q)
    n = np.array(alloc.counts, dtype=float)
    return float(np.sum(n / alloc.total ** 2 * np.einsum("ajk,ajk->a", cov, G)))


def expected_error_random_bases(povm: RankOnePovm, rho, N: int,
                                dual: ReconstructionDual | None = None) -> float:
    """Exact error when every shot picks its basis at random with probability v_a."""
    if dual is None:
        dual = canonical_dual(povm)
    p = povm.probabilities(rho)
    Q = dual.operators.reshape(len(p), -1)
    norms = np.real(np.einsum("xk,xk->x", Q.conj(), Q))
    mean = p @ Q
    return float((p @ norms - np.real(np.vdot(mean, mean))) / N)


class MonteCarloResult(NamedTuple):
    mean: float
    standard_error: float
    errors: np.ndarray


def monte_carlo_error(family: WeightedBasisFamily, sigma, alloc: ShotAllocation, trials: int,
                      seed: int, orientation: str = "fixed", sampling: str = "fixed",
                      dual: ReconstructionDual | None = None, threads: int = 1
                      ) -> MonteCarloResult:
    """Mean of ||rho - rho_hat||^2 over independent simulated experiments.

    Trial i draws from ``default_rng([seed, i])`` so results do not depend on
    the thread count.  ``orientation="haar"`` rotates sigma by a fresh Haar unitary
    per trial; ``sampling="random"`` picks the basis of every shot at random
    instead of using the fixed allocation.
    """
    if trials < 2:
        raise DomainError("need at least two trials")
    if orientation not in ("fixed", "haar") or sampling not in ("fixed", "random"):
        raise DomainError("orientation must be fixed|haar and sampling fixed|random")
    sigma = as_density_matrix(sigma, tol=1e-10)
    d = family.dimension
    if dual is None:
        if sampling == "fixed":
            dual = canonical_dual(povm_from_family(family, alloc.weights))
        else:
            dual = canonical_dual(povm_from_family(family))

    def one(trial: int) -> float:
        rng = np.random.default_rng([seed, trial])
        rho = sigma
        if orientation == "haar":
            U = haar_unitary(d, rng)
            rho = U @ sigma @ U.conj().T
            rho = (rho + rho.conj().T) / 2
        if sampling == "fixed":
            counts = simulate(family, rho, alloc, rng)
            est = estimate_state(counts, family, dual, alloc)
        else:
            counts = simulate_random_bases(family, rho, alloc.total, rng)
            est = estimate_from_counts(counts, dual, alloc.total)
        diff = rho - est
        return float(np.real(np.vdot(diff, diff)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = np.array(list(pool.map(one, range(trials))))
    else:
        errors = np.array([one(i) for i in range(trials)])
    return MonteCarloResult(float(errors.mean()), float(errors.std(ddof=1) / math.sqrt(trials)),
                            errors)


def rotate_basis(family: WeightedBasisFamily, a: int, unitary: np.ndarray) -> WeightedBasisFamily:
    """Same weights, basis a replaced by unitary @ B_a."""
    return family.with_matrix(a, np.asarray(unitary) @ family.matrices[a])
