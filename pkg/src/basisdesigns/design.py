"""Weighted families of orthonormal bases and the weighted t-design test.

A family {(B_a, w_a)} with sum_a w_a = 1/d is a weighted t-design when

    sum_{a,b} w_a w_b sum_{j,k} |<e_j^a|e_k^b>|^{2t} = binom(d+t-1, t)^{-1},

and the left side always dominates the right.  The same condition is checked
independently through the t-th moment operator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .algebra import FiniteField, character_phases, prime_power, TWO_PI
from .exceptions import CapacityError, DomainError
from .nonlinear import (
    NonlinearFunction,
    binomial_bound,
    pn_square,
    teichmuller_function,
    verify_one_uniform,
)

MAX_BUILD_DIMENSION = 64
MAX_BUILD_ENTRIES = 2 ** 24
MAX_MOMENT_SIZE = 4096
DEFAULT_TOL = 1e-9

Weight = Fraction | float


@dataclass(frozen=True, eq=False)
class WeightedBasisFamily:
    """m orthonormal bases of C^d with per-basis weights summing to 1/d.

    ``matrices[a]`` is a d x d unitary whose column j is |e_j^a>.  Weights may be
    exact fractions (constructions) or floats (numerical search).
    """

    matrices: np.ndarray
    weights: tuple[Weight, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=np.complex128)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DomainError(f"expected an (m, d, d) array, got shape {mats.shape}")
        m, d, _ = mats.shape
        weights = tuple(self.weights)
        if len(weights) != m:
            raise DomainError(f"{len(weights)} weights for {m} bases")
        if any(w <= 0 for w in weights):
            raise DomainError("basis weights must be positive")
        total = float(sum(Fraction(w) for w in weights))
        if abs(total - 1.0 / d) > 1e-12:
            raise DomainError(f"weights sum to {total}, expected 1/d = {1.0 / d}")
        gram = np.einsum("aji,ajk->aik", mats.conj(), mats)
        if np.max(np.abs(gram - np.eye(d))) > 1e-10:
            raise DomainError("a basis matrix is not unitary")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "weights", weights)

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    @property
    def size(self) -> int:
        return self.matrices.shape[0]

    def __len__(self) -> int:
        return self.size

    @property
    def weight_values(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    @property
    def vectors(self) -> np.ndarray:
        """All m*d design vectors as columns of a d x (m*d) array, basis-major."""
        return np.concatenate(list(self.matrices), axis=1)

    @property
    def vector_weights(self) -> np.ndarray:
        return np.repeat(self.weight_values, self.dimension)

    def with_matrix(self, a: int, matrix: np.ndarray) -> "WeightedBasisFamily":
        mats = np.array(self.matrices)
        mats[a] = matrix
        return replace(self, matrices=mats, provenance={**self.provenance, "modified_basis": a})

    def __repr__(self):
        name = self.provenance.get("construction", "family")
        return f"WeightedBasisFamily({name}: m={self.size}, d={self.dimension})"


@dataclass
class DesignReport:
    dimension: int
    bases: int
    tolerance: float
    welch_sums: dict[int, float]
    bounds: dict[int, float]
    welch_residuals: dict[int, float]
    moment_residuals: dict[int, float | None]
    is_design: dict[int, bool]
    moment_is_design: dict[int, bool | None]
    mub_pairs: int
    min_overlap: float | None
    max_overlap: float | None

    @property
    def verdicts_agree(self) -> bool:
        return all(v is None or v == self.is_design[s] for s, v in self.moment_is_design.items())

    def to_dict(self) -> dict:
        def keyed(d):
            return {str(k): v for k, v in d.items()}
        return {
            "dimension": self.dimension,
            "bases": self.bases,
            "tolerance": self.tolerance,
            "welch_sums": keyed(self.welch_sums),
            "bounds": keyed(self.bounds),
            "welch_residuals": keyed(self.welch_residuals),
            "moment_residuals": keyed(self.moment_residuals),
            "is_design": keyed(self.is_design),
            "mub_pairs": self.mub_pairs,
            "min_overlap": self.min_overlap,
            "max_overlap": self.max_overlap,
        }


class MubCheck(NamedTuple):
    count: int
    offending: list[tuple[int, int]]


class UpperBound(NamedTuple):
    bases: int
    recipe: str


# --------------------------------------------------------------------------
# constructions

def build_design(f: NonlinearFunction) -> WeightedBasisFamily:
    """Standard basis plus one character basis per element of the codomain.

    Entry 0 is the standard basis with weight 1/(d(d+1)); entry a+1 is built
    from the character of the a-th codomain element (0 = identity) and gets
    weight 1/(|H|(d+1)).
    """
    G, H = f.domain, f.codomain
    d, h = G.order, H.order
    if d > MAX_BUILD_DIMENSION:
        raise CapacityError(f"dimension {d} exceeds {MAX_BUILD_DIMENSION}")
    if (h + 1) * d * d > MAX_BUILD_ENTRIES:
        raise CapacityError(f"{h + 1} bases of dimension {d} exceed the storage cap")
    result = verify_one_uniform(f)
    if not result:
        raise DomainError(f"{f.provenance} is not 1-uniform: witness {result.witness}")

    gc = G.component_table
    chi = character_phases(G, gc, gc)                 # [j, x]
    psi = character_phases(H, H.component_table, f.table)  # [a, x]
    phase = np.mod(psi[:, :, None] + chi.T[None, :, :], 1.0)  # [a, x, j]
    mats = np.empty((h + 1, d, d), dtype=np.complex128)
    mats[0] = np.eye(d)
    mats[1:] = np.exp(1j * TWO_PI * phase) / math.sqrt(d)
    weights = (Fraction(1, d * (d + 1)),) + (Fraction(1, h * (d + 1)),) * h
    prov = {
        "construction": "character-bases",
        "function": f.to_record(),
        "basis_labels": "entry 0 = standard basis; entry a > 0 = character of codomain "
                        "element a-1 (mixed-radix index, 0 = identity)",
    }
    return WeightedBasisFamily(mats, weights, prov)


def standard_mub_family(field_: FiniteField, deduplicate: bool = True) -> WeightedBasisFamily:
    """Complete set of d+1 mutually unbiased bases in dimension d = |field|.

    Odd characteristic uses x -> x^2; characteristic 2 uses the Teichmuller
    lift into GR(4^n), whose d^2 + 1 bases collapse to d + 1 after merging.
    """
    if field_.p != 2:
        return build_design(pn_square(field_))
    family = build_design(teichmuller_function(field_.n))
    return dedupe(family) if deduplicate else family


def mub_family(d: int) -> WeightedBasisFamily:
    if prime_power(d) is None:
        raise DomainError(f"{d} is not a prime power")
    return standard_mub_family(FiniteField.of_order(d))


def dim6_design() -> WeightedBasisFamily:
    """Eight bases in dimension 6: the standard basis and seven bases
    (1/sqrt 6) sum_k exp(2 pi i jk/6) exp(2 pi i a 3^k/7) |k>, a = 1..7."""
    d = 6
    k = np.arange(d)
    jk = np.mod(np.outer(k, k), d) / d                       # [k, j]
    pow3 = np.array([pow(3, int(i), 7) for i in k])
    mats = [np.eye(d, dtype=np.complex128)]
    for a in range(1, 8):
        frac = np.mod(jk + (np.mod(a * pow3, 7) / 7)[:, None], 1.0)
        mats.append(np.exp(1j * TWO_PI * frac) / math.sqrt(d))
    weights = (Fraction(1, 42),) + (Fraction(1, 49),) * 7
    return WeightedBasisFamily(np.array(mats), weights, {"construction": "dim6"})


def standard_basis_family(d: int, copies: int = 1) -> WeightedBasisFamily:
    mats = np.repeat(np.eye(d, dtype=np.complex128)[None], copies, axis=0)
    return WeightedBasisFamily(mats, (Fraction(1, d * copies),) * copies,
                               {"construction": "standard-basis"})


# --------------------------------------------------------------------------
# verification

def welch_bound(d: int, t: int) -> float:
    return 1.0 / math.comb(d + t - 1, t)


def _overlaps(family: WeightedBasisFamily) -> np.ndarray:
    V = family.vectors
    return np.abs(V.conj().T @ V) ** 2


def welch_sum(family: WeightedBasisFamily, t: int) -> float:
    """sum_{a,b} w_a w_b sum_{j,k} |<e_j^a|e_k^b>|^{2t}."""
    if t not in (1, 2, 3):
        raise DomainError("t must be 1, 2 or 3")
    return _welch_core(family.vectors, family.vector_weights, t)


def _welch_core(V: np.ndarray, w: np.ndarray, t: int, block: int = 2048) -> float:
    total = 0.0
    for start in range(0, V.shape[1], block):
        sl = slice(start, start + block)
        lam = np.abs(V[:, sl].conj().T @ V) ** 2
        total += float(w[sl] @ (lam ** t) @ w)
    return total


def symmetric_projector(d: int, t: int) -> np.ndarray:
    """Projector onto the symmetric subspace of (C^d)^{(x) t}."""
    D = d ** t
    eye = np.eye(D).reshape((d,) * t + (D,))
    total = np.zeros((D, D))
    perms = list(itertools.permutations(range(t)))
    for perm in perms:
        total += eye.transpose(tuple(perm) + (t,)).reshape(D, D)
    return total / len(perms)


def moment_operator(family: WeightedBasisFamily, t: int) -> np.ndarray:
    """sum_a w_a sum_j pi(e_j^a)^{(x) t} as a d^t x d^t matrix."""
    d = family.dimension
    if t < 1 or d ** t > MAX_MOMENT_SIZE:
        raise CapacityError(f"d^t = {d ** t} exceeds {MAX_MOMENT_SIZE}")
    V = family.vectors
    K = V
    for _ in range(t - 1):
        K = np.einsum("ik,jk->ijk", K, V).reshape(-1, V.shape[1])
    K = K * np.sqrt(family.vector_weights)
    return K @ K.conj().T


def moment_target(d: int, t: int) -> np.ndarray:
    return symmetric_projector(d, t) / math.comb(d + t - 1, t)


def mub_check(family: WeightedBasisFamily, tol: float = DEFAULT_TOL) -> MubCheck:
    """Count basis pairs whose cross overlaps all equal 1/d within tol."""
    d = family.dimension
    count = 0
    offending = []
    for a, b in itertools.combinations(range(family.size), 2):
        lam = np.abs(family.matrices[a].conj().T @ family.matrices[b]) ** 2
        if np.max(np.abs(lam - 1.0 / d)) <= tol:
            count += 1
        else:
            offending.append((a, b))
    return MubCheck(count, offending)


def _cross_overlap_range(family: WeightedBasisFamily) -> tuple[float | None, float | None]:
    if family.size < 2:
        return None, None
    lam = _overlaps(family)
    d, m = family.dimension, family.size
    mask = np.repeat(np.repeat(~np.eye(m, dtype=bool), d, axis=0), d, axis=1)
    vals = lam[mask]
    return float(vals.min()), float(vals.max())


def verify_design(family: WeightedBasisFamily, t: int = 2,
                  tol: float = DEFAULT_TOL) -> DesignReport:
    """Welch-sum test for every s <= t, cross-checked by the moment operator.

    The Welch verdict is |sum - bound| <= tol * bound.  Because
    ||moment - target||_F^2 = sum - bound, the equivalent moment verdict is
    ||moment - target||_F <= sqrt(tol * bound); it is evaluated whenever
    d^s <= 4096.
    """
    if t not in (1, 2, 3):
        raise DomainError("t must be 1, 2 or 3")
    d = family.dimension
    sums, bounds, resid, mres, verdict, mverdict = {}, {}, {}, {}, {}, {}
    for s in range(1, t + 1):
        bound = welch_bound(d, s)
        value = welch_sum(family, s)
        sums[s], bounds[s], resid[s] = value, bound, value - bound
        verdict[s] = abs(value - bound) <= tol * bound
        if d ** s <= MAX_MOMENT_SIZE:
            norm = float(np.linalg.norm(moment_operator(family, s) - moment_target(d, s)))
            mres[s] = norm
            mverdict[s] = norm <= math.sqrt(tol * bound)
        else:
            mres[s] = None
            mverdict[s] = None
    lo, hi = _cross_overlap_range(family)
    return DesignReport(d, family.size, tol, sums, bounds, resid, mres, verdict, mverdict,
                        mub_check(family).count, lo, hi)


# --------------------------------------------------------------------------
# merging and comparison

def same_basis(A: np.ndarray, B: np.ndarray, tol: float = 1e-8) -> bool:
    """True when the columns of A and B span the same lines up to order and phase."""
    d = A.shape[0]
    lam = np.abs(A.conj().T @ B) ** 2
    return abs(float(np.sum(lam ** 2)) - d) <= tol * d


def dedupe(family: WeightedBasisFamily, tol: float = 1e-8) -> WeightedBasisFamily:
    """Merge bases spanning the same set of lines, summing their weights."""
    kept: list[np.ndarray] = []
    weights: list[Weight] = []
    for M, w in zip(family.matrices, family.weights):
        for i, K in enumerate(kept):
            if same_basis(K, M, tol):
                weights[i] = weights[i] + w
                break
        else:
            kept.append(M)
            weights.append(w)
    if len(kept) == family.size:
        return family
    prov = {**family.provenance, "deduplicated_from": family.size}
    return WeightedBasisFamily(np.array(kept), tuple(weights), prov)


def canonicalize_phases(matrix: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real and positive.

    Idempotent bit for bit: columns already in this form are left untouched.
    """
    out = np.array(matrix, dtype=np.complex128)
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size:
            c = col[nz[0]]
            if c.imag == 0.0 and c.real > 0.0:
                continue
            out[:, j] = col * (abs(c) / c)
            out[nz[0], j] = abs(c)
    return out


def same_line_set(f1: WeightedBasisFamily, f2: WeightedBasisFamily, tol: float = 1e-8,
                  check_weights: bool = True) -> bool:
    """Families equal as weighted collections of bases (each a set of lines)."""
    if f1.size != f2.size or f1.dimension != f2.dimension:
        return False
    unused = list(range(f2.size))
    for M, w in zip(f1.matrices, f1.weights):
        for pos, i in enumerate(unused):
            if same_basis(M, f2.matrices[i], tol) and (
                    not check_weights or abs(float(w) - float(f2.weights[i])) <= 1e-12):
                unused.pop(pos)
                break
        else:
            return False
    return True


# --------------------------------------------------------------------------
# size bounds

def design_bound(t: int, d: int) -> int:
    """Lower bound on the number of points of a t-design in CP^{d-1}."""
    if t < 1 or d < 1:
        raise DomainError("t and d must be positive")
    hi, lo = -(-t // 2), t // 2
    return math.comb(d + hi - 1, hi) * math.comb(d + lo - 1, lo)


def min_bases_upper_bound(d: int, kmax_value: int = 2 ** 20) -> UpperBound:
    """Best constructive upper bound on the number of bases of a weighted 2-design."""
    if not 2 <= d <= 50:
        raise DomainError("d must lie in [2, 50]")
    if prime_power(d):
        return UpperBound(d + 1, f"complete MUBs over F_{d}")
    candidates = []
    k = 1
    while k * d + 1 <= kmax_value:
        if prime_power(k * d + 1):
            candidates.append(UpperBound(k * d + 2, f"exp_function(d={d}, k={k}) into F_{k * d + 1}"))
            break
        k += 1
    n = binomial_bound(d)
    candidates.append(UpperBound(n + 1, f"binomial_function(d={d}, n={n})"))
    return min(candidates, key=lambda b: b.bases)


def bound_table(dmax: int = 50) -> list[tuple[int, UpperBound]]:
    if not 2 <= dmax <= 50:
        raise DomainError("dmax must lie in [2, 50]")
    return [(d, min_bases_upper_bound(d)) for d in range(2, dmax + 1)]


def corpus(include_large: bool = False) -> dict[str, WeightedBasisFamily]:
    """Named families used by the test suite and the CLI examples."""
    from .nonlinear import exp_function
    fams = {
        "mub2": mub_family(2),
        "mub3": mub_family(3),
        "mub4": mub_family(4),
        "mub5": mub_family(5),
        "dim6": dim6_design(),
        "exp4": build_design(exp_function(4, 1)),
    }
    if include_large:
        fams.update({
            "mub7": mub_family(7),
            "mub8": mub_family(8),
            "mub9": mub_family(9),
            "exp10": build_design(exp_function(10, 1)),
        })
    return fams


def family_from_bases(matrices: Sequence[np.ndarray], weights: Sequence[Weight] | None = None,
                      provenance: dict | None = None) -> WeightedBasisFamily:
    """Convenience constructor; default weights are uniform 1/(m d)."""
    mats = np.array(matrices, dtype=np.complex128)
    m, d = mats.shape[0], mats.shape[1]
    if weights is None:
        weights = (Fraction(1, m * d),) * m
    return WeightedBasisFamily(mats, tuple(weights), dict(provenance or {}))
