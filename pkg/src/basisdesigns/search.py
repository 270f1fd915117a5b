"""Numerical minimization of the t=2 frame potential over weighted basis families.

Basis a is exp(i H_a) for a Hermitian generator H_a (d^2 real parameters), and
the weights are softmax(logits)/d.  Descent uses central finite-difference
gradients with a backtracking line search and restarts on stall.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .design import DesignReport, WeightedBasisFamily, _welch_core, verify_design, welch_bound
from .exceptions import DomainError

FD_STEP = 1e-5
STALL_WINDOW = 50
STALL_RELATIVE = 1e-12
MAX_HALVINGS = 40


@dataclass(frozen=True)
class SearchConfig:
    dimension: int
    bases: int
    max_iterations: int = 4000
    step: float = 0.5
    tolerance: float = 1e-8
    restarts: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 2 or self.bases < 1:
            raise DomainError("need dimension >= 2 and at least one basis")
        if self.tolerance <= 0 or self.step <= 0 or self.max_iterations < 1 or self.restarts < 1:
            raise DomainError("tolerance, step, iteration and restart budgets must be positive")


@dataclass(frozen=True, eq=False)
class SearchPoint:
    """Flat parameter vector: m blocks of d^2 generator entries, then m logits."""

    dimension: int
    bases: int
    params: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float).copy()
        if p.shape != (self.bases * (self.dimension ** 2 + 1),):
            raise DomainError("parameter vector has the wrong length")
        object.__setattr__(self, "params", p)

    @property
    def logits(self) -> np.ndarray:
        return self.params[self.bases * self.dimension ** 2:]

    def generators(self) -> np.ndarray:
        return _generators(self.params, self.dimension, self.bases)

    def unitaries(self) -> np.ndarray:
        return _unitaries(self.params, self.dimension, self.bases)

    def weights(self) -> np.ndarray:
        return _weights(self.params, self.dimension, self.bases)

    def replace(self, params: np.ndarray) -> "SearchPoint":
        return SearchPoint(self.dimension, self.bases, params)


def _hermitian_index(d: int):
    iu = np.triu_indices(d, 1)
    return iu, len(iu[0])


def _generators(params: np.ndarray, d: int, m: int) -> np.ndarray:
    iu, npairs = _hermitian_index(d)
    blocks = params[: m * d * d].reshape(m, d * d)
    H = np.zeros((m, d, d), dtype=np.complex128)
    idx = np.arange(d)
    H[:, idx, idx] = blocks[:, :d]
    upper = blocks[:, d:d + npairs] + 1j * blocks[:, d + npairs:]
    H[:, iu[0], iu[1]] = upper
    H[:, iu[1], iu[0]] = upper.conj()
    return H


def _unitaries(params: np.ndarray, d: int, m: int) -> np.ndarray:
    vals, vecs = np.linalg.eigh(_generators(params, d, m))
    return np.einsum("aij,aj,akj->aik", vecs, np.exp(1j * vals), vecs.conj())


def _weights(params: np.ndarray, d: int, m: int) -> np.ndarray:
    z = params[m * d * d:]
    e = np.exp(z - z.max())
    return e / e.sum() / d


def _potential(params: np.ndarray, d: int, m: int) -> float:
    U = _unitaries(params, d, m)
    V = np.concatenate(list(U), axis=1)
    w = np.repeat(_weights(params, d, m), d)
    return _welch_core(V, w, 2)


def realize(point: SearchPoint) -> WeightedBasisFamily:
    U = point.unitaries()
    w = point.weights()
    return WeightedBasisFamily(U, tuple(float(x) for x in w),
                               {"construction": "numerical-search"})


def potential(point: SearchPoint) -> float:
    """Frame potential sum_{a,b} w_a w_b sum_{j,k} |<e_j^a|e_k^b>|^4."""
    return _potential(point.params, point.dimension, point.bases)


def _gradient(params: np.ndarray, d: int, m: int, step: float) -> np.ndarray:
    g = np.empty_like(params)
    for i in range(params.size):
        old = params[i]
        params[i] = old + step
        up = _potential(params, d, m)
        params[i] = old - step
        down = _potential(params, d, m)
        params[i] = old
        g[i] = (up - down) / (2 * step)
    return g


def gradient(point: SearchPoint, step: float = FD_STEP) -> np.ndarray:
    return _gradient(point.params.copy(), point.dimension, point.bases, step)


def random_point(d: int, m: int, rng: np.random.Generator) -> SearchPoint:
    gens = rng.normal(scale=math.pi / 2, size=m * d * d)
    logits = rng.normal(scale=0.1, size=m)
    return SearchPoint(d, m, np.concatenate([gens, logits]))


def point_from_family(family: WeightedBasisFamily) -> SearchPoint:
    """Parameters realizing the given bases and weights (up to rounding)."""
    d, m = family.dimension, family.size
    iu, npairs = _hermitian_index(d)
    blocks = []
    for U in family.matrices:
        T, Z = scipy.linalg.schur(U, output="complex")
        H = (Z * np.angle(np.diag(T))) @ Z.conj().T
        H = (H + H.conj().T) / 2
        blocks.append(np.concatenate([np.real(np.diag(H)), H[iu].real, H[iu].imag]))
    logits = np.log(family.weight_values * d)
    return SearchPoint(d, m, np.concatenate(blocks + [logits]))


@dataclass
class SearchResult:
    point: SearchPoint
    potential: float
    bound: float
    certified: bool
    restart: int
    iterations: int
    log: list[tuple[int, int, float, float]] = field(repr=False, default_factory=list)

    @property
    def gap(self) -> float:
        return self.potential - self.bound

    def log_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["restart", "iteration", "potential", "step"])
        for row in self.log:
            writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
        return buf.getvalue()


def _descend(config: SearchConfig, restart: int):
    d, m = config.dimension, config.bases
    bound = welch_bound(d, 2)
    rng = np.random.default_rng([config.seed, restart])
    params = random_point(d, m, rng).params
    value = _potential(params, d, m)
    step = config.step
    history = [value]
    log = [(restart, 0, value, step)]
    it = 0
    for it in range(1, config.max_iterations + 1):
        if value - bound <= config.tolerance:
            break
        g = _gradient(params, d, m, FD_STEP)
        trial_step = step
        for _ in range(MAX_HALVINGS):
            trial = params - trial_step * g
            trial_value = _potential(trial, d, m)
            if trial_value < value:
                break
            trial_step /= 2
        else:
            break
        params, value = trial, trial_value
        step = min(trial_step * 2, 1e3)
        history.append(value)
        log.append((restart, it, value, trial_step))
        if len(history) > STALL_WINDOW:
            past = history[-STALL_WINDOW - 1]
            if (past - value) <= STALL_RELATIVE * abs(past):
                break
    return params, value, it, log


def minimize(config: SearchConfig, threads: int = 1) -> SearchResult:
    """Best point over the restarts; the first certified restart wins if any.

    Restart r starts from ``default_rng([seed, r])``, so the outcome does not
    depend on ``threads``.
    """
    d, m = config.dimension, config.bases
    bound = welch_bound(d, 2)
    outcomes = {}
    log: list = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _descend(config, r), range(config.restarts)))
        for r, res in enumerate(results):
            outcomes[r] = res
            if res[1] - bound <= config.tolerance:
                break
    else:
        for r in range(config.restarts):
            outcomes[r] = _descend(config, r)
            if outcomes[r][1] - bound <= config.tolerance:
                break
    for r in sorted(outcomes):
        log.extend(outcomes[r][3])
    certified_runs = [r for r in sorted(outcomes) if outcomes[r][1] - bound <= config.tolerance]
    if certified_runs:
        best = certified_runs[0]
    else:
        best = min(sorted(outcomes), key=lambda r: outcomes[r][1])
    params, value, iters, _ = outcomes[best]
    return SearchResult(SearchPoint(d, m, params), value, bound,
                        value - bound <= config.tolerance, best, iters, log)


def certify(point: SearchPoint, tol: float) -> DesignReport:
    """verify_design at t=2 with the absolute gap tolerance expressed relative to the bound."""
    bound = welch_bound(point.dimension, 2)
    return verify_design(realize(point), 2, tol / bound)
