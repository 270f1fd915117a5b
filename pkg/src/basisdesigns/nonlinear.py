"""Differentially 1-uniform functions between finite abelian groups.

A function f: G -> H is 1-uniform when f(x + a) - f(x) = b has at most one
solution x for every (a, b) != (0, 0).  This module tabulates the known
constructions and checks the property by brute force.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .algebra import (
    AbelianGroup,
    FieldElement,
    FiniteField,
    GaloisRing,
    GroupElement,
    element_of_order,
    prime_power,
    teichmuller_lift,
)
from .exceptions import CapacityError, DomainError, FormatError, StructureError

MAX_VERIFY_ORDER = 2 ** 12
MAX_QUADRUPLE_ORDER = 64


@dataclass(frozen=True, eq=False)
class NonlinearFunction:
    """A tabulated map f: domain -> codomain.

    ``table`` has shape (|domain|, codomain.rank); row i is the value of f at
    the i-th domain element in mixed-radix order.
    """

    domain: AbelianGroup
    codomain: AbelianGroup
    table: np.ndarray
    provenance: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        table = np.array(self.table, dtype=np.int64).reshape(self.domain.order, self.codomain.rank)
        mods = np.array(self.codomain.factors, dtype=np.int64)
        if table.size and (np.any(table < 0) or np.any(table >= mods)):
            raise DomainError("table entry outside the codomain")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_indices(cls, domain: AbelianGroup, codomain: AbelianGroup, values,
                     provenance: str = "custom", meta: dict | None = None) -> "NonlinearFunction":
        """Build from codomain element indices (mixed-radix) rather than components."""
        values = np.asarray(values, dtype=np.int64)
        if values.shape != (domain.order,):
            raise DomainError(f"table length {values.size} != |G| = {domain.order}")
        if np.any(values < 0) or np.any(values >= codomain.order):
            raise DomainError("table entry outside the codomain")
        comps = codomain.component_table[values]
        return cls(domain, codomain, comps, provenance, dict(meta or {}))

    @property
    def values(self) -> np.ndarray:
        """Codomain element indices, one per domain element."""
        return self.codomain.encode(self.table)

    def __call__(self, x: GroupElement) -> GroupElement:
        if x.group != self.domain:
            raise StructureError("argument is not in the domain")
        return self.codomain.element(self.table[x.index])

    def __len__(self) -> int:
        return self.domain.order

    def __repr__(self):
        return f"NonlinearFunction({self.domain} -> {self.codomain}, {self.provenance})"

    def to_record(self) -> dict:
        return {
            "domain": list(self.domain.factors),
            "codomain": list(self.codomain.factors),
            "table": [int(v) for v in self.values],
            "provenance": self.provenance,
            "meta": self.meta,
        }

    @classmethod
    def from_record(cls, record: dict) -> "NonlinearFunction":
        try:
            domain = AbelianGroup(tuple(record["domain"]))
            codomain = AbelianGroup(tuple(record["codomain"]))
            return cls.from_indices(domain, codomain, record["table"],
                                    record.get("provenance", "custom"), record.get("meta", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed function record: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_record(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "NonlinearFunction":
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not a function record: {exc}") from exc
        return cls.from_record(record)


class Witness(NamedTuple):
    """Two distinct solutions x1 < x2 of f(x + a) - f(x) = b."""

    a: GroupElement
    b: GroupElement
    x1: GroupElement
    x2: GroupElement


class UniformityResult(NamedTuple):
    is_uniform: bool
    witness: Witness | None

    def __bool__(self) -> bool:
        return self.is_uniform


def _differences(f: NonlinearFunction, a_index: int) -> np.ndarray:
    G, H = f.domain, f.codomain
    comps = G.component_table
    shifted = G.encode(comps + comps[a_index])
    return H.encode(f.table[shifted] - f.table)


def verify_one_uniform(f: NonlinearFunction) -> UniformityResult:
    """Brute-force check over every shift a != 0.

    On failure the witness is the first violating (a, b) in enumeration order,
    with its two smallest solutions.
    """
    G, H = f.domain, f.codomain
    if G.order > MAX_VERIFY_ORDER:
        raise CapacityError(f"|G| = {G.order} exceeds {MAX_VERIFY_ORDER}")
    for a in range(1, G.order):
        diffs = _differences(f, a)
        uniq, counts = np.unique(diffs, return_counts=True)
        repeated = uniq[counts > 1]
        if repeated.size:
            b = int(repeated[0])
            x1, x2 = np.flatnonzero(diffs == b)[:2]
            return UniformityResult(False, Witness(
                G.from_index(a), H.from_index(b), G.from_index(int(x1)), G.from_index(int(x2))))
    return UniformityResult(True, None)


def quadruple_count(f: NonlinearFunction) -> int:
    """Number of (w, x, y, z) with (w, f(w)) + (x, f(x)) = (y, f(y)) + (z, f(z)).

    Counted as the sum of squared multiplicities of the pair sums, which is
    independent of the difference-based verifier.
    """
    G, H = f.domain, f.codomain
    d = G.order
    if d > MAX_QUADRUPLE_ORDER:
        raise CapacityError(f"|G| = {d} exceeds {MAX_QUADRUPLE_ORDER}")
    gc = G.component_table
    gsum = G.encode(gc[:, None, :] + gc[None, :, :])
    hsum = H.encode(f.table[:, None, :] + f.table[None, :, :])
    keys = gsum.astype(np.int64) * H.order + hsum
    _, counts = np.unique(keys.ravel(), return_counts=True)
    return int(np.sum(counts.astype(np.int64) ** 2))


def lemma_count(d: int) -> int:
    """The trivial-solution count |G|(2|G| - 1)."""
    return d * (2 * d - 1)


# --------------------------------------------------------------------------
# constructions

def _tabulate_field(field_: FiniteField, fn: Callable[[FieldElement], FieldElement],
                    provenance: str, **meta) -> NonlinearFunction:
    G = field_.additive_group
    table = [fn(x).coeffs for x in field_.elements()]
    meta = {"field": field_.describe(), **meta}
    return NonlinearFunction(G, G, table, provenance, meta)


def _reduced_power(x: FieldElement, e: int) -> FieldElement:
    """x**e using x^q = x to keep exponents below q."""
    if x.is_zero:
        return x if e > 0 else x.field.one
    q1 = x.field.order - 1
    return x ** (((e - 1) % q1) + 1)


def pn_square(field_: FiniteField) -> NonlinearFunction:
    """f(x) = x^2 on F_q, q odd."""
    if field_.p == 2:
        raise DomainError("x^2 is not 1-uniform in characteristic 2: "
                          "solutions of f(x+a) - f(x) = b come in pairs {x, x+a}")
    return _tabulate_field(field_, lambda x: x * x, f"pn_square(p={field_.p}, n={field_.n})")


def pn_power(field_: FiniteField, k: int) -> NonlinearFunction:
    """f(x) = x^{p^k + 1} with n / gcd(n, k) odd."""
    p, n = field_.p, field_.n
    if p == 2:
        raise DomainError("characteristic must be odd")
    if k < 1:
        raise DomainError("k must be positive")
    if (n // math.gcd(n, k)) % 2 == 0:
        raise DomainError(f"n/gcd(n,k) = {n // math.gcd(n, k)} is even")
    e = p ** k + 1
    return _tabulate_field(field_, lambda x: _reduced_power(x, e),
                           f"pn_power(p={p}, n={n}, k={k})", exponent=e)


def pn_coset(field_: FiniteField, k: int) -> NonlinearFunction:
    """f(x) = x^{(3^k + 1)/2} over F_{3^n} with k odd and gcd(n, k) = 1."""
    n = field_.n
    if field_.p != 3:
        raise DomainError("requires p = 3")
    if k < 1 or k % 2 == 0:
        raise DomainError(f"k = {k} must be odd and positive")
    if math.gcd(n, k) != 1:
        raise DomainError(f"gcd(n, k) = {math.gcd(n, k)} != 1")
    e = (3 ** k + 1) // 2
    return _tabulate_field(field_, lambda x: _reduced_power(x, e),
                           f"pn_coset(n={n}, k={k})", exponent=e)


def pn_ternary(field_: FiniteField, u: FieldElement | int) -> NonlinearFunction:
    """f(x) = x^10 - u x^6 - u^2 x^2 over F_{3^n}, n odd, u != 0."""
    if field_.p != 3:
        raise DomainError("requires p = 3")
    if field_.n % 2 == 0:
        raise DomainError(f"n = {field_.n} must be odd")
    if not isinstance(u, FieldElement):
        u = field_.element(u)
    if u.field != field_:
        raise StructureError("u is not an element of the field")
    if u.is_zero:
        raise DomainError("u must be nonzero")
    u2 = u * u

    def fn(x):
        return _reduced_power(x, 10) - u * _reduced_power(x, 6) - u2 * _reduced_power(x, 2)

    return _tabulate_field(field_, fn, f"pn_ternary(n={field_.n}, u={list(u.coeffs)})",
                           u=list(u.coeffs))


def exp_function(d: int, k: int = 1) -> NonlinearFunction:
    """f(j) = y^j from Z_d into F_{kd+1}, y of multiplicative order d."""
    if d < 1 or k < 1:
        raise DomainError("d and k must be positive")
    q = k * d + 1
    if prime_power(q) is None:
        raise DomainError(f"k*d + 1 = {q} is not a prime power")
    F = FiniteField.of_order(q)
    y = element_of_order(F, d)
    table = []
    power = F.one
    for _ in range(d):
        table.append(power.coeffs)
        power = power * y
    return NonlinearFunction(AbelianGroup.cyclic(d), F.additive_group, table,
                             f"exp_function(d={d}, k={k})",
                             {"field": F.describe(), "y": list(y.coeffs)})


def binomial_bound(d: int) -> int:
    """Smallest n with n >= 3 (d - 1)^2 / 4."""
    return -(-3 * (d - 1) ** 2 // 4)


def binomial_function(d: int, n: int) -> NonlinearFunction:
    """f(j) = j(j - 1)/2 mod n from Z_d to Z_n."""
    if d <= 2:
        raise DomainError("requires d > 2")
    bound = binomial_bound(d)
    if n < bound:
        raise DomainError(f"n = {n} is below the guaranteed bound ceil(3(d-1)^2/4) = {bound}")
    values = [(j * (j - 1) // 2) % n for j in range(d)]
    return NonlinearFunction.from_indices(AbelianGroup.cyclic(d), AbelianGroup.cyclic(n), values,
                                          f"binomial_function(d={d}, n={n})")


def embed_cyclic(f: NonlinearFunction, n: int) -> NonlinearFunction:
    """Reinterpret residues of a Z_k-valued function as residues in Z_n, n >= 2k - 1."""
    if not f.codomain.is_cyclic:
        raise StructureError("embed_cyclic needs a cyclic codomain; "
                             "apply it to a cyclic factor and recombine with direct_sum")
    k = f.codomain.factors[0]
    if n != k and n < 2 * k - 1:
        raise DomainError(f"n = {n} < 2k - 1 = {2 * k - 1}")
    return NonlinearFunction(f.domain, AbelianGroup.cyclic(n), f.table,
                             f"embed_cyclic({f.provenance}, n={n})", dict(f.meta))


def direct_sum(f1: NonlinearFunction, f2: NonlinearFunction) -> NonlinearFunction:
    """x -> (f1(x), f2(x)); 1-uniform whenever f2 is."""
    if f1.domain != f2.domain:
        raise StructureError("direct_sum needs a common domain")
    if not verify_one_uniform(f2):
        raise DomainError("the second summand must be 1-uniform")
    codomain = AbelianGroup(f1.codomain.factors + f2.codomain.factors)
    table = np.hstack([f1.table, f2.table])
    return NonlinearFunction(f1.domain, codomain, table,
                             f"direct_sum({f1.provenance}, {f2.provenance})",
                             {"summands": [f1.meta, f2.meta]})


def teichmuller_function(n: int) -> NonlinearFunction:
    """x -> Teichmuller lift of x, from F_{2^n} into GR(4^n) written as (Z_4)^n."""
    if n < 1:
        raise DomainError("n must be positive")
    ring = GaloisRing(n)
    F = ring.residue_field
    table = [teichmuller_lift(ring, x).coeffs for x in F.elements()]
    return NonlinearFunction(F.additive_group, ring.additive_group, table,
                             f"teichmuller_function(n={n})",
                             {"field": F.describe(), "ring": ring.describe()})


def z5_to_z6_example() -> NonlinearFunction:
    """The 1-uniform table 0, 1, 0, 2, 2 from Z_5 to Z_6."""
    return NonlinearFunction.from_indices(AbelianGroup.cyclic(5), AbelianGroup.cyclic(6),
                                          [0, 1, 0, 2, 2], "z5_to_z6_example")


def random_function(domain: AbelianGroup, codomain: AbelianGroup,
                    rng: np.random.Generator) -> NonlinearFunction:
    values = rng.integers(0, codomain.order, size=domain.order)
    return NonlinearFunction.from_indices(domain, codomain, values, "random")
