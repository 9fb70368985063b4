"""Transmissions over variable subsets, mutual redundancy, and its decomposition.

Sign conventions, fixed throughout:

* transmission T(S) is the inclusion-exclusion sum over nonempty sub-subsets U
  of S, with sign (-1)^(|U|+1) on H(U). Pairs give ordinary mutual information
  (nonnegative); for three or more variables the sign depends on the
  configuration.
* mutual redundancy R_n = (-1)^(1+n) * T over the full n-variable subset, so
  R is negative exactly when shared structure reduces prevailing uncertainty.
* krippendorff_q uses the opposite alternation, Q = (-1)^n * T = -R_n, and is
  provided separately so both conventions are first-class.

All sums of entropy terms use math.fsum (exactly rounded), which makes the
subset measures invariant under reordering of the requested subset.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core_entropy import Base, JointTable, _check_subset, entropy, marginalize
from .errors import IdentityCheckError, SubsetTooLargeError, UnknownVariableError

# Hard cap on subset size: 2^12 = 4096 marginalizations. Beyond this the
# enumeration is refused rather than silently running for hours.
MAX_SUBSET = 12

# |R| at or below this is labeled "balanced" rather than signed.
BALANCED_TOL = 1e-9

_PAIR_FLOOR = -1e-12  # numerical floor for pair transmissions

REGIME_SELF_ORGANIZATION = "self-organization"
REGIME_ORGANIZATION = "organization"
REGIME_BALANCED = "balanced"


@dataclass(frozen=True)
class TransmissionValue:
    """A transmission (interaction information) over an ordered variable subset."""

    subset: tuple[str, ...]
    value: float
    base: Base

    def __post_init__(self):
        object.__setattr__(self, "subset", tuple(self.subset))
        object.__setattr__(self, "base", Base(self.base))
        if len(self.subset) == 2 and self.value < _PAIR_FLOOR:
            raise IdentityCheckError(
                f"pair transmission {self.value} below the nonnegativity floor"
            )


@dataclass(frozen=True)
class Decomposition:
    """All subset transmissions plus the two-term split of the mutual redundancy.

    ``negative_term`` is H(joint) - sum of single-variable entropies (never
    positive, by subadditivity). ``config_term`` is the remainder,
    redundancy - negative_term, equal to the alternating sum of lower-order
    transmissions. ``regime`` labels the sign of the redundancy.
    """

    n: int
    base: Base
    subset_transmissions: Mapping[tuple[str, ...], float]
    negative_term: float
    config_term: float
    redundancy: float
    regime: str

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "base": self.base.value,
            "transmissions": {
                ",".join(k): v for k, v in self.subset_transmissions.items()
            },
            "negative_term": self.negative_term,
            "config_term": self.config_term,
            "redundancy": self.redundancy,
            "regime": self.regime,
        }
        if self.n >= 4 and self.config_term < -BALANCED_TOL:
            out["config_term_negative"] = True
        return out


def _guarded_subset(table: JointTable, subset: Sequence[str], min_size: int) -> tuple[str, ...]:
    names = _check_subset(table, subset)
    if len(names) < min_size:
        raise UnknownVariableError(
            f"need at least {min_size} variables, got {len(names)}"
        )
    if len(names) > MAX_SUBSET:
        raise SubsetTooLargeError(
            f"subset of {len(names)} variables exceeds the cap of {MAX_SUBSET} "
            f"(2^{len(names)} sub-subsets)"
        )
    return names


def _entropy_map(
    table: JointTable, names: tuple[str, ...], base: Base
) -> dict[frozenset, float]:
    """Entropy of every nonempty sub-subset of ``names``, keyed by frozenset.

    Marginal entropies are computed once per sub-subset from a single reduced
    table; the memo is call-local, so callers stay pure.
    """
    canonical = tuple(sorted(names, key=table.index))
    root = marginalize(table, canonical)
    out: dict[frozenset, float] = {}
    for r in range(1, len(canonical) + 1):
        for combo in itertools.combinations(canonical, r):
            out[frozenset(combo)] = entropy(marginalize(root, combo), base).value
    return out


def _interaction_from_map(hmap: Mapping[frozenset, float], names: tuple[str, ...]) -> float:
    terms = []
    for r in range(1, len(names) + 1):
        sign = 1.0 if r % 2 == 1 else -1.0
        for combo in itertools.combinations(names, r):
            terms.append(sign * hmap[frozenset(combo)])
    return math.fsum(terms) + 0.0


def _redundancy_sign(n: int) -> float:
    return 1.0 if n % 2 == 1 else -1.0  # (-1)^(1+n)


def transmission(
    table: JointTable, subset: Sequence[str], base: Base = Base.BITS
) -> TransmissionValue:
    """Transmission over ``subset`` by inclusion-exclusion on subset entropies.

    A single variable yields its own entropy; a pair yields mutual
    information; larger subsets yield signed interaction information.
    """
    base = Base(base)
    names = _guarded_subset(table, subset, min_size=1)
    hmap = _entropy_map(table, names, base)
    return TransmissionValue(names, _interaction_from_map(hmap, names), base)


def mutual_redundancy(
    table: JointTable, subset: Sequence[str], base: Base = Base.BITS
) -> float:
    """R_n = (-1)^(1+n) * transmission over the n variables of ``subset``."""
    names = _guarded_subset(table, subset, min_size=2)
    t = transmission(table, names, base)
    return _redundancy_sign(len(names)) * t.value + 0.0


def regime_label(redundancy: float, tol: float = BALANCED_TOL) -> str:
    """Sign reading of a redundancy value."""
    if abs(redundancy) <= tol:
        return REGIME_BALANCED
    return REGIME_SELF_ORGANIZATION if redundancy < 0 else REGIME_ORGANIZATION


def decompose(
    table: JointTable, subset: Sequence[str], base: Base = Base.BITS
) -> Decomposition:
    """Split the mutual redundancy into its guaranteed-negative and configurational parts.

    The negative term comes straight from subadditivity of the joint entropy;
    the configurational term is the alternating sum of all lower-order subset
    transmissions. Both the identity-based and the direct evaluation of the
    configurational term are computed and must agree within 1e-9.
    """
    base = Base(base)
    names = _guarded_subset(table, subset, min_size=2)
    n = len(names)
    hmap = _entropy_map(table, names, base)

    t_map: dict[tuple[str, ...], float] = {}
    for r in range(2, n + 1):
        for combo in itertools.combinations(names, r):
            t_map[combo] = _interaction_from_map(hmap, combo)

    singles = math.fsum(hmap[frozenset((nm,))] for nm in names)
    negative_term = hmap[frozenset(names)] - singles + 0.0
    if negative_term > 1e-12:
        raise IdentityCheckError(
            f"subadditivity violated: joint exceeds marginals by {negative_term}"
        )

    redundancy = _redundancy_sign(n) * t_map[names] + 0.0
    config_term = redundancy - negative_term + 0.0

    # Independent evaluation: alternating sum of transmissions of sizes 2..n-1,
    # sign (-1)^k for size k.
    alt_terms = []
    for r in range(2, n):
        sign = 1.0 if r % 2 == 0 else -1.0
        for combo in itertools.combinations(names, r):
            alt_terms.append(sign * t_map[combo])
    config_check = math.fsum(alt_terms) + 0.0
    if abs(config_term - config_check) > 1e-9:
        raise IdentityCheckError(
            f"configurational term mismatch: {config_term} vs {config_check}"
        )

    return Decomposition(
        n=n,
        base=base,
        subset_transmissions=t_map,
        negative_term=negative_term,
        config_term=config_term,
        redundancy=redundancy,
        regime=regime_label(redundancy),
    )


def krippendorff_q(
    table: JointTable, subset: Sequence[str], base: Base = Base.BITS
) -> float:
    """Alternating subset-entropy sum with sign (-1)^(1 + n - |X|) on H(X).

    The empty subset contributes H = 0. Equals -mutual_redundancy for every n.
    """
    base = Base(base)
    names = _guarded_subset(table, subset, min_size=2)
    n = len(names)
    hmap = _entropy_map(table, names, base)
    terms = []
    for r in range(1, n + 1):
        sign = 1.0 if (1 + n - r) % 2 == 0 else -1.0
        for combo in itertools.combinations(names, r):
            terms.append(sign * hmap[frozenset(combo)])
    return math.fsum(terms) + 0.0


def subadditivity_gap(
    table: JointTable, subset: Sequence[str], base: Base = Base.BITS
) -> float:
    """sum of single-variable entropies minus the joint entropy; never below -1e-12."""
    base = Base(base)
    names = _guarded_subset(table, subset, min_size=2)
    hmap = _entropy_map(table, names, base)
    singles = math.fsum(hmap[frozenset((nm,))] for nm in names)
    return singles - hmap[frozenset(names)] + 0.0


def transmission_series_check(
    table: JointTable, subset: Sequence[str], base: Base = Base.BITS
) -> float:
    """Difference between the alternating transmission series and the subadditivity gap.

    The series sums T over every sub-subset of size 2..n with sign (-1)^k for
    size k; by construction it must reproduce the gap, so the returned
    difference is a machine-checkable identity (|diff| <= 1e-9 on any table).
    """
    base = Base(base)
    names = _guarded_subset(table, subset, min_size=2)
    n = len(names)
    hmap = _entropy_map(table, names, base)
    series_terms = []
    for r in range(2, n + 1):
        sign = 1.0 if r % 2 == 0 else -1.0
        for combo in itertools.combinations(names, r):
            series_terms.append(sign * _interaction_from_map(hmap, combo))
    series = math.fsum(series_terms)
    singles = math.fsum(hmap[frozenset((nm,))] for nm in names)
    gap = singles - hmap[frozenset(names)]
    return series - gap + 0.0
