"""Joint categorical distributions and single-distribution entropy measures.

Tables hold raw nonnegative weights, so one object serves counts and
probabilities alike; weights are normalized on read. Every value is immutable
after construction and every operation is a pure function, safe to share
across threads.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    IdentityCheckError,
    InvalidTableError,
    UndefinedRedundancyError,
    UnknownVariableError,
)

BOLTZMANN_J_PER_K = 1.380649e-23  # SI exact value

# Probability-mass closure tolerance for a valid table.
_MASS_TOL = 1e-12


class Base(str, enum.Enum):
    """Logarithm base used as the entropy unit."""

    BITS = "bits"
    NATS = "nats"
    HARTLEYS = "hartleys"


class SupportMode(str, enum.Enum):
    """What counts as the number of possible outcomes N in log(N)."""

    ALPHABET = "alphabet"  # product of the declared alphabet sizes
    OBSERVED = "observed"  # number of cells with positive weight


# Per-base log functions; using the native log keeps uniform/deterministic
# cases exact (log2 of powers of two is exact in binary floating point).
_LOG_FN = {Base.BITS: np.log2, Base.NATS: np.log, Base.HARTLEYS: np.log10}
# Natural log of each unit's base, for unit conversion.
_LN_OF_UNIT = {Base.BITS: math.log(2.0), Base.NATS: 1.0, Base.HARTLEYS: math.log(10.0)}


@dataclass(frozen=True)
class VariableSpec:
    """A named categorical variable with a fixed, ordered alphabet."""

    name: str
    alphabet: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if not self.name:
            raise InvalidTableError("variable name must be nonempty")
        if len(self.alphabet) < 1:
            raise InvalidTableError(f"variable {self.name!r} has an empty alphabet")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise InvalidTableError(f"variable {self.name!r} has duplicate category labels")

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def to_dict(self) -> dict:
        return {"name": self.name, "alphabet": list(self.alphabet)}


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense n-way contingency table over named categorical variables.

    ``cells`` stores nonnegative weights with one axis per variable, axis
    order matching ``variables``. The array is frozen after validation.
    """

    variables: tuple[VariableSpec, ...]
    cells: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        object.__setattr__(self, "variables", variables)
        if len(variables) < 1:
            raise InvalidTableError("a table needs at least one variable")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise InvalidTableError(f"duplicate variable names: {names}")
        cells = np.ascontiguousarray(self.cells, dtype=np.float64)
        expected = tuple(v.size for v in variables)
        if cells.shape != expected:
            raise InvalidTableError(
                f"cell array shape {cells.shape} does not match alphabet sizes {expected}"
            )
        if not np.all(np.isfinite(cells)):
            raise InvalidTableError("cells must be finite")
        if np.any(cells < 0):
            raise InvalidTableError("cells must be nonnegative")
        total = float(cells.sum())
        if total <= 0.0:
            raise InvalidTableError("table total must be positive")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "total", total)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells.shape

    def index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise UnknownVariableError(f"unknown variable {name!r}; table has {list(self.names)}")

    def probabilities(self) -> np.ndarray:
        """Weight-normalized probability view (sums to 1)."""
        return self.cells / self.total

    def to_dict(self) -> dict:
        return {
            "variables": [v.to_dict() for v in self.variables],
            "cells": [float(c) for c in self.cells.ravel(order="C")],
            "total": self.total,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> "JointTable":
        try:
            variables = tuple(
                VariableSpec(v["name"], tuple(v["alphabet"])) for v in data["variables"]
            )
            flat = np.asarray(data["cells"], dtype=np.float64)
        except (KeyError, TypeError) as exc:
            raise InvalidTableError(f"malformed table document: {exc}") from exc
        shape = tuple(v.size for v in variables)
        n_cells = int(np.prod(shape)) if variables else 0
        if flat.ndim != 1 or flat.size != n_cells:
            raise InvalidTableError(
                f"expected {n_cells} cells (row-major), got {flat.size}"
            )
        table = cls(variables, flat.reshape(shape))
        declared = data.get("total")
        if declared is not None and not math.isclose(
            float(declared), table.total, rel_tol=1e-9, abs_tol=1e-9
        ):
            raise InvalidTableError(
                f"declared total {declared} disagrees with cell sum {table.total}"
            )
        return table

    @classmethod
    def from_json(cls, text: str) -> "JointTable":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EntropyValue:
    """An entropy quantity together with its unit."""

    value: float
    base: Base

    def __post_init__(self):
        object.__setattr__(self, "base", Base(self.base))
        if not math.isfinite(self.value):
            raise InvalidTableError("entropy value must be finite")


def _check_subset(table: JointTable, subset: Sequence[str]) -> tuple[str, ...]:
    names = tuple(subset)
    if len(names) == 0:
        raise UnknownVariableError("variable subset must be nonempty")
    if len(set(names)) != len(names):
        raise UnknownVariableError(f"duplicate names in subset: {list(names)}")
    for n in names:
        table.index(n)  # raises UnknownVariableError
    return names


def entropy(table: JointTable, base: Base = Base.BITS) -> EntropyValue:
    """Shannon entropy -sum(p log p) over the table's cells.

    Cells with zero weight contribute nothing (0 log 0 := 0).
    """
    base = Base(base)
    p = table.probabilities().ravel()
    p = p[p > 0.0]
    h = float(-np.sum(p * _LOG_FN[base](p)))
    return EntropyValue(h + 0.0, base)  # +0.0 normalizes -0.0


def max_entropy(
    table: JointTable,
    support_mode: SupportMode = SupportMode.ALPHABET,
    base: Base = Base.BITS,
) -> EntropyValue:
    """log(N) where N is the number of possible outcomes under ``support_mode``."""
    base = Base(base)
    support_mode = SupportMode(support_mode)
    if support_mode is SupportMode.ALPHABET:
        n = 1
        for v in table.variables:
            n *= v.size
    else:
        n = int(np.count_nonzero(table.cells))
        if n == 0:
            raise InvalidTableError("observed support is empty")
    return EntropyValue(float(_LOG_FN[base](n)) + 0.0, base)


def shannon_redundancy(
    table: JointTable, support_mode: SupportMode = SupportMode.ALPHABET
) -> float:
    """Unused fraction of channel capacity, (H_max - H) / H_max.

    Base-independent; raises when H_max is zero (single-outcome capacity).
    """
    h = entropy(table, Base.BITS).value
    h_max = max_entropy(table, support_mode, Base.BITS).value
    if h_max == 0.0:
        raise UndefinedRedundancyError(
            "redundancy is undefined for a single-outcome capacity (H_max = 0)"
        )
    r = (h_max - h) / h_max
    if r < -1e-9 or r > 1.0 + 1e-9:
        raise IdentityCheckError(f"redundancy {r} escaped [0, 1]")  # pragma: no cover
    return min(1.0, max(0.0, r))


def marginalize(table: JointTable, subset: Sequence[str]) -> JointTable:
    """Sum out all variables not in ``subset``; result axes follow subset order."""
    names = _check_subset(table, subset)
    keep = [table.index(n) for n in names]
    drop = tuple(i for i in range(len(table.variables)) if i not in keep)
    summed = table.cells.sum(axis=drop) if drop else table.cells.copy()
    # axes of `summed` are the kept ones in ascending table order
    ascending = sorted(keep)
    perm = [ascending.index(i) for i in keep]
    out = np.ascontiguousarray(np.transpose(summed, perm))
    return JointTable(tuple(table.variables[i] for i in keep), out)


def conditional_entropy(
    table: JointTable,
    targets: Sequence[str],
    given: Sequence[str] = (),
    base: Base = Base.BITS,
) -> EntropyValue:
    """H(targets | given) via the chain identity H(T,G) - H(G)."""
    base = Base(base)
    t_names = _check_subset(table, targets)
    g_names = tuple(given)
    overlap = set(t_names) & set(g_names)
    if overlap:
        raise UnknownVariableError(f"targets and given overlap: {sorted(overlap)}")
    h_joint = entropy(marginalize(table, t_names + g_names), base).value
    h_given = entropy(marginalize(table, g_names), base).value if g_names else 0.0
    return EntropyValue(h_joint - h_given + 0.0, base)


def to_thermodynamic(h: EntropyValue) -> float:
    """Boltzmann-coupled entropy k_B * H in Joule/Kelvin (H converted to nats)."""
    return BOLTZMANN_J_PER_K * rebase(h, Base.NATS).value


def rebase(h: EntropyValue, new_base: Base) -> EntropyValue:
    """Convert an entropy value between logarithm bases."""
    new_base = Base(new_base)
    factor = _LN_OF_UNIT[h.base] / _LN_OF_UNIT[new_base]
    return EntropyValue(h.value * factor + 0.0, new_base)
