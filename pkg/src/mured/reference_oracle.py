"""Second-path computations and canonical fixtures for identity checking.

The oracle computes transmissions by the conditioning recursion
T(S + k) = T(S) - T(S | k) over conditional entropies, never by the
inclusion-exclusion sum the main path uses. Agreement between the two routes
is therefore evidence, not tautology. Fixtures pin the handful of exactly
known values (the two printed similarity numbers, the parity and copy
triples, independence) with their provenance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core_entropy import (
    Base,
    JointTable,
    SupportMode,
    VariableSpec,
    conditional_entropy,
    entropy,
    max_entropy,
    shannon_redundancy,
)
from .errors import InvalidTableError, MuredError, UnknownVariableError
from .multivariate import (
    decompose,
    krippendorff_q,
    mutual_redundancy,
    subadditivity_gap,
    transmission,
    transmission_series_check,
)
from .vector_space import IncidenceMatrix, cosine, pearson

_ORACLE_MAX = 8


def oracle_transmission(
    table: JointTable, subset: Sequence[str], base: Base = Base.BITS
) -> float:
    """Transmission via the conditioning recursion; independent of the main path.

    Base case: T(a;b | G) = H(a|G) + H(b|G) - H(a,b|G). Recursive case:
    T(S + k | G) = T(S | G) - T(S | G + k). Conditioning order does not
    matter (checked as a property, not assumed).
    """
    base = Base(base)
    names = tuple(subset)
    if not 2 <= len(names) <= _ORACLE_MAX:
        raise UnknownVariableError(
            f"oracle handles subsets of 2..{_ORACLE_MAX} variables, got {len(names)}"
        )
    for n in names:
        table.index(n)

    def ce(targets: tuple[str, ...], given: tuple[str, ...]) -> float:
        return conditional_entropy(table, targets, given, base).value

    def t(sub: tuple[str, ...], given: tuple[str, ...]) -> float:
        if len(sub) == 2:
            a, b = sub
            return ce((a,), given) + ce((b,), given) - ce((a, b), given)
        rest, k = sub[:-1], sub[-1]
        return t(rest, given) - t(rest, given + (k,))

    return t(names, ()) + 0.0


def random_table(
    n_vars: int,
    max_categories: int,
    seed: int,
    zero_fraction: float = 0.0,
) -> JointTable:
    """Reproducible pseudo-random table (PCG64 from the given seed).

    Alphabet sizes are drawn per variable in [2, max_categories]; cell
    weights lie in [0.1, 1) so nothing vanishes by accident, then exactly
    round(zero_fraction * n_cells) randomly chosen cells are forced to 0.
    """
    if not 2 <= n_vars <= 6:
        raise InvalidTableError(f"n_vars must be in [2, 6], got {n_vars}")
    if not 2 <= max_categories <= 6:
        raise InvalidTableError(f"max_categories must be in [2, 6], got {max_categories}")
    if not 0.0 <= zero_fraction <= 1.0:
        raise InvalidTableError(f"zero_fraction must be in [0, 1], got {zero_fraction}")
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, max_categories + 1, size=n_vars)
    shape = tuple(int(s) for s in sizes)
    n_cells = int(np.prod(shape))
    n_zero = int(round(zero_fraction * n_cells))
    if n_zero >= n_cells:
        raise InvalidTableError(
            f"zero_fraction {zero_fraction} would empty the table ({n_cells} cells)"
        )
    cells = 0.1 + 0.9 * rng.random(shape)
    if n_zero:
        idx = rng.choice(n_cells, size=n_zero, replace=False)
        flat = cells.ravel()
        flat[idx] = 0.0
        cells = flat.reshape(shape)
    variables = tuple(
        VariableSpec(f"x{i + 1}", tuple(f"c{j}" for j in range(shape[i])))
        for i in range(n_vars)
    )
    return JointTable(variables, cells)


def sym2x2_eigenpairs(matrix) -> list[tuple[float, np.ndarray]]:
    """Closed-form eigenpairs of a symmetric 2x2 matrix, largest first."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (2, 2) or abs(m[0, 1] - m[1, 0]) > 1e-12:
        raise InvalidTableError("closed form needs a symmetric 2x2 matrix")
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    mid = (a + c) / 2.0
    rad = math.hypot((a - c) / 2.0, b)
    pairs = []
    for lam in (mid + rad, mid - rad):
        if b == 0.0:
            v = np.array([1.0, 0.0]) if abs(a - lam) <= abs(c - lam) else np.array([0.0, 1.0])
        else:
            v = np.array([b, lam - a])
        v = v / np.linalg.norm(v)
        i = int(np.argmax(np.abs(v)))
        if v[i] < 0:
            v = -v
        pairs.append((float(lam), v))
    return pairs


@dataclass(frozen=True)
class ExpectedValue:
    """A pinned value with its provenance and comparison tolerance."""

    value: float
    provenance: str
    tol: float = 1e-9

    def to_dict(self) -> dict:
        return {"value": self.value, "provenance": self.provenance, "tol": self.tol}


@dataclass(frozen=True)
class Fixture:
    """Canonical input with a map of measure expressions to expected values.

    Measure expressions: plain names like ``entropy`` act on the table;
    ``transmission:a,b,c`` style names take a variable subset; ``pearson:A|B``
    and ``cosine:A|B`` compare two rows of the incidence matrix.
    """

    name: str
    expected: Mapping[str, ExpectedValue]
    table: JointTable | None = None
    matrix: IncidenceMatrix | None = None

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.table is not None:
            out.update(self.table.to_dict())
        if self.matrix is not None:
            out["matrix"] = {
                "row_labels": list(self.matrix.row_labels),
                "column_labels": list(self.matrix.column_labels),
                "entries": [[float(x) for x in row] for row in self.matrix.entries],
            }
        out["expected"] = {k: v.to_dict() for k, v in sorted(self.expected.items())}
        return out


def evaluate_measure(fixture: Fixture, key: str) -> float:
    """Compute one expected-map entry through the main modules."""
    name, _, arg = key.partition(":")
    if name in ("pearson", "cosine"):
        if fixture.matrix is None:
            raise MuredError(f"fixture {fixture.name!r} has no incidence matrix")
        left, _, right = arg.partition("|")
        u = fixture.matrix.row(left)
        v = fixture.matrix.row(right)
        return pearson(u, v) if name == "pearson" else cosine(u, v)
    if fixture.table is None:
        raise MuredError(f"fixture {fixture.name!r} has no table")
    table = fixture.table
    if name == "entropy":
        return entropy(table).value
    if name == "max_entropy":
        return max_entropy(table, SupportMode.ALPHABET).value
    if name == "max_entropy_observed":
        return max_entropy(table, SupportMode.OBSERVED).value
    if name == "shannon_redundancy":
        return shannon_redundancy(table, SupportMode.ALPHABET)
    subset = tuple(arg.split(",")) if arg else table.names
    if name == "transmission":
        return transmission(table, subset).value
    if name == "mutual_redundancy":
        return mutual_redundancy(table, subset)
    if name == "krippendorff_q":
        return krippendorff_q(table, subset)
    if name == "subadditivity_gap":
        return subadditivity_gap(table, subset)
    if name == "negative_term":
        return decompose(table, subset).negative_term
    if name == "config_term":
        return decompose(table, subset).config_term
    raise MuredError(f"unknown measure expression {key!r}")


def _uniform_pair() -> JointTable:
    v = (VariableSpec("x1", ("0", "1")), VariableSpec("x2", ("0", "1")))
    return JointTable(v, np.full((2, 2), 1.0))


def _copied_pair() -> JointTable:
    v = (VariableSpec("x1", ("0", "1")), VariableSpec("x2", ("0", "1")))
    return JointTable(v, np.array([[1.0, 0.0], [0.0, 1.0]]))


def xor_triple() -> JointTable:
    """Two independent fair bits and their parity: 4 equally likely outcomes."""
    cells = np.zeros((2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            cells[a, b, a ^ b] = 1.0
    v = tuple(VariableSpec(f"x{i}", ("0", "1")) for i in (1, 2, 3))
    return JointTable(v, cells)


def copy_triple() -> JointTable:
    """Three perfectly copied fair bits: mass only on (0,0,0) and (1,1,1)."""
    cells = np.zeros((2, 2, 2))
    cells[0, 0, 0] = 1.0
    cells[1, 1, 1] = 1.0
    v = tuple(VariableSpec(n, ("0", "1")) for n in ("a", "b", "c"))
    return JointTable(v, cells)


def independent_triple() -> JointTable:
    v = tuple(VariableSpec(n, ("0", "1")) for n in ("a", "b", "c"))
    return JointTable(v, np.full((2, 2, 2), 1.0))


def appendix_matrix() -> IncidenceMatrix:
    """The two-firm incidence matrix behind the pinned similarity values."""
    return IncidenceMatrix(
        ("Firm A", "Firm B"),
        ("A", "B", "C1", "C2", "C3"),
        np.array([[1, 0, 1, 0, 1], [0, 1, 1, 0, 1]], dtype=float),
    )


def canonical_fixtures() -> list[Fixture]:
    """The pinned fixture set; every expected value carries its provenance."""
    fixtures = []

    fixtures.append(
        Fixture(
            name="appendix-firms",
            matrix=appendix_matrix(),
            expected={
                "pearson:Firm A|Firm B": ExpectedValue(
                    1.0 / 6.0, "paper: printed correlation 0.167", tol=1e-3
                ),
                "cosine:Firm A|Firm B": ExpectedValue(
                    2.0 / 3.0, "paper: printed cosine 0.667", tol=1e-3
                ),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="uniform4",
            table=JointTable((VariableSpec("x", ("a", "b", "c", "d")),), np.full(4, 1.0)),
            expected={
                "entropy": ExpectedValue(2.0, "trivial: log2 of 4 equal cells", tol=1e-12),
                "max_entropy": ExpectedValue(2.0, "trivial: log2 4", tol=1e-12),
                "shannon_redundancy": ExpectedValue(0.0, "trivial: H equals H_max", tol=1e-12),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="deterministic8",
            table=JointTable(
                (VariableSpec("x", tuple("abcdefgh")),),
                np.array([8.0, 0, 0, 0, 0, 0, 0, 0]),
            ),
            expected={
                "entropy": ExpectedValue(0.0, "trivial: single outcome", tol=1e-12),
                "shannon_redundancy": ExpectedValue(1.0, "trivial: H = 0", tol=1e-12),
                "max_entropy_observed": ExpectedValue(0.0, "trivial: one nonzero cell", tol=1e-12),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="skew3",
            table=JointTable(
                (VariableSpec("x", ("a", "b", "c")),), np.array([0.5, 0.25, 0.25])
            ),
            expected={
                "entropy": ExpectedValue(
                    1.5, "derived: hand evaluation of -sum p log2 p", tol=1e-12
                ),
                "shannon_redundancy": ExpectedValue(
                    1.0 - 1.5 / math.log2(3.0),
                    "derived: 1 - 1.5/log2(3) from the entropy above",
                    tol=1e-12,
                ),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="independent-pair",
            table=_uniform_pair(),
            expected={
                "transmission:x1,x2": ExpectedValue(0.0, "trivial: independence", tol=1e-12),
                "mutual_redundancy:x1,x2": ExpectedValue(0.0, "trivial: independence", tol=1e-12),
                "krippendorff_q:x1,x2": ExpectedValue(0.0, "trivial: independence", tol=1e-12),
                "subadditivity_gap:x1,x2": ExpectedValue(0.0, "trivial: independence", tol=1e-12),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="copied-pair",
            table=_copied_pair(),
            expected={
                "transmission:x1,x2": ExpectedValue(
                    1.0, "trivial: H1 + H2 - H12 = 1 + 1 - 1", tol=1e-12
                ),
                "mutual_redundancy:x1,x2": ExpectedValue(
                    -1.0, "paper: pair redundancy is the negated transmission", tol=1e-12
                ),
                "krippendorff_q:x1,x2": ExpectedValue(
                    1.0, "derived: expand the alternating sum for two variables", tol=1e-12
                ),
                "subadditivity_gap:x1,x2": ExpectedValue(
                    1.0, "trivial: 2 - 1", tol=1e-12
                ),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="xor",
            table=xor_triple(),
            expected={
                "transmission:x1,x2,x3": ExpectedValue(
                    -1.0, "derived: brute-force subset entropies 1+1+1-2-2-2+2", tol=1e-12
                ),
                "mutual_redundancy:x1,x2,x3": ExpectedValue(
                    -1.0, "derived: three-variable redundancy equals the transmission", tol=1e-12
                ),
                "transmission:x1,x2": ExpectedValue(
                    0.0, "derived: any pair of the parity triple is uniform", tol=1e-12
                ),
                "krippendorff_q:x1,x2,x3": ExpectedValue(
                    1.0, "derived: expand the alternating sum, -3+6-2", tol=1e-12
                ),
                "subadditivity_gap:x1,x2,x3": ExpectedValue(
                    1.0, "derived: 3 - 2", tol=1e-12
                ),
                "negative_term": ExpectedValue(
                    -1.0, "derived: joint 2 bits minus three marginal bits", tol=1e-12
                ),
                "config_term": ExpectedValue(
                    0.0, "derived: all pairwise transmissions vanish", tol=1e-12
                ),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="copy3",
            table=copy_triple(),
            expected={
                "transmission:a,b,c": ExpectedValue(
                    1.0, "derived: brute-force subset entropies 3-3+1", tol=1e-12
                ),
                "mutual_redundancy:a,b,c": ExpectedValue(
                    1.0, "derived: equals the transmission for three variables", tol=1e-12
                ),
                "krippendorff_q:a,b,c": ExpectedValue(
                    -1.0, "derived: opposite sign of the redundancy", tol=1e-12
                ),
                "negative_term": ExpectedValue(
                    -2.0, "derived: joint 1 bit minus three marginal bits", tol=1e-12
                ),
                "config_term": ExpectedValue(
                    3.0, "derived: three pairwise transmissions of 1 bit", tol=1e-12
                ),
            },
        )
    )

    fixtures.append(
        Fixture(
            name="independent3",
            table=independent_triple(),
            expected={
                "transmission:a,b,c": ExpectedValue(0.0, "trivial: full independence", tol=1e-12),
                "mutual_redundancy:a,b,c": ExpectedValue(0.0, "trivial: full independence", tol=1e-12),
                "krippendorff_q:a,b,c": ExpectedValue(0.0, "trivial: full independence", tol=1e-12),
                "negative_term": ExpectedValue(0.0, "trivial: full independence", tol=1e-12),
                "config_term": ExpectedValue(0.0, "trivial: full independence", tol=1e-12),
            },
        )
    )

    return fixtures


def verify_fixture(fixture: Fixture) -> list[tuple[str, bool, str]]:
    """Evaluate every expected entry; returns (measure, ok, detail) triples."""
    results = []
    for key in sorted(fixture.expected):
        exp = fixture.expected[key]
        got = evaluate_measure(fixture, key)
        ok = abs(got - exp.value) <= exp.tol
        results.append((key, ok, f"expected {exp.value!r} +/- {exp.tol}, got {got!r}"))
    return results


def write_fixture_files(directory) -> list[Path]:
    """Serialize the canonical fixtures (JSON, plus CSV for the incidence one)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for fx in canonical_fixtures():
        path = directory / f"{fx.name.replace('-', '_')}.json"
        path.write_text(json.dumps(fx.to_dict(), indent=2) + "\n", encoding="utf-8")
        written.append(path)
        if fx.matrix is not None:
            csv_path = directory / f"{fx.name.replace('-', '_')}.csv"
            lines = ["," + ",".join(fx.matrix.column_labels)]
            for label, row in zip(fx.matrix.row_labels, fx.matrix.entries):
                lines.append(label + "," + ",".join(f"{x:g}" for x in row))
            csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(csv_path)
    return written


def load_fixture(path) -> Fixture:
    """Read one serialized fixture back (table or matrix plus expected block)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    expected = {
        k: ExpectedValue(v["value"], v["provenance"], v.get("tol", 1e-9))
        for k, v in data["expected"].items()
    }
    table = JointTable.from_dict(data) if "variables" in data else None
    matrix = None
    if "matrix" in data:
        m = data["matrix"]
        matrix = IncidenceMatrix(
            tuple(m["row_labels"]), tuple(m["column_labels"]), np.asarray(m["entries"])
        )
    return Fixture(name=data["name"], expected=expected, table=table, matrix=matrix)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def identity_checks(seed: int = 20240, tables_per_n: int = 40) -> list[CheckResult]:
    """The oracle identity suite: fixtures, dual paths, sign laws, eigen contract.

    Designed to run in seconds; the heavyweight statistical sweeps live in the
    acceptance tests.
    """
    from .vector_space import principal_eigen, similarity_matrix

    results: list[CheckResult] = []

    for fx in canonical_fixtures():
        bad = [f"{k}: {d}" for k, ok, d in verify_fixture(fx) if not ok]
        results.append(
            CheckResult(
                f"fixture {fx.name}",
                not bad,
                "; ".join(bad) if bad else f"{len(fx.expected)} expected values reproduced",
            )
        )

    worst_dual = 0.0
    worst_series = 0.0
    worst_sign = 0.0
    worst_q = 0.0
    min_gap = math.inf
    count = 0
    for n_vars in (2, 3, 4, 5):
        for i in range(tables_per_n):
            zf = 0.5 if i % 3 == 0 else 0.0
            table = random_table(n_vars, 3, seed + 1000 * n_vars + i, zero_fraction=zf)
            names = table.names
            t = transmission(table, names).value
            if n_vars <= 5:
                worst_dual = max(worst_dual, abs(t - oracle_transmission(table, names)))
            r = mutual_redundancy(table, names)
            sign = 1.0 if n_vars % 2 == 1 else -1.0
            worst_sign = max(worst_sign, abs(r - sign * t))
            worst_q = max(worst_q, abs(krippendorff_q(table, names) + r))
            worst_series = max(worst_series, abs(transmission_series_check(table, names)))
            min_gap = min(min_gap, subadditivity_gap(table, names))
            count += 1
    results.append(
        CheckResult(
            "dual-path transmission agreement",
            worst_dual <= 1e-9,
            f"max |main - oracle| = {worst_dual:.3e} over {count} tables",
        )
    )
    results.append(
        CheckResult(
            "redundancy sign law",
            worst_sign <= 1e-9,
            f"max |R - (-1)^(1+n) T| = {worst_sign:.3e}",
        )
    )
    results.append(
        CheckResult(
            "alternating-convention cross-check",
            worst_q <= 1e-9,
            f"max |Q + R| = {worst_q:.3e}",
        )
    )
    results.append(
        CheckResult(
            "transmission series identity",
            worst_series <= 1e-9,
            f"max |series - gap| = {worst_series:.3e}",
        )
    )
    results.append(
        CheckResult(
            "subadditivity",
            min_gap >= -1e-12,
            f"min gap = {min_gap:.3e}",
        )
    )

    sim = similarity_matrix(appendix_matrix(), kind="cosine", axis="rows")
    eig = principal_eigen(sim)
    closed = sym2x2_eigenpairs(sim.entries)[0][0]
    ok = abs(eig.eigenvalue - closed) <= 1e-9 and eig.residual <= 1e-10
    results.append(
        CheckResult(
            "eigen contract on the similarity fixture",
            ok,
            f"lambda = {eig.eigenvalue!r} (closed form {closed!r}), "
            f"residual = {eig.residual:.3e}",
        )
    )
    return results
