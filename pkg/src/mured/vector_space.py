"""Relations-vs-correlations toolkit: incidence matrices, similarity, eigenvectors.

Rows of an incidence matrix are agents, columns are attributes or relations;
Pearson and cosine compare the row (or column) vectors, and the dominant
eigenvectors of the resulting similarity matrix point at cluster centroids.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateSpectrumError,
    InvalidMatrixError,
    ParseError,
    UndefinedSimilarityError,
)

SIMILARITY_KINDS = ("pearson", "cosine")
AXES = ("rows", "columns")

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000

# Two eigenvalues closer than this (relative to scale) are reported degenerate.
_DEGENERACY_TOL = 1e-9


def pearson(u: Sequence[float], v: Sequence[float]) -> float:
    """Product-moment correlation of two equal-length vectors."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size != b.size:
        raise InvalidMatrixError("pearson needs two 1-d vectors of equal length")
    if a.size < 2:
        raise InvalidMatrixError("pearson needs vectors of length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    ssa = float(da @ da)
    ssb = float(db @ db)
    if ssa == 0.0 or ssb == 0.0:
        raise UndefinedSimilarityError("pearson is undefined for a zero-variance vector")
    r = float(da @ db) / math.sqrt(ssa * ssb)
    return min(1.0, max(-1.0, r))


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, u.v / (|u||v|)."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size != b.size:
        raise InvalidMatrixError("cosine needs two 1-d vectors of equal length")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("cosine is undefined for a zero vector")
    c = float(a @ b) / (na * nb)
    return min(1.0, max(-1.0, c))


@dataclass(frozen=True, eq=False)
class IncidenceMatrix:
    """Agents x attributes matrix of nonnegative weights."""

    row_labels: tuple[str, ...]
    column_labels: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        rows = tuple(self.row_labels)
        cols = tuple(self.column_labels)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "column_labels", cols)
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise InvalidMatrixError("row and column labels must be unique")
        entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        if entries.shape != (len(rows), len(cols)):
            raise InvalidMatrixError(
                f"entry shape {entries.shape} does not match labels "
                f"({len(rows)} x {len(cols)})"
            )
        if not np.all(np.isfinite(entries)):
            raise InvalidMatrixError("entries must be finite")
        if np.any(entries < 0):
            raise InvalidMatrixError("entries must be nonnegative")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def row(self, label: str) -> np.ndarray:
        try:
            return self.entries[self.row_labels.index(label)]
        except ValueError:
            raise InvalidMatrixError(f"unknown row label {label!r}") from None

    def column(self, label: str) -> np.ndarray:
        try:
            return self.entries[:, self.column_labels.index(label)]
        except ValueError:
            raise InvalidMatrixError(f"unknown column label {label!r}") from None

    @classmethod
    def from_csv(cls, path) -> "IncidenceMatrix":
        """Read a matrix: header row = column labels, first column = row labels."""
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError("empty incidence file") from None
            if len(header) < 2:
                raise ParseError("incidence header needs a corner cell plus column labels")
            column_labels = tuple(h.strip() for h in header[1:])
            row_labels: list[str] = []
            rows: list[list[float]] = []
            for lineno, record in enumerate(reader, start=2):
                if not record:
                    continue
                if len(record) != len(header):
                    raise ParseError(
                        f"expected {len(header)} fields, got {len(record)}", line=lineno
                    )
                row_labels.append(record[0].strip())
                try:
                    rows.append([float(x) for x in record[1:]])
                except ValueError as exc:
                    raise ParseError(f"non-numeric entry: {exc}", line=lineno) from None
        if not rows:
            raise ParseError("incidence file has no data rows")
        return cls(tuple(row_labels), column_labels, np.asarray(rows))


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Square symmetric similarity matrix; undefined pairs are NaN, never 0."""

    labels: tuple[str, ...]
    entries: np.ndarray
    kind: str

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if self.kind not in SIMILARITY_KINDS:
            raise InvalidMatrixError(f"kind must be one of {SIMILARITY_KINDS}")
        entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        n = len(labels)
        if entries.shape != (n, n):
            raise InvalidMatrixError("similarity matrix must be square over its labels")
        defined = ~np.isnan(entries)
        if not np.array_equal(defined, defined.T):
            raise InvalidMatrixError("missing entries must be symmetric")
        sym = np.where(defined, entries, 0.0)
        if not np.allclose(sym, sym.T, atol=1e-12, rtol=0.0):
            raise InvalidMatrixError("similarity matrix must be symmetric within 1e-12")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def has_missing(self) -> bool:
        return bool(np.any(np.isnan(self.entries)))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "labels": list(self.labels),
            "entries": [
                [None if math.isnan(x) else float(x) for x in row]
                for row in self.entries
            ],
        }


def similarity_matrix(
    m: IncidenceMatrix, kind: str = "cosine", axis: str = "rows"
) -> SimilarityMatrix:
    """Pairwise similarity of all vectors along one axis of an incidence matrix.

    Pairs where the measure is undefined (zero vector or zero variance) are
    recorded as missing: a zero similarity is a meaningful value here and is
    never used as a placeholder.
    """
    if kind not in SIMILARITY_KINDS:
        raise InvalidMatrixError(f"kind must be one of {SIMILARITY_KINDS}")
    if axis not in AXES:
        raise InvalidMatrixError(f"axis must be one of {AXES}")
    if axis == "rows":
        vectors = m.entries
        labels = m.row_labels
    else:
        vectors = m.entries.T
        labels = m.column_labels
    n = vectors.shape[0]
    if n < 2:
        raise InvalidMatrixError(f"need at least 2 vectors along {axis}, got {n}")
    measure = pearson if kind == "pearson" else cosine
    if kind == "pearson":
        defined = [float(np.var(vectors[i])) > 0.0 for i in range(n)]
    else:
        defined = [float(np.linalg.norm(vectors[i])) > 0.0 for i in range(n)]
    out = np.full((n, n), np.nan)
    for i in range(n):
        if defined[i]:
            out[i, i] = 1.0
        for j in range(i + 1, n):
            if defined[i] and defined[j]:
                out[i, j] = out[j, i] = measure(vectors[i], vectors[j])
    return SimilarityMatrix(labels, out, kind)


@dataclass(frozen=True, eq=False)
class EigenResult:
    """One eigenpair: unit eigenvector, sign-fixed, with the iteration evidence."""

    eigenvalue: float
    eigenvector: np.ndarray
    iterations: int
    residual: float
    degenerate: bool = False

    def __post_init__(self):
        vec = np.ascontiguousarray(self.eigenvector, dtype=np.float64)
        vec.flags.writeable = False
        object.__setattr__(self, "eigenvector", vec)

    def to_dict(self) -> dict:
        return {
            "eigenvalue": self.eigenvalue,
            "eigenvector": [float(x) for x in self.eigenvector],
            "iterations": self.iterations,
            "residual": self.residual,
            "degenerate": self.degenerate,
        }


def _as_square(w) -> np.ndarray:
    if isinstance(w, SimilarityMatrix):
        if w.has_missing:
            raise InvalidMatrixError(
                "eigen extraction needs a fully defined similarity matrix "
                "(missing pairs present)"
            )
        return np.asarray(w.entries, dtype=np.float64)
    a = np.asarray(w, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidMatrixError("eigen extraction needs a nonempty square matrix")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("matrix entries must be finite")
    return a


def _start_vector(n: int) -> np.ndarray:
    # All-ones with a deterministic ramp so no symmetry axis can trap the
    # iteration; the ramp is tiny enough not to slow convergence.
    x = 1.0 + np.arange(1, n + 1) / n * 1e-8
    return x / np.linalg.norm(x)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _gershgorin_shift(a: np.ndarray) -> float:
    # Smallest Gershgorin bound on the spectrum; shifting by its negation
    # makes every eigenvalue nonnegative, so power iteration tracks the
    # largest algebraic eigenvalue and cannot oscillate on a +/- tie.
    radii = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
    lower = float(np.min(np.diag(a) - radii))
    return max(0.0, -lower)


def _power_iterate(
    m: np.ndarray,
    shift: float,
    tol: float,
    max_iter: int,
    project_out: list[np.ndarray],
    oscillation_check: bool,
) -> tuple[float, np.ndarray, int, float]:
    """Dominant eigenpair of (m - shift*I) given the pairs in ``project_out``.

    Returns (eigenvalue of the unshifted matrix, unit vector, iterations,
    residual). The residual is reported for the unshifted matrix; the shift
    cancels exactly in m@x - lambda*x.
    """
    n = m.shape[0]

    def _project(x: np.ndarray) -> np.ndarray:
        for v in project_out:
            x = x - v * float(v @ x)
        return x

    x = _project(_start_vector(n))
    nx = float(np.linalg.norm(x))
    if nx < 1e-12:
        # Start vector lies in the deflated span; fall back to basis vectors.
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            e = _project(e)
            ne = float(np.linalg.norm(e))
            if ne > 1e-8:
                x, nx = e, ne
                break
        else:
            raise DegenerateSpectrumError("no direction left outside the deflated span")
    x = x / nx

    prev2: np.ndarray | None = None
    residual = math.inf
    for it in range(1, max_iter + 1):
        z = _project(m @ x)
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            # x is in the kernel of the deflated operator: exact eigenpair.
            return -shift, x, it, 0.0
        x_new = z / nz
        z2 = _project(m @ x_new)
        lam_m = float(x_new @ z2)
        residual = float(np.max(np.abs(z2 - lam_m * x_new)))
        if residual <= tol:
            return lam_m - shift, x_new, it, residual
        if oscillation_check and prev2 is not None and it > 4:
            drift = min(
                float(np.max(np.abs(x_new - prev2))),
                float(np.max(np.abs(x_new + prev2))),
            )
            if drift <= 1e-12 and residual > tol:
                raise DegenerateSpectrumError(
                    "power iteration oscillates: dominant eigenvalue magnitude is tied "
                    f"(last residual {residual:.3e})"
                )
        prev2 = x
        x = x_new
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations (residual {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )


def principal_eigen(
    w, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> EigenResult:
    """Dominant eigenpair by power iteration.

    Symmetric matrices are diagonally shifted (Gershgorin bound) so the
    iteration converges to the largest algebraic eigenvalue even when the
    spectrum straddles zero; the shift cancels out of the reported pair.
    Satisfies max|W v - lambda v| <= tol on return.
    """
    a = _as_square(w)
    symmetric = bool(np.allclose(a, a.T, atol=1e-12, rtol=0.0))
    shift = _gershgorin_shift(a) if symmetric else 0.0
    m = a + shift * np.eye(a.shape[0]) if shift else a
    lam, vec, iters, _ = _power_iterate(
        m, shift, tol, max_iter, project_out=[], oscillation_check=not symmetric
    )
    vec = _fix_sign(vec)
    residual = float(np.max(np.abs(a @ vec - lam * vec)))
    if residual > tol:
        raise ConvergenceError(
            f"eigen contract violated after sign fix (residual {residual:.3e})",
            residual=residual,
            iterations=iters,
        )
    return EigenResult(lam, vec, iters, residual)


def top_eigenvectors(
    w, k: int, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> list[EigenResult]:
    """k dominant eigenpairs of a symmetric matrix via deflated power iteration.

    Returned vectors are pairwise orthogonal (projection is re-applied every
    step, so orthogonality holds to machine precision, well inside 1e-6).
    Pairs whose eigenvalues tie within tolerance are flagged degenerate.
    """
    a = _as_square(w)
    if not np.allclose(a, a.T, atol=1e-12, rtol=0.0):
        raise InvalidMatrixError("top_eigenvectors requires a symmetric matrix")
    n = a.shape[0]
    if not 1 <= k <= n:
        raise InvalidMatrixError(f"k must be in [1, {n}], got {k}")
    shift = _gershgorin_shift(a)
    m = a + shift * np.eye(n) if shift else a.copy()
    found: list[tuple[float, np.ndarray, int]] = []
    vectors: list[np.ndarray] = []
    for _ in range(k):
        lam, vec, iters, _ = _power_iterate(
            m, shift, tol, max_iter, project_out=vectors, oscillation_check=False
        )
        vectors.append(vec)
        found.append((lam, vec, iters))
        m = m - (lam + shift) * np.outer(vec, vec)

    scale = max(1.0, max(abs(lam) for lam, _, _ in found))
    results = []
    for i, (lam, vec, iters) in enumerate(found):
        vec = _fix_sign(vec)
        residual = float(np.max(np.abs(a @ vec - lam * vec)))
        if residual > tol:
            raise ConvergenceError(
                f"eigen contract violated for pair {i} (residual {residual:.3e})",
                residual=residual,
                iterations=iters,
            )
        degenerate = any(
            abs(lam - other) <= _DEGENERACY_TOL * scale
            for j, (other, _, _) in enumerate(found)
            if j != i
        )
        results.append(EigenResult(lam, vec, iters, residual, degenerate))
    return results
