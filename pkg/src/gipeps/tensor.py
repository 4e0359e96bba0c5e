"""Dense labeled-tensor algebra and spectral primitives.

Tensors are real-valued numpy arrays with named legs, stored row-major.
Contraction is permute -> reshape -> matrix multiply (np.tensordot), so the
single hot kernel is BLAS gemm. All operations are pure: inputs are never
mutated and results own fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import LabelError, NonConvergence, ShapeError, ZeroOperator


class LabeledTensor:
    """Real dense tensor with distinct, ordered leg names.

    Treat instances as immutable; every operation returns a new tensor.
    """

    __slots__ = ("labels", "array")

    def __init__(self, labels: Sequence[str], array, check: bool = True):
        arr = np.asarray(array, dtype=np.float64)
        labels = tuple(labels)
        if check:
            if len(labels) != arr.ndim:
                raise ShapeError(
                    f"{len(labels)} labels for array of rank {arr.ndim}"
                )
            if len(set(labels)) != len(labels):
                raise LabelError(f"labels not pairwise distinct: {labels}")
            if not np.all(np.isfinite(arr)):
                raise ShapeError("tensor entries must be finite")
        self.labels = labels
        self.array = arr

    @property
    def dims(self) -> tuple[int, ...]:
        return self.array.shape

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown leg {label!r}; has {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.array.shape[self.axis(label)]

    def item(self) -> float:
        return float(self.array.reshape(-1)[0]) if self.array.ndim == 0 else float(self.array.item())

    def relabel(self, mapping: dict[str, str]) -> "LabeledTensor":
        new = tuple(mapping.get(l, l) for l in self.labels)
        return LabeledTensor(new, self.array, check=True)

    def scale(self, c: float) -> "LabeledTensor":
        return LabeledTensor(self.labels, self.array * c, check=False)

    def __repr__(self):
        return f"LabeledTensor(labels={self.labels}, dims={self.dims})"

    # Text dump for golden-file tests: labels line, dims line, entries
    # in row-major order.
    def dump(self) -> str:
        lines = [" ".join(self.labels), " ".join(str(d) for d in self.dims)]
        lines.extend(repr(float(x)) for x in self.array.reshape(-1))
        return "\n".join(lines) + "\n"

    @staticmethod
    def load(text: str) -> "LabeledTensor":
        lines = text.strip().split("\n")
        labels = tuple(lines[0].split()) if lines[0].strip() else ()
        dims = tuple(int(d) for d in lines[1].split()) if lines[1].strip() else ()
        data = np.array([float(x) for x in lines[2:]], dtype=np.float64)
        return LabeledTensor(labels, data.reshape(dims))


@dataclass
class EigResult:
    """Leading eigenpair estimate from power iteration."""

    value: float
    vector: object
    iterations: int
    residual: float


def contract(
    a: LabeledTensor, b: LabeledTensor, pairs: Sequence[tuple[str, str]]
) -> LabeledTensor:
    """Contract `a` with `b` over label pairs (legA, legB).

    Result legs: uncontracted legs of `a` then of `b`, in original order.
    """
    seen_a, seen_b = set(), set()
    ax_a, ax_b = [], []
    for la, lb in pairs:
        if la in seen_a or lb in seen_b:
            raise LabelError(f"leg repeated across pairs: ({la}, {lb})")
        seen_a.add(la)
        seen_b.add(lb)
        ia, ib = a.axis(la), b.axis(lb)
        if a.dims[ia] != b.dims[ib]:
            raise ShapeError(
                f"dimension mismatch {la}:{a.dims[ia]} vs {lb}:{b.dims[ib]}"
            )
        ax_a.append(ia)
        ax_b.append(ib)
    out = np.tensordot(a.array, b.array, axes=(ax_a, ax_b))
    labels = tuple(l for l in a.labels if l not in seen_a) + tuple(
        l for l in b.labels if l not in seen_b
    )
    return LabeledTensor(labels, out, check=False)


def permute(a: LabeledTensor, order: Sequence[str]) -> LabeledTensor:
    order = tuple(order)
    if sorted(order) != sorted(a.labels):
        raise LabelError(f"{order} is not a permutation of {a.labels}")
    axes = [a.axis(l) for l in order]
    return LabeledTensor(order, np.transpose(a.array, axes), check=False)


def fuse(a: LabeledTensor, group: Sequence[str], new_label: str) -> LabeledTensor:
    """Fuse `group` legs (in the given order) into one leg at the position of
    the first grouped leg. Fused extent is the product of the grouped extents,
    row-major over the group order."""
    group = tuple(group)
    for g in group:
        a.axis(g)  # raises LabelError on unknown legs
    if len(set(group)) != len(group):
        raise LabelError(f"group has repeats: {group}")
    rest = [l for l in a.labels if l not in group]
    pos = min(a.axis(g) for g in group)
    n_before = sum(1 for l in a.labels[:pos] if l not in group)
    new_order = rest[:n_before] + list(group) + rest[n_before:]
    t = permute(a, new_order)
    shape = list(t.dims)
    fused = int(np.prod(shape[n_before : n_before + len(group)], dtype=np.int64))
    new_shape = shape[:n_before] + [fused] + shape[n_before + len(group) :]
    labels = tuple(rest[:n_before]) + (new_label,) + tuple(rest[n_before:])
    return LabeledTensor(labels, t.array.reshape(new_shape), check=False)


def split(
    a: LabeledTensor, label: str, new_labels: Sequence[str], dims: Sequence[int]
) -> LabeledTensor:
    """Inverse of fuse given the recorded extents."""
    ax = a.axis(label)
    dims = tuple(int(d) for d in dims)
    if int(np.prod(dims, dtype=np.int64)) != a.dims[ax]:
        raise ShapeError(f"cannot split extent {a.dims[ax]} into {dims}")
    shape = a.dims[:ax] + dims + a.dims[ax + 1 :]
    labels = a.labels[:ax] + tuple(new_labels) + a.labels[ax + 1 :]
    return LabeledTensor(labels, a.array.reshape(shape), check=True)


def truncated_svd(
    a: LabeledTensor,
    row_legs: Sequence[str],
    col_legs: Sequence[str],
    chi: int,
    cutoff: float = 0.0,
    bond_label: str = "s",
):
    """SVD of `a` viewed as a (row_legs) x (col_legs) matrix, truncated.

    Keeps at most `chi` singular values and drops those below cutoff*max(S).
    Returns (U, S, V, discarded_weight) with U: row_legs+bond, V: bond+col_legs
    and S a 1-d numpy array. discarded_weight is the dropped fraction of the
    squared Frobenius norm.
    """
    row_legs, col_legs = tuple(row_legs), tuple(col_legs)
    if set(row_legs) | set(col_legs) != set(a.labels) or set(row_legs) & set(col_legs):
        raise ShapeError(
            f"row {row_legs} / col {col_legs} must partition {a.labels}"
        )
    if chi < 1:
        raise ShapeError("chi must be >= 1")
    t = permute(a, row_legs + col_legs)
    rdims = t.dims[: len(row_legs)]
    cdims = t.dims[len(row_legs) :]
    mat = t.array.reshape(int(np.prod(rdims, dtype=np.int64)), -1)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    total = float(np.sum(s**2))
    keep = min(chi, len(s))
    if cutoff > 0 and len(s) and s[0] > 0:
        keep = min(keep, int(np.sum(s >= cutoff * s[0])))
    keep = max(keep, 1)
    dropped = float(np.sum(s[keep:] ** 2))
    weight = dropped / total if total > 0 else 0.0
    U = LabeledTensor(
        row_legs + (bond_label,), u[:, :keep].reshape(rdims + (keep,)), check=False
    )
    V = LabeledTensor(
        (bond_label,) + col_legs, vt[:keep].reshape((keep,) + cdims), check=False
    )
    return U, s[:keep].copy(), V, weight


def leading_eig(
    apply: Callable,
    v0,
    tol: float = 1e-10,
    max_iter: int = 10000,
    dot: Callable | None = None,
    norm: Callable | None = None,
    scale: Callable | None = None,
) -> EigResult:
    """Dominant-in-magnitude eigenpair by sign-tracked power iteration.

    `apply` maps a state to a state of the same shape. The eigenvalue
    estimate is the Rayleigh-type overlap <v, Av> on normalized iterates,
    which tracks the sign of a negative dominant eigenvalue. Iteration
    stops when the relative change of the estimate drops below `tol`.
    Deterministic given the seed vector `v0`.

    dot/norm/scale default to dense numpy operations; callers with
    structured states (e.g. a truncated MPS handle) supply their own.
    """
    if dot is None:
        dot = lambda x, y: float(np.vdot(np.asarray(x), np.asarray(y)))
    if norm is None:
        norm = lambda x: float(np.linalg.norm(np.asarray(x)))
    if scale is None:
        scale = lambda x, c: np.asarray(x) * c

    n0 = norm(v0)
    if n0 == 0:
        raise ZeroOperator("seed vector has zero norm")
    v = scale(v0, 1.0 / n0)
    lam_prev = None
    lam = 0.0
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        w = apply(v)
        nw = norm(w)
        if nw < 1e-290:
            raise ZeroOperator("applied vector norm underflow")
        lam = dot(v, w)
        v = scale(w, 1.0 / nw)
        if lam_prev is not None and abs(lam - lam_prev) <= tol * max(abs(lam), 1e-300):
            w2 = apply(v)
            res2 = dot(w2, w2) - 2.0 * lam * dot(v, w2) + lam * lam
            residual = float(np.sqrt(max(res2, 0.0))) / abs(lam)
            return EigResult(float(lam), v, iterations, residual)
        lam_prev = lam
    w2 = apply(v)
    res2 = dot(w2, w2) - 2.0 * lam * dot(v, w2) + lam * lam
    residual = float(np.sqrt(max(res2, 0.0))) / max(abs(lam), 1e-300)
    raise NonConvergence(
        f"power iteration did not reach tol={tol} in {max_iter} iterations "
        f"(last value {lam}, residual {residual})",
        value=float(lam),
        residual=residual,
        iterations=iterations,
    )
