"""Z2 gauge-invariant PEPS site tensors and their layered descendants.

A site tensor covers one lattice site plus the links on top of it and to its
right. Virtual legs are charge-graded: a leg of extent D = d*m splits into
d=2 charge sectors of multiplicity m, with index = charge*m + multiplicity.
The physical link values duplicate the charges of the up/right virtual legs,
so physical legs are elided and only the four virtual legs are stored.

Doubled (2-layer) and quadrupled (4-layer) nodes are stored with every leg in
a reduced pair basis: tracing or swapping physical legs forces the paired
layers' charges to agree (or to differ, under a Wilson sigma-x insertion),
which shrinks a raw extent of D^layers down to (2 m^2)^(layers/2). The
reduction is exact because any assembled network puts the same grading on
both ends of every bond.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ChargeError, ShapeError
from .tensor import LabeledTensor

LEGS = ("up", "right", "down", "left")

# Layer orderings. 2 layers: (ket, bra). 4 layers: (ket1, bra1, ket2, bra2),
# i.e. two density-matrix copies. Trace pairs physicals within each copy;
# swap pairs copy-1 ket with copy-2 bra and vice versa, realizing Tr(rho_A^2).
PAIRS_SINGLE = ((0, 1),)
PAIRS_TRACE = ((0, 1), (2, 3))
PAIRS_SWAP = ((0, 3), (1, 2))

PATTERN_PAIRS = {"trace": PAIRS_TRACE, "swap": PAIRS_SWAP}


@dataclass(frozen=True)
class ChargeLeg:
    """Charge-graded virtual leg: d charge sectors of multiplicity m."""

    m: int
    d: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise ShapeError(f"multiplicity must be >= 1, got {self.m}")
        if self.d != 2:
            raise ShapeError("only Z2 legs (d=2) are supported")

    @property
    def extent(self) -> int:
        return self.d * self.m

    def charge(self, index: int) -> int:
        return index // self.m


@dataclass(frozen=True)
class MinimalModelParams:
    """Weights of the rotation-invariant D=2 model: vacuum, turn, straight,
    crossing."""

    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        if self.alpha == self.beta == self.gamma == self.delta == 0:
            raise ShapeError("at least one model parameter must be nonzero")


@dataclass(frozen=True)
class GaugeSiteTensor:
    """Rank-4 virtual-leg tensor obeying the Gauss parity constraint."""

    data: LabeledTensor
    leg: ChargeLeg
    model: str = "custom"
    params: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        if self.data.labels != LEGS:
            raise ShapeError(f"site legs must be {LEGS}, got {self.data.labels}")
        D = self.leg.extent
        if self.data.dims != (D, D, D, D):
            raise ShapeError(f"expected extents {(D,) * 4}, got {self.data.dims}")
        mask = constraint_mask([self.leg] * 4).array
        if np.any(self.data.array[mask == 0] != 0.0):
            raise ChargeError("entries at parity-forbidden positions must be 0")

    @property
    def D(self) -> int:
        return self.leg.extent

    @property
    def m(self) -> int:
        return self.leg.m

    def scaled(self, c: float) -> "GaugeSiteTensor":
        return GaugeSiteTensor(
            self.data.scale(c), self.leg, self.model, self.params, self.seed
        )


def constraint_mask(leg_spec: Sequence[ChargeLeg]) -> LabeledTensor:
    """0/1 tensor over (up,right,down,left): 1 iff charge parity balances,
    charge(up)+charge(right) = charge(down)+charge(left) mod 2."""
    if len(leg_spec) != 4:
        raise ShapeError("need four legs")
    charges = [np.arange(l.extent) // l.m for l in leg_spec]
    u, r, d, l = np.ix_(*charges)
    mask = ((u + r + d + l) % 2 == 0).astype(np.float64)
    return LabeledTensor(LEGS, mask)


def minimal_model(p: MinimalModelParams) -> GaugeSiteTensor:
    """D=2 rotation-invariant model: vacuum alpha, the four two-flux turns
    beta, the two straight-through lines gamma, the four-flux crossing
    delta."""
    t = np.zeros((2, 2, 2, 2))
    t[0, 0, 0, 0] = p.alpha
    # turns: one of {up,right} and one of {down,left} charged, adjacent legs
    t[1, 1, 0, 0] = p.beta
    t[0, 1, 1, 0] = p.beta
    t[0, 0, 1, 1] = p.beta
    t[1, 0, 0, 1] = p.beta
    # straight lines through the site
    t[1, 0, 1, 0] = p.gamma
    t[0, 1, 0, 1] = p.gamma
    t[1, 1, 1, 1] = p.delta
    return GaugeSiteTensor(
        LabeledTensor(LEGS, t),
        ChargeLeg(m=1),
        model="minimal",
        params=(p.alpha, p.beta, p.gamma, p.delta),
    )


def toric_tensor() -> GaugeSiteTensor:
    """The alpha=beta=gamma=delta=1 point (Kitaev toric-code ground state)."""
    return minimal_model(MinimalModelParams(1.0, 1.0, 1.0, 1.0))


def random_gauge_tensor(
    D: int, mu: float, sigma: float, seed: int
) -> GaugeSiteTensor:
    """Mask-allowed entries drawn i.i.d. N(mu, sigma) with PCG64(seed).

    Draws are assigned in lexicographic order over (up,right,down,left)
    indices for cross-platform reproducibility. sigma=0 gives the toric-code
    ground state padded to bond dimension D.
    """
    if sigma < 0:
        raise ShapeError("sigma must be >= 0")
    if D % 2 != 0:
        raise ShapeError("D must be divisible by d=2")
    leg = ChargeLeg(m=D // 2)
    mask = constraint_mask([leg] * 4).array
    rng = np.random.default_rng(seed)
    t = np.zeros((D, D, D, D))
    flat_mask = mask.reshape(-1).astype(bool)
    draws = rng.normal(mu, sigma, size=int(flat_mask.sum()))
    flat = t.reshape(-1)
    flat[flat_mask] = draws
    return GaugeSiteTensor(
        LabeledTensor(LEGS, t),
        leg,
        model="random",
        params=(D, mu, sigma),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Reduced pair bases for layered nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LegBasis:
    """Reduced basis of a layered leg.

    `pairs` partitions the layers; each pair carries a mode:
      diag  -- both layers share the charge (physical trace pairing)
      anti  -- charges differ (sigma-x inserted on the first layer of the pair)
      fix0/fix1 -- common charge pinned (sector projection)
    Elements of a pair enumerate (charge, mult_a, mult_b); composite leg
    indices are row-major over the pairs. Index 0 of any diag/fix0 basis is
    the all-vacuum element, which is what boundary clamping selects.
    """

    m: int
    pairs: tuple[tuple[int, int], ...]
    modes: tuple[str, ...]

    def __post_init__(self):
        if len(self.pairs) != len(self.modes):
            raise ShapeError("one mode per layer pair")
        for mode in self.modes:
            if mode not in ("diag", "anti", "fix0", "fix1"):
                raise ShapeError(f"unknown pair mode {mode!r}")

    @property
    def n_layers(self) -> int:
        return 2 * len(self.pairs)

    def pair_size(self, i: int) -> int:
        return self.m**2 if self.modes[i].startswith("fix") else 2 * self.m**2

    @property
    def size(self) -> int:
        s = 1
        for i in range(len(self.pairs)):
            s *= self.pair_size(i)
        return s

    def _pair_elements(self, i: int):
        """Yield (charge_first_layer, charge_second_layer, ma, mb)."""
        m, mode = self.m, self.modes[i]
        if mode == "diag":
            charges = [(c, c) for c in (0, 1)]
        elif mode == "anti":
            charges = [(c, 1 - c) for c in (0, 1)]
        else:
            q = int(mode[3])
            charges = [(q, q)]
        for ca, cb in charges:
            for ma in range(m):
                for mb in range(m):
                    yield ca, cb, ma, mb

    def layer_maps(self) -> np.ndarray:
        """(n_layers, size) array: per-layer virtual index of each element."""
        per_pair = []
        for i, (la, lb) in enumerate(self.pairs):
            elems = list(self._pair_elements(i))
            a = np.array([ca * self.m + ma for ca, _, ma, _ in elems])
            b = np.array([cb * self.m + mb for _, cb, _, mb in elems])
            per_pair.append((la, a, lb, b))
        out = np.zeros((self.n_layers, self.size), dtype=np.intp)
        sizes = [self.pair_size(i) for i in range(len(self.pairs))]
        grids = np.meshgrid(
            *[np.arange(s) for s in sizes], indexing="ij"
        )
        flat = [g.reshape(-1) for g in grids]
        for i, (la, a, lb, b) in enumerate(per_pair):
            out[la] = a[flat[i]]
            out[lb] = b[flat[i]]
        return out

    def pair_charges(self, i: int) -> np.ndarray:
        """(size,) charge of pair i (first layer's charge) per element."""
        elems = list(self._pair_elements(i))
        c = np.array([ca for ca, _, _, _ in elems])
        sizes = [self.pair_size(j) for j in range(len(self.pairs))]
        grids = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
        return c[grids[i].reshape(-1)]

    def charge_filter(self, charge: int) -> np.ndarray:
        """Composite indices whose every pair carries the given charge."""
        if charge not in (0, 1):
            raise ChargeError(f"charge must be 0 or 1, got {charge}")
        keep = np.ones(self.size, dtype=bool)
        for i, mode in enumerate(self.modes):
            if mode == "anti":
                raise ChargeError("cannot pin the charge of a dressed leg")
            keep &= self.pair_charges(i) == charge
        return np.nonzero(keep)[0]

    def pinned(self, charge: int) -> "LegBasis":
        if charge not in (0, 1):
            raise ChargeError(f"charge must be 0 or 1, got {charge}")
        return LegBasis(self.m, self.pairs, tuple(f"fix{charge}" for _ in self.modes))


def basis2(m: int, mode: str = "diag") -> LegBasis:
    return LegBasis(m, PAIRS_SINGLE, (mode,))


def basis4(m: int, pattern: str, mode: str = "diag") -> LegBasis:
    return LegBasis(m, PATTERN_PAIRS[pattern], (mode, mode))


def build_node_tensor(
    T: np.ndarray,
    bases: dict[str, LegBasis],
    select: dict[str, np.ndarray] | None = None,
) -> np.ndarray:
    """Layered node in reduced bases: elementwise product over layers of the
    site tensor gathered at each leg's per-layer index maps.

    `select` optionally restricts a leg to a subset of composite indices
    (boundary clamps, sector pins) before the node is materialized.
    """
    n_layers = bases["up"].n_layers
    for leg in LEGS:
        if bases[leg].n_layers != n_layers:
            raise ShapeError("all legs must carry the same layer count")
    maps = {}
    for leg in LEGS:
        lm = bases[leg].layer_maps()
        if select is not None and leg in select:
            lm = lm[:, np.asarray(select[leg], dtype=np.intp)]
        maps[leg] = lm
    out = None
    for q in range(n_layers):
        g = T[np.ix_(maps["up"][q], maps["right"][q], maps["down"][q], maps["left"][q])]
        if out is None:
            out = g
        else:
            out *= g
    return out


@dataclass
class DoubledNode:
    """Layered site node (2 or 4 layers) with legs in reduced pair bases.

    `link_modes` records the tracing pattern of the two physical links this
    site owns: for 2 layers "diag" or "anti" (Wilson-dressed); for 4 layers
    "trace" or "swap".
    """

    data: LabeledTensor
    bases: dict[str, LegBasis]
    layers: int
    source: GaugeSiteTensor | None = None
    link_modes: dict[str, str] = field(default_factory=dict)

    def leg_size(self, leg: str) -> int:
        return self.bases[leg].size


def doubled_traced_node(
    t: GaugeSiteTensor,
    dress_up: bool = False,
    dress_right: bool = False,
    down_mode: str = "diag",
    left_mode: str = "diag",
) -> DoubledNode:
    """Ket x bra node with physical legs traced (pairing the up/right charges
    across the layers). Optional sigma-x dressing flips the ket charge of the
    corresponding physical link. down/left modes follow the neighbors'
    dressing when rows are assembled."""
    m = t.m
    bases = {
        "up": basis2(m, "anti" if dress_up else "diag"),
        "right": basis2(m, "anti" if dress_right else "diag"),
        "down": basis2(m, down_mode),
        "left": basis2(m, left_mode),
    }
    data = build_node_tensor(t.data.array, bases)
    return DoubledNode(
        LabeledTensor(LEGS, data, check=False),
        bases,
        layers=2,
        source=t,
        link_modes={
            "up": "anti" if dress_up else "diag",
            "right": "anti" if dress_right else "diag",
        },
    )


def wilson_dress(node: DoubledNode, edges: Iterable[str]) -> DoubledNode:
    """Insert sigma-x on the ket copy of the designated physical links (the
    up/right links owned by this site) before tracing. Rebuilds from the
    recorded source tensor; an empty edge set returns an equivalent node."""
    edges = set(edges)
    if not edges <= {"up", "right"}:
        raise ShapeError(f"dressable edges are up/right, got {edges}")
    if node.layers != 2:
        raise ShapeError("Wilson dressing applies to 2-layer nodes")
    if node.source is None:
        raise ShapeError("node carries no source tensor to rebuild from")
    dress_up = ("up" in edges) ^ (node.link_modes.get("up") == "anti")
    dress_right = ("right" in edges) ^ (node.link_modes.get("right") == "anti")
    return doubled_traced_node(
        node.source,
        dress_up=dress_up,
        dress_right=dress_right,
        down_mode=node.bases["down"].modes[0],
        left_mode=node.bases["left"].modes[0],
    )


def quadrupled_node(t: GaugeSiteTensor, pattern) -> DoubledNode:
    """Two density-matrix copies of the site. pattern: "trace" pairs each
    copy's bra/ket physicals within the copy (environment), "swap" pairs
    copy-1 ket with copy-2 bra and vice versa (subsystem), realizing
    Tr(rho_A^2). A (up_pattern, right_pattern) tuple sets the two physical
    links independently; down/left legs default to the same patterns."""
    if isinstance(pattern, str):
        up_pat = right_pat = pattern
    else:
        up_pat, right_pat = pattern
    for p in (up_pat, right_pat):
        if p not in PATTERN_PAIRS:
            raise ShapeError(f"pattern must be trace or swap, got {p!r}")
    m = t.m
    bases = {
        "up": basis4(m, up_pat),
        "right": basis4(m, right_pat),
        "down": basis4(m, up_pat),
        "left": basis4(m, right_pat),
    }
    data = build_node_tensor(t.data.array, bases)
    return DoubledNode(
        LabeledTensor(LEGS, data, check=False),
        bases,
        layers=4,
        source=t,
        link_modes={"up": up_pat, "right": right_pat},
    )


def sector_project(node: DoubledNode, leg: str, charge: int) -> DoubledNode:
    """Restrict a leg's charge sector (consistently in every layer) to the
    given charge. Each layer's extent shrinks from D to m = D/d."""
    basis = node.bases[leg]
    keep = basis.charge_filter(charge)
    axis = node.data.axis(leg)
    data = np.take(node.data.array, keep, axis=axis)
    bases = dict(node.bases)
    bases[leg] = basis.pinned(charge)
    return DoubledNode(
        LabeledTensor(node.data.labels, data, check=False),
        bases,
        layers=node.layers,
        source=node.source,
        link_modes=dict(node.link_modes),
    )


def corner_project(
    node: DoubledNode, leg_a: str, leg_b: str, total_charge: int
) -> DoubledNode:
    """Two-leg projector at a corner star-part: keeps only joint charge
    combinations with the given total parity on each layer pair; individual
    leg charges remain free."""
    if total_charge not in (0, 1):
        raise ChargeError(f"total charge must be 0 or 1, got {total_charge}")
    ba, bb = node.bases[leg_a], node.bases[leg_b]
    if len(ba.pairs) != len(bb.pairs):
        raise ShapeError("corner legs must share the layer-pair structure")
    mask = np.ones((ba.size, bb.size), dtype=np.float64)
    for i in range(len(ba.pairs)):
        ca = ba.pair_charges(i)
        cb = bb.pair_charges(i)
        mask *= ((ca[:, None] + cb[None, :]) % 2 == total_charge).astype(np.float64)
    ax_a = node.data.axis(leg_a)
    ax_b = node.data.axis(leg_b)
    shape = [1] * node.data.array.ndim
    shape[ax_a] = ba.size
    shape[ax_b] = bb.size
    if ax_a < ax_b:
        m4 = mask.reshape(shape)
    else:
        m4 = mask.T.reshape(shape)
    return DoubledNode(
        LabeledTensor(node.data.labels, node.data.array * m4, check=False),
        dict(node.bases),
        layers=node.layers,
        source=node.source,
        link_modes=dict(node.link_modes),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_site(t: GaugeSiteTensor) -> str:
    """JSON header (d, m, model, params, seed) followed by the tensor dump."""
    header = json.dumps(
        {
            "d": t.leg.d,
            "m": t.leg.m,
            "model": t.model,
            "params": list(t.params),
            "seed": t.seed,
        }
    )
    return header + "\n" + t.data.dump()


def load_site(text: str) -> GaugeSiteTensor:
    head, rest = text.split("\n", 1)
    meta = json.loads(head)
    data = LabeledTensor.load(rest)
    return GaugeSiteTensor(
        data,
        ChargeLeg(m=meta["m"], d=meta["d"]),
        model=meta["model"],
        params=tuple(meta["params"]),
        seed=meta["seed"],
    )
