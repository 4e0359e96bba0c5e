"""Lattices, regions, boundary star-parts, corners, and flux sectors.

A lattice site owns its up and right links. A region is a set of sites plus
a bipartition policy; its link set is the induced set (links with both
endpoints inside) adjusted by per-corner "whisker" links that realize the
freedom of routing the cut around boundary stars:

  * natural  -- no adjustment; every induced size-2 star-part contributes.
  * steps    -- exactly the designated step stars keep size-2 parts (stairs
                geometry); every other would-be corner is cut odd.
  * all-odd  -- every star-part is odd; the corner contribution vanishes.

Single-site regions use the four incident links (the induced set would be
empty).

Each cut star-part records its flux links: the links, all sitting on cut
bonds, whose charge sum equals the part's flux. Odd parts own one cut bond
(single-leg projector), size-2 parts own two (joint two-leg projector); the
flux links of all parts partition the cut bonds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import GeometryError, LimitError, RegionError

SECTOR_ENUM_CAP = 16


class Link(NamedTuple):
    """Link owned by site (x, y): 'u' points to (x, y+1), 'r' to (x+1, y)."""

    x: int
    y: int
    o: str

    @property
    def sites(self) -> tuple[tuple[int, int], tuple[int, int]]:
        if self.o == "u":
            return (self.x, self.y), (self.x, self.y + 1)
        return (self.x, self.y), (self.x + 1, self.y)


@dataclass(frozen=True)
class Lattice:
    """Open Lx x Ly site lattice; outward virtual legs are vacuum-clamped, so
    the up links of the top row and right links of the right column are
    frozen in the vacuum and carry no dynamics."""

    Lx: int
    Ly: int

    def __post_init__(self):
        if self.Lx < 1 or self.Ly < 1:
            raise RegionError("lattice extents must be >= 1")

    def sites(self):
        return [(x, y) for y in range(self.Ly) for x in range(self.Lx)]

    def is_free(self, link: Link) -> bool:
        if link.o == "u":
            return 0 <= link.x < self.Lx and 0 <= link.y < self.Ly - 1
        return 0 <= link.x < self.Lx - 1 and 0 <= link.y < self.Ly

    def exists(self, link: Link) -> bool:
        """Link appears in the network (free or frozen)."""
        return 0 <= link.x < self.Lx and 0 <= link.y < self.Ly

    def free_links(self) -> list[Link]:
        """Dynamical links in registry order: row-major over sites, up link
        before right link."""
        out = []
        for y in range(self.Ly):
            for x in range(self.Lx):
                for o in ("u", "r"):
                    l = Link(x, y, o)
                    if self.is_free(l):
                        out.append(l)
        return out

    def star_links(self, x: int, y: int) -> dict[str, Link | None]:
        return {
            "up": Link(x, y, "u") if self.exists(Link(x, y, "u")) else None,
            "right": Link(x, y, "r") if self.exists(Link(x, y, "r")) else None,
            "down": Link(x, y - 1, "u") if y >= 1 else None,
            "left": Link(x - 1, y, "r") if x >= 1 else None,
        }

    def plaquettes(self) -> list[tuple[int, int]]:
        return [
            (x, y) for y in range(self.Ly - 1) for x in range(self.Lx - 1)
        ]

    def plaquette_links(self, x: int, y: int) -> tuple[Link, Link, Link, Link]:
        return (
            Link(x, y, "r"),
            Link(x, y + 1, "r"),
            Link(x, y, "u"),
            Link(x + 1, y, "u"),
        )


@dataclass(frozen=True)
class StarPart:
    """Links of one boundary star lying inside the region."""

    center: tuple[int, int]
    inside: tuple[Link, ...]
    flux_links: tuple[Link, ...]

    @property
    def size(self) -> int:
        return len(self.inside)

    @property
    def kind(self) -> str:
        return "corner" if self.size == 2 else "edge"


@dataclass(frozen=True)
class FluxSector:
    """Charge assignment to an ordered list of boundary star-parts."""

    charges: tuple[int, ...]

    @property
    def admissible(self) -> bool:
        return sum(self.charges) % 2 == 0

    @property
    def label(self) -> str:
        return "".join(str(c) for c in self.charges)

    @staticmethod
    def vacuum(n: int) -> "FluxSector":
        return FluxSector((0,) * n)

    @staticmethod
    def random_admissible(n: int, seed: int) -> "FluxSector":
        rng = np.random.default_rng(seed)
        charges = list(rng.integers(0, 2, size=n))
        if sum(charges) % 2 == 1:
            charges[-1] ^= 1
        return FluxSector(tuple(int(c) for c in charges))


@dataclass(frozen=True)
class Region:
    """Region shape anchored by an explicit offset (default centers it)."""

    kind: str  # "rectangle" | "stairs"
    w: int = 0
    h: int = 0
    L: int = 0
    c: int = 0
    offset: tuple[int, int] | None = None
    bipartition: str = "natural"

    def box(self) -> tuple[int, int]:
        return (self.w, self.h) if self.kind == "rectangle" else (self.L, self.L)

    def origin(self, lat: Lattice) -> tuple[int, int]:
        if self.offset is not None:
            return self.offset
        bw, bh = self.box()
        return ((lat.Lx - bw) // 2, (lat.Ly - bh) // 2)

    def sites(self, lat: Lattice) -> frozenset[tuple[int, int]]:
        x0, y0 = self.origin(lat)
        if self.kind == "rectangle":
            out = {
                (x0 + dx, y0 + dy)
                for dx in range(self.w)
                for dy in range(self.h)
            }
        elif self.kind == "stairs":
            floors = self._floors()
            out = {
                (x0 + dx, y0 + dy)
                for dx in range(self.L)
                for dy in range(floors[dx], self.L)
            }
        else:
            raise RegionError(f"unknown region kind {self.kind!r}")
        return frozenset(out)

    def _floors(self) -> list[int]:
        """Bottom profile of the stairs: c terraces descending left to right
        by one row per step, widths as equal as possible (one site per step
        pitch). Boundary length is 4L for every c."""
        if not 1 <= self.c <= self.L:
            raise RegionError(f"stairs steps c={self.c} outside [1, {self.L}]")
        base, rem = divmod(self.L, self.c)
        widths = [base + 1] * rem + [base] * (self.c - rem)
        floors = []
        for i, w in enumerate(widths):
            floors.extend([self.c - 1 - i] * w)
        return floors

    def step_stars(self, lat: Lattice) -> list[tuple[int, int]] | None:
        """Designated contributing corners. None means keep every induced
        size-2 part (natural bipartition); an empty list keeps none."""
        if self.bipartition == "natural":
            return None
        if self.bipartition == "all-odd":
            return []
        if self.bipartition != "steps":
            raise RegionError(f"unknown bipartition {self.bipartition!r}")
        if self.kind != "stairs":
            raise RegionError("steps bipartition applies to stairs regions")
        x0, y0 = self.origin(lat)
        floors = self._floors()
        out = []
        for x in range(self.L):
            if x == 0 or floors[x] < floors[x - 1]:
                out.append((x0 + x, y0 + floors[x]))
        return out


def rectangle(w: int, h: int, offset: tuple[int, int] | None = None,
              bipartition: str = "natural") -> Region:
    if w < 1 or h < 1:
        raise RegionError("rectangle extents must be >= 1")
    return Region("rectangle", w=w, h=h, offset=offset, bipartition=bipartition)


def stairs(L: int, c: int, offset: tuple[int, int] | None = None,
           all_odd: bool = False) -> Region:
    if L < 2:
        raise RegionError("stairs box must be at least 2x2")
    return Region(
        "stairs", L=L, c=c, offset=offset,
        bipartition="all-odd" if all_odd else "steps",
    )


def _check_inside(lat: Lattice, sites: frozenset[tuple[int, int]]):
    for (x, y) in sites:
        if not (1 <= x <= lat.Lx - 2 and 1 <= y <= lat.Ly - 2):
            raise RegionError(
                f"region site {(x, y)} touches the lattice edge; regions must "
                "sit strictly inside"
            )


def _induced_links(lat: Lattice, sites: frozenset) -> set[Link]:
    if len(sites) == 1:
        ((x, y),) = sites
        links = lat.star_links(x, y).values()
        return {l for l in links if l is not None}
    out = set()
    for (x, y) in sites:
        for l in (Link(x, y, "u"), Link(x, y, "r")):
            a, b = l.sites
            if a in sites and b in sites:
                out.add(l)
    return out


def _cut_bond(lat: Lattice, sites: frozenset, link: Link) -> bool:
    a, b = link.sites
    return (a in sites) != (b in sites)


def _star_split(lat, sites, a_links, x, y):
    star = lat.star_links(x, y)
    inside = [l for l in star.values() if l is not None and l in a_links]
    outside = [l for l in star.values() if l is not None and l not in a_links]
    return inside, outside


_WHISKER_ORDER = ("up", "down", "left", "right")


def region_links(lat: Lattice, reg: Region) -> frozenset[Link]:
    """Resolved link set of the region: induced links plus the whisker
    adjustments demanded by the bipartition policy."""
    sites = reg.sites(lat)
    _check_inside(lat, sites)
    a_links = _induced_links(lat, sites)
    keep = reg.step_stars(lat)
    if keep is None:
        return frozenset(a_links)
    keep = set(keep)

    def corner_stars():
        found = []
        for (x, y) in _cut_star_centers(lat, sites, a_links):
            ins, _ = _star_split(lat, sites, a_links, x, y)
            if len(ins) == 2:
                found.append((x, y))
        return found

    # demote unwanted size-2 parts to size 3 by pulling one outward link in
    for (x, y) in sorted(corner_stars()):
        if (x, y) in keep:
            continue
        star = lat.star_links(x, y)
        for d in _WHISKER_ORDER:
            l = star[d]
            if l is not None and l not in a_links and _cut_bond(lat, sites, l):
                a_links.add(l)
                break
        else:
            raise GeometryError(f"no whisker link available at star {(x, y)}")

    # promote designated stars whose induced part is a thin tip (size 1)
    for (x, y) in sorted(keep):
        ins, _ = _star_split(lat, sites, a_links, x, y)
        if len(ins) == 2:
            continue
        if len(ins) != 1:
            raise GeometryError(
                f"designated step star {(x, y)} has induced size {len(ins)}"
            )
        star = lat.star_links(x, y)
        for d in _WHISKER_ORDER:
            l = star[d]
            if l is not None and l not in a_links and _cut_bond(lat, sites, l):
                a_links.add(l)
                break
        else:
            raise GeometryError(f"no whisker link available at tip {(x, y)}")
    return frozenset(a_links)


def _cut_star_centers(lat, sites, a_links):
    # a star is cut iff it has both inside and existing outside links; only
    # stars touching an A-link can qualify
    centers = set()
    for l in a_links:
        centers.update(
            c for c in l.sites if 0 <= c[0] < lat.Lx and 0 <= c[1] < lat.Ly
        )
    out = []
    for (x, y) in sorted(centers):
        ins, outs = _star_split(lat, sites, a_links, x, y)
        if ins and outs:
            out.append((x, y))
    return out


def boundary_star_parts(lat: Lattice, reg: Region) -> list[StarPart]:
    """Every star cut by the region boundary, ordered clockwise from the
    region's top-left."""
    sites = reg.sites(lat)
    a_links = region_links(lat, reg)
    parts = []
    claimed: dict[Link, tuple[int, int]] = {}
    for (x, y) in _cut_star_centers(lat, sites, a_links):
        ins, outs = _star_split(lat, sites, a_links, x, y)
        if len(ins) > 3:
            raise GeometryError(f"star {(x, y)} fully inside yet cut")
        # Flux links: bonds whose charge sum equals the part's flux. A
        # size-1 part pins its single inside link directly (the virtual leg
        # duplicates the physical charge even on an internal bond). Odd
        # size-3 parts and size-2 corners pin their outside side, whose
        # bonds all cross the boundary.
        if len(ins) == 1:
            flux = tuple(ins)
        else:
            flux = tuple(sorted(outs))
            if len(flux) != (2 if len(ins) == 2 else 1) or not all(
                _cut_bond(lat, sites, l) for l in flux
            ):
                raise GeometryError(
                    f"star {(x, y)}: outside side {flux} not a valid flux set "
                    f"for part size {len(ins)}"
                )
        for l in flux:
            if l in claimed and claimed[l][1] != flux:
                raise GeometryError(
                    f"bond {l} claimed inconsistently by {claimed[l][0]} "
                    f"and {(x, y)}"
                )
            claimed.setdefault(l, ((x, y), flux))
        parts.append(StarPart((x, y), tuple(sorted(ins)), flux))
    return _clockwise(parts, sites)


def _clockwise(parts: list[StarPart], sites) -> list[StarPart]:
    if not parts:
        return parts
    cx = sum(x for x, _ in sites) / len(sites)
    cy = sum(y for _, y in sites) / len(sites)
    start = np.arctan2(-1.0, 1.0)  # north-west

    def key(p: StarPart):
        dx, dy = p.center[0] - cx, p.center[1] - cy
        ang = np.arctan2(dx, dy)  # clockwise from north
        return ((ang - start) % (2 * np.pi), -p.center[1], p.center[0])

    return sorted(parts, key=key)


def count_contributing_corners(parts: Iterable[StarPart]) -> int:
    return sum(1 for p in parts if p.size == 2)


def boundary_length(lat: Lattice, reg: Region) -> int:
    """Number of links joining a region site to an outside site; independent
    of the bipartition policy."""
    sites = reg.sites(lat)
    n = 0
    for (x, y) in sites:
        for l in (Link(x, y, "u"), Link(x, y, "r"),
                  Link(x, y - 1, "u"), Link(x - 1, y, "r")):
            if lat.exists(l) and _cut_bond(lat, sites, l):
                n += 1
    return n


def enumerate_sectors(
    parts: list[StarPart], only_admissible: bool = False, cap: int = SECTOR_ENUM_CAP
) -> list[FluxSector]:
    n = len(parts)
    if n > cap:
        raise LimitError(f"{n} star-parts exceeds the enumeration cap {cap}")
    out = [FluxSector(charges) for charges in itertools.product((0, 1), repeat=n)]
    if only_admissible:
        out = [s for s in out if s.admissible]
    return out
