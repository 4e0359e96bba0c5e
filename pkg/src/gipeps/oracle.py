"""Brute-force ground truth on small lattices.

States are stored sparsely: amplitude per link configuration, keyed by an
integer whose bits enumerate the dynamical links big-endian in registry
order (row-major over sites, up link before right link). Gauge-invariant
states live on closed-loop configurations, of which there are only 2^P for
P plaquettes, so sparse storage reaches lattices whose dense vector would
not fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlockLeakage, CapExceeded, GeometryError
from .gauge import GaugeSiteTensor
from .geometry import (
    FluxSector,
    Lattice,
    Link,
    Region,
    StarPart,
    boundary_star_parts,
    rectangle,
    region_links,
)

LINK_CAP = 24
PLAQUETTE_CAP = 16
RDM_LINK_CAP = 12


@dataclass
class StateVector:
    """Sparse amplitudes over link configurations of an open lattice."""

    lattice: Lattice
    amps: dict[int, float]

    @property
    def links(self) -> list[Link]:
        return self.lattice.free_links()

    @property
    def n_links(self) -> int:
        return len(self.links)

    def norm(self) -> float:
        return math.sqrt(sum(a * a for a in self.amps.values()))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero state")
        return StateVector(self.lattice, {k: a / n for k, a in self.amps.items()})

    def bit(self, link: Link) -> int:
        """Big-endian bit position of a link in the configuration integer."""
        idx = self.links.index(link)
        return self.n_links - 1 - idx

    def overlap(self, other: "StateVector") -> float:
        a, b = self.amps, other.amps
        if len(b) < len(a):
            a, b = b, a
        return sum(v * b.get(k, 0.0) for k, v in a.items())


def contract_state(site: GaugeSiteTensor, lat: Lattice) -> StateVector:
    """Exact contraction of the PEPS to amplitudes per link configuration.

    Boundary virtual legs are clamped to the vacuum index, which freezes the
    top-row up links and right-column right links. The Gauss constraint
    restricts the support to the plaquette cycle space, so amplitudes are
    enumerated over the 2^P closed-loop configurations; each one fixes all
    virtual charges, leaving a small multiplicity network to contract (a
    plain product of entries when m = 1).
    """
    links = lat.free_links()
    n = len(links)
    if n > LINK_CAP:
        raise CapExceeded(f"{n} links exceeds the oracle cap {LINK_CAP}")
    D, m = site.D, site.m
    T = site.data.array
    pos = {l: n - 1 - i for i, l in enumerate(links)}
    masks = _plaquette_masks(links, lat)

    def link_value(cfg: int, l: Link) -> int:
        return (cfg >> pos[l]) & 1 if l in pos else 0

    def amplitude(cfg: int) -> float:
        # charge of each virtual leg is pinned by the configuration; clamped
        # legs (lattice edge) carry charge 0 and multiplicity 0
        slices = {}
        for (x, y) in lat.sites():
            cu = link_value(cfg, Link(x, y, "u"))
            cr = link_value(cfg, Link(x, y, "r"))
            cd = link_value(cfg, Link(x, y - 1, "u")) if y > 0 else 0
            cl = link_value(cfg, Link(x - 1, y, "r")) if x > 0 else 0
            t = T[
                cu * m : cu * m + m,
                cr * m : cr * m + m,
                cd * m : cd * m + m,
                cl * m : cl * m + m,
            ]
            slices[(x, y)] = t
        if m == 1:
            out = 1.0
            for t in slices.values():
                out *= float(t[0, 0, 0, 0])
            return out
        # multiplicity network: boundary clamps pick multiplicity 0
        V = np.ones((1,) * lat.Lx)
        for y in range(lat.Ly):
            W = V[None, ...]  # (carry, b_0..b_{Lx-1})
            for x in range(lat.Lx):
                t = slices[(x, y)]
                if y == lat.Ly - 1:
                    t = t[:1]
                if x == lat.Lx - 1:
                    t = t[:, :1]
                if y == 0:
                    t = t[:, :, :1]
                if x == 0:
                    t = t[:, :, :, :1]
                tmp = np.tensordot(W, t, axes=([0, 1 + x], [3, 2]))
                tmp = np.moveaxis(tmp, -2, x)  # u -> column slot
                W = np.moveaxis(tmp, -1, 0)  # r -> carry
            V = W[0]
        return float(V.reshape(-1)[0])

    amps: dict[int, float] = {}
    for s in range(1 << len(masks)):
        cfg = 0
        for i, mask in enumerate(masks):
            if (s >> i) & 1:
                cfg ^= mask
        a = amplitude(cfg)
        if a != 0.0:
            amps[cfg] = a
    return StateVector(lat, amps)


def check_gauss(state: StateVector, lat: Lattice | None = None) -> float:
    """Max over stars of ||G_s psi - psi||; zero for gauge-invariant
    states. Frozen boundary links sit in the vacuum and contribute +1 to
    every star parity."""
    lat = lat or state.lattice
    bits = {l: state.bit(l) for l in state.links}
    worst = 0.0
    for (x, y) in lat.sites():
        star = [
            l
            for l in lat.star_links(x, y).values()
            if l is not None and l in bits
        ]
        if not star:
            continue
        bad = 0.0
        for k, a in state.amps.items():
            parity = 0
            for l in star:
                parity ^= (k >> bits[l]) & 1
            if parity:
                bad += a * a
        worst = max(worst, 2.0 * math.sqrt(bad))
    return worst


@dataclass
class BlockedRDM:
    """Flux-resolved reduced density matrix of a region's link set."""

    parts: list[StarPart]
    blocks: dict[tuple[int, ...], np.ndarray]  # unnormalized, trace = p(phi)
    a_links: list[Link]

    def p(self, charges: tuple[int, ...]) -> float:
        b = self.blocks.get(charges)
        return float(np.trace(b)) if b is not None else 0.0

    def sectors(self) -> list[FluxSector]:
        return [FluxSector(c) for c in sorted(self.blocks)]


def rdm_blocks(state: StateVector, reg: Region) -> BlockedRDM:
    """Partial trace onto the region's links, bucketed by the flux of every
    boundary star-part (sigma-z product over the part's inside links)."""
    lat = state.lattice
    a_links = sorted(region_links(lat, reg), key=state.links.index)
    if len(a_links) > RDM_LINK_CAP:
        raise CapExceeded(
            f"{len(a_links)} region links exceeds the RDM cap {RDM_LINK_CAP}"
        )
    parts = boundary_star_parts(lat, reg)
    a_bits = {l: state.bit(l) for l in a_links}

    def akey(k: int) -> int:
        out = 0
        for l in a_links:
            out = (out << 1) | ((k >> a_bits[l]) & 1)
        return out

    def bkey(k: int) -> int:
        out = 0
        for l in state.links:
            if l not in a_bits:
                out = (out << 1) | ((k >> state.bit(l)) & 1)
        return out

    groups: dict[int, list[tuple[int, float]]] = {}
    for k, amp in state.amps.items():
        groups.setdefault(bkey(k), []).append((akey(k), amp))

    rho = {}
    for _, items in groups.items():
        for ai, vi in items:
            for aj, vj in items:
                rho[(ai, aj)] = rho.get((ai, aj), 0.0) + vi * vj

    # flux of an a-config: parity over each part's inside links, read from
    # the a-key bit layout (big-endian over a_links)
    n_a = len(a_links)
    pos = {l: n_a - 1 - i for i, l in enumerate(a_links)}
    part_pos = [[pos[l] for l in p.inside] for p in parts]

    def sector_of(a: int) -> tuple[int, ...]:
        out = []
        for plist in part_pos:
            parity = 0
            for b in plist:
                parity ^= (a >> b) & 1
            out.append(parity)
        return tuple(out)

    sector_cache: dict[int, tuple[int, ...]] = {}
    leak = 0.0
    by_sector: dict[tuple[int, ...], set[int]] = {}
    for (ai, aj), v in rho.items():
        si = sector_cache.setdefault(ai, sector_of(ai))
        sj = sector_cache.setdefault(aj, sector_of(aj))
        if si != sj:
            leak = max(leak, abs(v))
        else:
            by_sector.setdefault(si, set()).update((ai, aj))
    if leak > 1e-10:
        raise BlockLeakage(f"off-block coherence {leak} above 1e-10")

    blocks = {}
    for sec, configs in sorted(by_sector.items()):
        idx = sorted(configs)
        lut = {a: i for i, a in enumerate(idx)}
        mat = np.zeros((len(idx), len(idx)))
        for (ai, aj), v in rho.items():
            if sector_cache[ai] == sec and sector_cache[aj] == sec:
                mat[lut[ai], lut[aj]] = v
        blocks[sec] = mat
    return BlockedRDM(parts, blocks, a_links)


def block_spectrum(mat: np.ndarray) -> np.ndarray:
    """Eigenvalues of a PSD block, clipped at -1e-12 and renormalized to the
    original trace."""
    vals = np.linalg.eigvalsh(mat)
    if vals.size and vals.min() < -1e-10:
        raise BlockLeakage(f"block eigenvalue {vals.min()} below -1e-10")
    tr = vals.sum()
    vals = np.clip(vals, 0.0, None)
    if vals.sum() > 0 and tr > 0:
        vals *= tr / vals.sum()
    return np.sort(vals)[::-1]


def _entropy(vals: np.ndarray) -> float:
    v = vals[vals > 0]
    return float(-(v * np.log(v)).sum())


def _renyi(vals: np.ndarray, n: float) -> float:
    v = vals[vals > 0]
    return float(np.log((v**n).sum()) / (1.0 - n))


@dataclass
class EntropyReport:
    n: float
    S: float
    S_n: float
    p2: float
    p: dict[tuple[int, ...], float]
    S_phi: dict[tuple[int, ...], float]
    S_n_phi: dict[tuple[int, ...], float]
    S_bar_phi: dict[tuple[int, ...], float]
    S_n_bar_phi: dict[tuple[int, ...], float]
    p2_phi: dict[tuple[int, ...], float]
    spectra: dict[tuple[int, ...], np.ndarray]


def entropies(blocks: BlockedRDM, n: float = 2.0) -> EntropyReport:
    """Full and superselection-resolved entropies of a blocked RDM.

    S_phi / S_n_phi are computed on the unnormalized blocks (they sum or
    moment-sum to the full quantities); the barred versions normalize each
    block by its probability. Renyi order n is any real >= 1; n = 1 returns
    the von Neumann limit.
    """
    if n < 1:
        raise ValueError("Renyi order must be >= 1")
    spectra = {sec: block_spectrum(m) for sec, m in blocks.blocks.items()}
    p = {sec: float(v.sum()) for sec, v in spectra.items()}
    all_vals = (
        np.concatenate(list(spectra.values())) if spectra else np.zeros(0)
    )
    S = _entropy(all_vals)
    S_n = _entropy(all_vals) if n == 1 else _renyi(all_vals, n)
    p2 = float((all_vals**2).sum())
    S_phi, S_n_phi, S_bar, S_n_bar, p2_phi = {}, {}, {}, {}, {}
    for sec, vals in spectra.items():
        S_phi[sec] = _entropy(vals)
        S_n_phi[sec] = _entropy(vals) if n == 1 else _renyi(vals, n)
        p2_phi[sec] = float((vals**2).sum())
        if p[sec] > 0:
            bar = vals / p[sec]
            S_bar[sec] = _entropy(bar)
            S_n_bar[sec] = _entropy(bar) if n == 1 else _renyi(bar, n)
        else:
            S_bar[sec] = 0.0
            S_n_bar[sec] = 0.0
    return EntropyReport(
        n, S, S_n, p2, p, S_phi, S_n_phi, S_bar, S_n_bar, p2_phi, spectra
    )


def decomposition_identity_check(blocks: BlockedRDM) -> float:
    """|S_A - (sum_phi p S_bar(phi) - sum_phi p log p)|."""
    rep = entropies(blocks, n=1.0)
    rhs = 0.0
    for sec, prob in rep.p.items():
        if prob > 0:
            rhs += prob * rep.S_bar_phi[sec] - prob * math.log(prob)
    return abs(rep.S - rhs)


# ---------------------------------------------------------------------------
# Appendix states: explicit plaquette-group expansion
# ---------------------------------------------------------------------------


def _plaquette_masks(state_links: list[Link], lat: Lattice) -> list[int]:
    n = len(state_links)
    pos = {l: n - 1 - i for i, l in enumerate(state_links)}
    masks = []
    for (x, y) in lat.plaquettes():
        m = 0
        for l in lat.plaquette_links(x, y):
            m |= 1 << pos[l]
        masks.append(m)
    return masks


def build_confined_state(kappa_a: float, lat: Lattice) -> StateVector:
    """Product over plaquettes of (1 + kappa_a X_p)/sqrt(1+kappa_a^2) on the
    all-up state: amplitude kappa_a^(number of flipped plaquettes),
    normalized. Its Wilson expectation is exactly area-law with base
    wilson_area_base(kappa_a)."""
    P = len(lat.plaquettes())
    if P > PLAQUETTE_CAP:
        raise CapExceeded(f"{P} plaquettes exceeds the cap {PLAQUETTE_CAP}")
    links = lat.free_links()
    masks = _plaquette_masks(links, lat)
    amps: dict[int, float] = {}
    for s in range(1 << P):
        cfg = 0
        w = 1.0
        for i, m in enumerate(masks):
            if (s >> i) & 1:
                cfg ^= m
                w *= kappa_a
        amps[cfg] = amps.get(cfg, 0.0) + w
    state = StateVector(lat, {k: v for k, v in amps.items() if v != 0.0})
    return state.normalized()


def wilson_area_base(kappa_a: float) -> float:
    """Exact per-plaquette decay base of Wilson loops in the confined
    state: 2 kappa_a / (1 + kappa_a^2)."""
    return 2.0 * kappa_a / (1.0 + kappa_a**2)


def build_deconfined_state(kappa_p: float, lat: Lattice) -> StateVector:
    """Toric-code state reweighted by per-link string tension
    (1 + kappa_p sigma_z)/sqrt(1+kappa_p^2); Wilson loops decay with the
    perimeter and every flux block is a product state."""
    P = len(lat.plaquettes())
    if P > PLAQUETTE_CAP:
        raise CapExceeded(f"{P} plaquettes exceeds the cap {PLAQUETTE_CAP}")
    links = lat.free_links()
    masks = _plaquette_masks(links, lat)
    configs = set()
    for s in range(1 << P):
        cfg = 0
        for i, m in enumerate(masks):
            if (s >> i) & 1:
                cfg ^= m
        configs.add(cfg)
    ratio = (1.0 - kappa_p) / (1.0 + kappa_p)
    amps = {cfg: ratio ** bin(cfg).count("1") for cfg in configs}
    return StateVector(lat, amps).normalized()


def wilson_loop_links(
    lat: Lattice, x0: int, y0: int, R1: int, R2: int
) -> list[Link]:
    """Links of the R1 x R2 rectangular Wilson loop with lower-left site
    (x0, y0): R1 plaquettes wide, R2 tall."""
    links = [Link(x0 + i, y0, "r") for i in range(R1)]
    links += [Link(x0 + i, y0 + R2, "r") for i in range(R1)]
    links += [Link(x0, y0 + j, "u") for j in range(R2)]
    links += [Link(x0 + R1, y0 + j, "u") for j in range(R2)]
    for l in links:
        if not lat.is_free(l):
            raise GeometryError(f"loop link {l} is frozen or off-lattice")
    return links


def wilson_expectation(state: StateVector, loop: list[Link]) -> float:
    """<W> = <psi| prod sigma_x |psi> / <psi|psi> over the loop links."""
    mask = 0
    for l in loop:
        mask |= 1 << state.bit(l)
    num = sum(a * state.amps.get(k ^ mask, 0.0) for k, a in state.amps.items())
    den = sum(a * a for a in state.amps.values())
    return num / den


@dataclass
class ConfinedSrReport:
    v0: float
    spectrum: np.ndarray
    expected: tuple[float, float]
    numeric_entropy: float
    closed_form: float
    gap: float


def confined_sr_entropy_check(
    kappa_a: float, region_area: int
) -> ConfinedSrReport:
    """Single-flux-line sector of the confined state on a reflection
    symmetric lattice: the normalized block is exactly rank 2 with spectrum
    (1 +- v0)/2, v0 = wilson_area_base(kappa_a)^region_area. Reports the
    numeric block entropy next to the asymptotic closed form log 2 + v0^2."""
    if region_area < 2 or region_area % 2 != 0:
        raise GeometryError(
            "single-line geometry uses a 2-row plaquette region: area must "
            "be an even integer >= 2"
        )
    a = region_area // 2
    lat = Lattice(a + 3, 5)
    reg = rectangle(a + 1, 3, offset=(1, 1))
    state = build_confined_state(kappa_a, lat)
    parts = boundary_star_parts(lat, reg)
    west, east = (1, 2), (a + 1, 2)
    charges = []
    for p in parts:
        charges.append(1 if p.center in (west, east) else 0)
    if sum(charges) != 2:
        raise GeometryError("could not locate the two mid-row edge parts")
    sector = tuple(charges)
    blocks = rdm_blocks(state, reg)
    mat = blocks.blocks.get(sector)
    if mat is None:
        raise GeometryError(f"sector {sector} has no support")
    spec = block_spectrum(mat)
    prob = float(spec.sum())
    bar = spec / prob
    v0 = wilson_area_base(kappa_a) ** region_area
    expected = ((1.0 + v0) / 2.0, (1.0 - v0) / 2.0)
    numeric = _entropy(bar)
    closed = math.log(2.0) + v0**2
    return ConfinedSrReport(
        v0, bar, expected, numeric, closed, abs(numeric - closed)
    )
