import math

import numpy as np
import pytest

from gipeps.errors import BlockLeakage, CapExceeded, GeometryError
from gipeps.gauge import (
    MinimalModelParams,
    minimal_model,
    random_gauge_tensor,
    toric_tensor,
)
from gipeps.geometry import FluxSector, Lattice, Link, rectangle, stairs
from gipeps.oracle import (
    BlockedRDM,
    StateVector,
    build_confined_state,
    build_deconfined_state,
    check_gauss,
    confined_sr_entropy_check,
    contract_state,
    decomposition_identity_check,
    entropies,
    rdm_blocks,
    wilson_area_base,
    wilson_expectation,
    wilson_loop_links,
)

ALPHA_ONLY = MinimalModelParams(1.0, 0.0, 0.0, 0.0)
GENERIC = MinimalModelParams(1.0, 0.3, 0.5, 0.9)


class TestContractState:
    def test_product_state_on_2x2(self):
        st = contract_state(minimal_model(ALPHA_ONLY), Lattice(2, 2)).normalized()
        assert set(st.amps) == {0}
        assert st.amps[0] == pytest.approx(1.0)

    def test_toric_2x2_equal_loop_amplitudes(self):
        st = contract_state(toric_tensor(), Lattice(2, 2)).normalized()
        # 4 free links, one plaquette: vacuum and the single loop
        assert len(st.amps) == 2
        vals = sorted(st.amps.values())
        assert vals[0] == pytest.approx(vals[1])
        assert vals[0] == pytest.approx(1 / math.sqrt(2))

    def test_toric_3x3_closed_loops_only(self):
        st = contract_state(toric_tensor(), Lattice(3, 3)).normalized()
        assert len(st.amps) == 16  # 2^4 plaquette subsets
        assert check_gauss(st) < 1e-12
        for a in st.amps.values():
            assert abs(a) == pytest.approx(0.25)

    def test_matches_confined_builder_at_kappa_one(self):
        # toric PEPS == plaquette-group expansion with kappa = 1
        st1 = contract_state(toric_tensor(), Lattice(3, 2)).normalized()
        st2 = build_confined_state(1.0, Lattice(3, 2))
        assert set(st1.amps) == set(st2.amps)
        for k in st1.amps:
            assert st1.amps[k] == pytest.approx(st2.amps[k])

    def test_confined_amplitudes_match_expansion(self):
        st1 = contract_state(toric_tensor(), Lattice(2, 2))
        # plaquette weights: amplitude kappa^(flipped plaquettes)
        k = 0.6
        st2 = build_confined_state(k, Lattice(2, 2))
        assert st2.amps[0] == pytest.approx(1 / math.sqrt(1 + k * k))
        loop_cfg = [c for c in st2.amps if c != 0][0]
        assert st2.amps[loop_cfg] == pytest.approx(k / math.sqrt(1 + k * k))

    def test_d4_padded_toric(self):
        # sigma = 0 at D=4 contracts to the toric state
        st4 = contract_state(random_gauge_tensor(4, 1.0, 0.0, seed=0), Lattice(3, 2))
        st2 = contract_state(toric_tensor(), Lattice(3, 2))
        n4, n2 = st4.normalized(), st2.normalized()
        assert set(n4.amps) == set(n2.amps)
        for cfg in n4.amps:
            assert n4.amps[cfg] == pytest.approx(n2.amps[cfg])

    def test_cap(self):
        with pytest.raises(CapExceeded):
            contract_state(toric_tensor(), Lattice(5, 5))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_d4_gauss(self, seed):
        st = contract_state(
            random_gauge_tensor(4, 1.0, 0.8, seed=seed), Lattice(3, 3)
        ).normalized()
        assert check_gauss(st) < 1e-12


class TestGauss:
    def test_corrupted_state_detected(self):
        st = contract_state(toric_tensor(), Lattice(3, 3)).normalized()
        k0 = next(iter(st.amps))
        bad = dict(st.amps)
        bad[k0 ^ 1] = bad.get(k0 ^ 1, 0.0) + 0.3  # flip one spin of one config
        viol = check_gauss(StateVector(st.lattice, bad))
        assert viol >= 0.3

    def test_trivial_lattice(self):
        st = contract_state(minimal_model(ALPHA_ONLY), Lattice(1, 1))
        assert check_gauss(st) == 0.0


class TestRdmBlocks:
    def test_product_state_single_block(self):
        st = contract_state(minimal_model(ALPHA_ONLY), Lattice(3, 3)).normalized()
        blocks = rdm_blocks(st, rectangle(1, 1))
        assert len(blocks.blocks) == 1
        assert blocks.p((0, 0, 0, 0)) == pytest.approx(1.0)

    def test_toric_1x1_uniform_admissible(self):
        st = contract_state(toric_ten := toric_tensor(), Lattice(3, 3)).normalized()
        blocks = rdm_blocks(st, rectangle(1, 1))
        probs = {sec: blocks.p(sec) for sec in blocks.blocks}
        assert len(probs) == 8  # admissible sectors of 4 parts
        for sec, p in probs.items():
            assert sum(sec) % 2 == 0
            assert p == pytest.approx(1 / 8)

    def test_trace_preservation(self):
        st = contract_state(minimal_model(GENERIC), Lattice(3, 3)).normalized()
        blocks = rdm_blocks(st, rectangle(1, 1))
        assert sum(blocks.p(sec) for sec in blocks.blocks) == pytest.approx(1.0)

    def test_odd_parity_sectors_empty(self):
        st = contract_state(minimal_model(GENERIC), Lattice(3, 3)).normalized()
        blocks = rdm_blocks(st, rectangle(1, 1))
        for sec in blocks.blocks:
            assert sum(sec) % 2 == 0 or blocks.p(sec) <= 1e-12


class TestEntropies:
    def test_product_state_zero(self):
        st = contract_state(minimal_model(ALPHA_ONLY), Lattice(3, 3)).normalized()
        rep = entropies(rdm_blocks(st, rectangle(1, 1)), n=2.0)
        assert rep.S == pytest.approx(0.0, abs=1e-12)
        assert rep.p2 == pytest.approx(1.0)

    def test_maximally_mixed_block(self):
        blocks = BlockedRDM([], {(0,): np.eye(2) / 2.0}, [])
        rep = entropies(blocks, n=2.0)
        assert rep.S_bar_phi[(0,)] == pytest.approx(math.log(2))
        assert rep.S_n_bar_phi[(0,)] == pytest.approx(math.log(2))

    def test_two_equal_pure_blocks(self):
        blocks = BlockedRDM(
            [], {(0,): np.array([[0.5]]), (1,): np.array([[0.5]])}, []
        )
        rep = entropies(blocks, n=1.0)
        assert rep.S == pytest.approx(math.log(2))

    @pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 3.0])
    def test_sum_rules(self, n):
        st = contract_state(minimal_model(GENERIC), Lattice(4, 4)).normalized()
        blocks = rdm_blocks(st, rectangle(2, 2))
        rep = entropies(blocks, n=n)
        if n == 1.0:
            assert sum(rep.S_phi.values()) == pytest.approx(rep.S, abs=1e-10)
        else:
            lhs = sum(math.exp((1 - n) * s) for s in rep.S_n_phi.values())
            assert lhs == pytest.approx(math.exp((1 - n) * rep.S_n), abs=1e-10)

    def test_renyi_monotone_and_vn_limit(self):
        st = contract_state(minimal_model(GENERIC), Lattice(4, 4)).normalized()
        blocks = rdm_blocks(st, rectangle(2, 2))
        values = [entropies(blocks, n=n).S_n for n in (1.0001, 1.5, 2, 3)]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        assert values[0] == pytest.approx(entropies(blocks, 1.0).S, abs=1e-3)

    def test_decomposition_identity(self):
        for params in (GENERIC, MinimalModelParams(1, 1, 1, 1)):
            st = contract_state(minimal_model(params), Lattice(3, 3)).normalized()
            blocks = rdm_blocks(st, rectangle(1, 1))
            assert decomposition_identity_check(blocks) <= 1e-10

    def test_single_sector_reduces_to_sbar(self):
        st = contract_state(minimal_model(ALPHA_ONLY), Lattice(3, 3)).normalized()
        blocks = rdm_blocks(st, rectangle(1, 1))
        rep = entropies(blocks, 1.0)
        (sec,) = blocks.blocks
        assert rep.S == pytest.approx(rep.S_bar_phi[sec], abs=1e-12)


class TestSchmidtSymmetry:
    def test_region_and_complement_share_spectra(self):
        st = contract_state(minimal_model(GENERIC), Lattice(3, 3)).normalized()
        a = rectangle(1, 1)
        blocks_a = rdm_blocks(st, a)
        spec_a = np.sort(
            np.concatenate([v for v in map_spectra(blocks_a)])
        )[::-1]
        # complement spectrum from the dense RDM over the remaining links
        spec_b = complement_spectrum(st, a)
        k = min(len(spec_a), len(spec_b))
        np.testing.assert_allclose(spec_a[:k], spec_b[:k], atol=1e-10)


def map_spectra(blocks: BlockedRDM):
    from gipeps.oracle import block_spectrum

    return [block_spectrum(m) for m in blocks.blocks.values()]


def complement_spectrum(state: StateVector, reg) -> np.ndarray:
    from gipeps.geometry import region_links

    lat = state.lattice
    a_links = set(region_links(lat, reg))
    b_links = [l for l in state.links if l not in a_links]
    groups = {}
    for k, amp in state.amps.items():
        bk = tuple((k >> state.bit(l)) & 1 for l in b_links)
        ak = tuple((k >> state.bit(l)) & 1 for l in a_links)
        groups.setdefault(ak, {})[bk] = amp
    keys = sorted({bk for g in groups.values() for bk in g})
    lut = {bk: i for i, bk in enumerate(keys)}
    rho = np.zeros((len(keys), len(keys)))
    for g in groups.values():
        v = np.zeros(len(keys))
        for bk, amp in g.items():
            v[lut[bk]] = amp
        rho += np.outer(v, v)
    vals = np.linalg.eigvalsh(rho)
    return np.sort(np.clip(vals, 0, None))[::-1]


class TestConfinedState:
    def test_kappa_zero_is_product(self):
        st = build_confined_state(0.0, Lattice(3, 3))
        assert set(st.amps) == {0}

    def test_kappa_one_is_toric(self):
        st = build_confined_state(1.0, Lattice(3, 3))
        tor = contract_state(toric_tensor(), Lattice(3, 3)).normalized()
        assert set(st.amps) == set(tor.amps)
        for k in st.amps:
            assert st.amps[k] == pytest.approx(tor.amps[k])

    @pytest.mark.parametrize("R1,R2", [(1, 1), (2, 1), (1, 2), (2, 2)])
    def test_wilson_area_law_exact(self, R1, R2):
        lat = Lattice(3, 3)
        st = build_confined_state(0.5, lat)
        loop = wilson_loop_links(lat, 0, 0, R1, R2)
        want = wilson_area_base(0.5) ** (R1 * R2)
        assert wilson_expectation(st, loop) == pytest.approx(want, abs=1e-10)

    def test_gauss(self):
        assert check_gauss(build_confined_state(0.7, Lattice(3, 3))) < 1e-12


class TestDeconfinedState:
    def test_kappa_zero_is_toric(self):
        st = build_deconfined_state(0.0, Lattice(3, 3))
        tor = contract_state(toric_tensor(), Lattice(3, 3)).normalized()
        for k in tor.amps:
            assert st.amps[k] == pytest.approx(tor.amps[k])

    def test_sr_entanglement_vanishes(self):
        st = build_deconfined_state(0.4, Lattice(4, 4))
        blocks = rdm_blocks(st, rectangle(2, 2))
        rep = entropies(blocks, 1.0)
        for sec, s in rep.S_bar_phi.items():
            assert s <= 1e-10

    def test_wilson_perimeter_decay(self):
        lat = Lattice(4, 4)
        st = build_deconfined_state(0.3, lat)
        w11 = wilson_expectation(st, wilson_loop_links(lat, 0, 0, 1, 1))
        w21 = wilson_expectation(st, wilson_loop_links(lat, 0, 0, 2, 1))
        w22 = wilson_expectation(st, wilson_loop_links(lat, 0, 0, 2, 2))
        # perimeter 4, 6, 8: ratios follow the perimeter, not the area
        r = w21 / w11
        assert w22 / w21 == pytest.approx(r, rel=0.2)
        assert abs(w22) < abs(w21) < abs(w11)


class TestWilsonOnPeps:
    def test_toric_loop_is_one(self):
        st = contract_state(toric_tensor(), Lattice(3, 3)).normalized()
        loop = wilson_loop_links(st.lattice, 0, 0, 1, 1)
        assert wilson_expectation(st, loop) == pytest.approx(1.0)

    def test_product_state_loop_is_zero(self):
        st = contract_state(minimal_model(ALPHA_ONLY), Lattice(3, 3)).normalized()
        loop = wilson_loop_links(st.lattice, 0, 0, 1, 1)
        assert wilson_expectation(st, loop) == pytest.approx(0.0, abs=1e-14)


class TestConfinedSrCheck:
    @pytest.mark.parametrize("area", [2, 4])
    def test_block_spectrum_closed_form(self, area):
        rep = confined_sr_entropy_check(0.5, area)
        assert rep.v0 == pytest.approx(wilson_area_base(0.5) ** area)
        got = np.sort(rep.spectrum)[::-1][:2]
        np.testing.assert_allclose(got, rep.expected, atol=1e-10)
        # the rest of the spectrum vanishes: exact rank 2
        assert np.all(np.abs(np.sort(rep.spectrum)[::-1][2:]) < 1e-10)

    def test_v0_value_frozen(self):
        # kappa_a = 0.5, area 4: v0 = 0.8^4 = 0.4096
        rep = confined_sr_entropy_check(0.5, 4)
        assert rep.v0 == pytest.approx(0.4096, abs=1e-12)

    def test_closed_form_limit(self):
        rep = confined_sr_entropy_check(0.2, 4)
        # v0 -> 0: numeric entropy approaches log 2 and the closed form
        assert rep.numeric_entropy == pytest.approx(math.log(2), abs=5e-3)
        assert rep.gap < 5e-3

    def test_odd_area_rejected(self):
        with pytest.raises(GeometryError):
            confined_sr_entropy_check(0.5, 3)


class TestRankBound:
    @pytest.mark.parametrize(
        "reg,lat",
        [
            (rectangle(1, 1), Lattice(3, 3)),
            (rectangle(2, 2), Lattice(4, 4)),
            (rectangle(2, 1), Lattice(4, 3)),
            (rectangle(1, 3), Lattice(3, 5)),
        ],
    )
    @pytest.mark.parametrize("seed", [0, 3])
    def test_normalized_block_rank(self, reg, lat, seed):
        rng = np.random.default_rng(seed)
        params = MinimalModelParams(*rng.uniform(0.2, 1.2, size=4))
        st = contract_state(minimal_model(params), lat).normalized()
        blocks = rdm_blocks(st, reg)
        from gipeps.geometry import boundary_star_parts, count_contributing_corners
        from gipeps.oracle import block_spectrum

        corners = count_contributing_corners(boundary_star_parts(lat, reg))
        for sec, mat in blocks.blocks.items():
            spec = block_spectrum(mat)
            p = spec.sum()
            if p <= 1e-14:
                continue
            rank = int(np.sum(spec / p > 1e-10))
            assert rank <= 2**corners, (sec, rank, corners)
