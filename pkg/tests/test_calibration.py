"""Essentiality resolution and production-function calibration."""
from __future__ import annotations

import numpy as np
import pytest

from esri_net import (
    EssentialityMatrix,
    Firm,
    ProductionNetwork,
    SupplyEdge,
    UnknownSector,
    calibrate,
    classify_inputs,
    compute_strengths,
)

from conftest import FIG1, RandomCase


# -- essentiality lookup -----------------------------------------------------


def test_from_csv_reads_pairs(fig1_matrix):
    assert fig1_matrix.is_essential("D35", "C23") is True
    assert fig1_matrix.is_essential("G46", "C25") is False
    # unknown pairs fall back to non-essential
    assert fig1_matrix.is_essential("A01", "A01") is False


def test_from_csv_schema_errors(tmp_path):
    p = tmp_path / "ess.csv"
    p.write_text("supplier_sector,buyer_sector\nA,B\n")
    with pytest.raises(Exception):
        EssentialityMatrix.from_csv(p)
    p.write_text("supplier_sector,buyer_sector,essential\nA,B,2\n")
    with pytest.raises(Exception):
        EssentialityMatrix.from_csv(p)


def test_default_matrix_uses_supplier_letter():
    m = EssentialityMatrix.default()
    # mining, manufacturing, and utilities supply essential inputs
    assert m.is_essential("B05", "G46") is True
    assert m.is_essential("C25", "A01") is True
    assert m.is_essential("D35", "C25") is True
    assert m.is_essential("G46", "C25") is False
    assert m.is_essential("A01", "D35") is False


def test_exact_pair_overrides_letter_rule():
    m = EssentialityMatrix(
        pairs={("C25", "G46"): False}, default_rule="supplier-letter", source="test"
    )
    assert m.is_essential("C25", "G46") is False  # exact pair wins
    assert m.is_essential("C25", "G47") is True   # letter rule for the rest


def test_strict_matrix_raises_on_unknown_pair():
    m = EssentialityMatrix(pairs={("A01", "B05"): True}, default_rule=None, source="test")
    assert m.is_essential("A01", "B05") is True
    with pytest.raises(UnknownSector):
        m.is_essential("A01", "C25")


# -- input classification ----------------------------------------------------


def test_fig1_partition(fig1_net, fig1_matrix):
    part = classify_inputs(fig1_net, fig1_matrix)
    # the only essential supply relation is d -> e
    ess = part.essential_suppliers(fig1_net, "e")
    assert ess == {"D35": ["d"]}
    assert part.essential_suppliers(fig1_net, "c") == {}
    assert set(part.nonessential_suppliers(fig1_net, "c")) == {"a", "b", "d"}
    assert part.nonessential_suppliers(fig1_net, "d") == ["e"]


def test_partition_groups_by_supplier_sector():
    firms = [
        Firm("s1", "C10"),
        Firm("s2", "C10"),
        Firm("s3", "D35"),
        Firm("buyer", "G46"),
    ]
    edges = [
        SupplyEdge("s1", "buyer", 1.0),
        SupplyEdge("s2", "buyer", 2.0),
        SupplyEdge("s3", "buyer", 4.0),
    ]
    net = ProductionNetwork(firms, edges)
    part = classify_inputs(net, EssentialityMatrix.default())
    groups = part.essential_suppliers(net, "buyer")
    assert groups == {"C10": ["s1", "s2"], "D35": ["s3"]}


# -- calibrated functions ----------------------------------------------------


def test_x0_rules(fig1_net, fig1_matrix):
    part = classify_inputs(fig1_net, fig1_matrix)
    st = compute_strengths(fig1_net)
    out = calibrate(fig1_net, part, gamma=0.5, x0_rule="out")
    mx = calibrate(fig1_net, part, gamma=0.5, x0_rule="max")
    for i, firm in enumerate(fig1_net.firms):
        s_out, s_in = st.s_out[i], st.s_in[i]
        expect_out = s_out if s_out > 0 else s_in
        assert out.x0[i] == pytest.approx(expect_out)
        assert mx.x0[i] == pytest.approx(max(s_in, s_out))
    with pytest.raises(ValueError):
        calibrate(fig1_net, part, x0_rule="median")


def test_gamma_bounds(fig1_net, fig1_matrix):
    part = classify_inputs(fig1_net, fig1_matrix)
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            calibrate(fig1_net, part, gamma=bad)


def test_partition_must_match_network(fig1_net, fig1_matrix):
    other = RandomCase(np.random.default_rng(3))
    part = classify_inputs(other.net, other.matrix)
    with pytest.raises(ValueError):
        calibrate(fig1_net, part)


def test_beta_is_gamma_share_of_baseline(fig1_net, fig1_matrix):
    part = classify_inputs(fig1_net, fig1_matrix)
    pf = calibrate(fig1_net, part, gamma=0.25)
    for firm_id in ("c", "d"):  # firms with non-essential inputs
        f = pf.function_of(firm_id)
        assert f.beta == pytest.approx(0.25 * f.x0)
    # e buys only essential inputs, so beta plays no role and stays at x0
    assert pf.function_of("e").beta == pytest.approx(pf.function_of("e").x0)


def test_full_supply_reproduces_baseline():
    rng = np.random.default_rng(30)
    for _ in range(20):
        case = RandomCase(rng)
        for gamma in (0.0, 0.5, 1.0):
            pf = case.pf(gamma)
            for firm in case.net.firms:
                full = pf.evaluate(firm.id, {i: 1.0 for i in case.ids})
                assert full == pytest.approx(pf.function_of(firm.id).x0, abs=1e-12)


def test_losing_any_essential_group_kills_output():
    rng = np.random.default_rng(31)
    checked = 0
    for _ in range(30):
        case = RandomCase(rng)
        pf = case.pf(0.5)
        for firm in case.net.firms:
            f = pf.function_of(firm.id)
            for group in f.essential_groups:
                levels = {i: 1.0 for i in case.ids}
                for member in group.members:
                    levels[member] = 0.0
                assert f.evaluate(levels) == pytest.approx(0.0, abs=1e-12)
                checked += 1
    assert checked > 20


def test_losing_all_nonessential_inputs_floors_at_beta():
    rng = np.random.default_rng(32)
    checked = 0
    for _ in range(30):
        case = RandomCase(rng)
        pf = case.pf(0.4)
        for firm in case.net.firms:
            f = pf.function_of(firm.id)
            if not f.nonessential or f.essential_groups:
                continue
            levels = {i: 1.0 for i in case.ids}
            for member in f.nonessential:
                levels[member] = 0.0
            assert f.evaluate(levels) == pytest.approx(f.beta, abs=1e-12)
            checked += 1
    assert checked > 5


def test_gamma_one_ignores_nonessential_inputs():
    rng = np.random.default_rng(33)
    case = RandomCase(rng)
    pf = case.pf(1.0)
    for firm in case.net.firms:
        f = pf.function_of(firm.id)
        if f.essential_groups:
            continue
        levels = {i: 0.0 for i in case.ids}
        assert f.evaluate(levels) == pytest.approx(f.x0, abs=1e-12)


def test_evaluate_is_monotone_in_each_supplier():
    rng = np.random.default_rng(34)
    for _ in range(10):
        case = RandomCase(rng)
        pf = case.pf(0.5)
        for firm in case.net.firms:
            f = pf.function_of(firm.id)
            base = {i: float(rng.uniform(0.0, 1.0)) for i in case.ids}
            lo = f.evaluate(base)
            for supplier in list(f.nonessential) + [
                m for g in f.essential_groups for m in g.members
            ]:
                bumped = dict(base)
                bumped[supplier] = min(1.0, base[supplier] + 0.3)
                assert f.evaluate(bumped) >= lo - 1e-12


def test_output_is_capped_at_baseline():
    rng = np.random.default_rng(35)
    case = RandomCase(rng)
    pf = case.pf(0.5)
    for firm in case.net.firms:
        f = pf.function_of(firm.id)
        over = {i: 2.0 for i in case.ids}  # oversupply cannot beat x0
        assert f.evaluate(over) <= f.x0 + 1e-12


def test_audit_rows_cover_all_firms(fig1_net, fig1_matrix):
    pf = calibrate(fig1_net, classify_inputs(fig1_net, fig1_matrix), gamma=0.0)
    rows = pf.audit_rows()
    assert [r[0] for r in rows] == ["a", "b", "c", "d", "e"]
    by = {r[0]: r for r in rows}
    assert by["c"][1] == pytest.approx(100.0)  # x0 from in-strength fallback
    assert by["e"][3] == 1 and by["e"][4] == 0  # one essential group, no others
    assert by["c"][3] == 0 and by["c"][4] == 3
