"""Input essentiality and generalized Leontief calibration.

Each firm's inputs are split into essential and non-essential sets by a
sector-pair essentiality matrix.  Essential inputs are grouped by supplier
sector; each group enters the production function as a Leontief factor
whose availability is the weighted average of member supplier levels.
Non-essential inputs enter one linear term with intercept beta: output
beta is attainable with no non-essential inputs at all.

Calibration anchors every coefficient so that full input availability
reproduces the reference output x0:

    alpha_ik = (sum of group k in-weights) / x0
    beta     = gamma * x0    (gamma = x0 when the firm has no
                              non-essential inputs)
    alpha_i  = (sum of non-essential in-weights) / (x0 - beta)

x0 is the out-strength, falling back to in-strength for firms that sell
nothing inside the network ("out" rule), or max(s_in, s_out) ("max" rule).
In relative levels x0 cancels, so the rule affects reported coefficients
and absolute evaluation only.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .network import MissingFile, ProductionNetwork, SchemaError, compute_strengths

log = logging.getLogger(__name__)

ESSENTIALITY_COLUMNS = ("supplier_sector", "buyer_sector", "essential")

# Bundled default: products of mining, manufacturing and power suppliers
# are treated as essential for every buyer.
ESSENTIAL_SUPPLIER_LETTERS = frozenset({"B", "C", "D"})

X0_RULES = ("out", "max")


class UnknownSector(Exception):
    """Sector pair not covered by the matrix and no default rule configured."""


@dataclass(frozen=True)
class EssentialityMatrix:
    """Sector-pair essentiality lookup.

    Lookup order: exact (supplier, buyer) code pair, then letter-level
    pair, then the default rule.  default_rule is one of
    "non-essential", "supplier-letter" (essential iff the supplier
    sector letter is in ESSENTIAL_SUPPLIER_LETTERS) or None for strict
    lookups that raise UnknownSector on uncovered pairs.
    """

    pairs: Mapping[tuple[str, str], bool]
    default_rule: str | None
    source: str

    def is_essential(self, supplier_sector: str, buyer_sector: str) -> bool:
        hit = self.pairs.get((supplier_sector, buyer_sector))
        if hit is not None:
            return hit
        hit = self.pairs.get((supplier_sector[:1], buyer_sector[:1]))
        if hit is not None:
            return hit
        if self.default_rule == "non-essential":
            return False
        if self.default_rule == "supplier-letter":
            return supplier_sector[:1] in ESSENTIAL_SUPPLIER_LETTERS
        raise UnknownSector(
            f"sector pair ({supplier_sector!r}, {buyer_sector!r}) is not covered "
            "by the essentiality matrix"
        )

    @classmethod
    def default(cls) -> "EssentialityMatrix":
        return cls(pairs={}, default_rule="supplier-letter", source="default")

    @classmethod
    def from_csv(cls, path: str | Path) -> "EssentialityMatrix":
        p = Path(path)
        if not p.is_file():
            raise MissingFile(f"missing essentiality file: {p}")
        pairs: dict[tuple[str, str], bool] = {}
        with open(p, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(h.strip() for h in rows[0]) != ESSENTIALITY_COLUMNS:
            raise SchemaError(
                f"{p.name} row 1: expected header {','.join(ESSENTIALITY_COLUMNS)!r}"
            )
        for row_no, row in enumerate(rows[1:], start=2):
            if len(row) != 3:
                raise SchemaError(f"{p.name} row {row_no}: expected 3 cells, got {len(row)}")
            sup, buy, flag = (c.strip() for c in row)
            if not sup or not buy:
                raise SchemaError(f"{p.name} row {row_no}: empty sector code")
            if flag not in ("0", "1"):
                raise SchemaError(
                    f"{p.name} row {row_no}: essential must be 0 or 1, got {flag!r}"
                )
            pairs[(sup, buy)] = flag == "1"
        return cls(pairs=pairs, default_rule="non-essential", source=str(p))


# -- input classification -----------------------------------------------------


@dataclass(frozen=True)
class InputPartition:
    """Per-edge essentiality flags aligned with the network edge arrays."""

    ids: tuple[str, ...]
    edge_essential: np.ndarray
    matrix_source: str

    def essential_suppliers(self, net: ProductionNetwork, firm_id: str) -> dict[str, list[str]]:
        """Essential suppliers of one firm, grouped by supplier sector."""
        b = net.index_of(firm_id)
        groups: dict[str, list[str]] = {}
        mask = (net.buyer_idx == b) & self.edge_essential
        for s in net.supplier_idx[mask]:
            groups.setdefault(net.firms[s].sector, []).append(net.firms[s].id)
        return groups

    def nonessential_suppliers(self, net: ProductionNetwork, firm_id: str) -> list[str]:
        b = net.index_of(firm_id)
        mask = (net.buyer_idx == b) & ~self.edge_essential
        return [net.firms[s].id for s in net.supplier_idx[mask]]


def classify_inputs(net: ProductionNetwork, matrix: EssentialityMatrix) -> InputPartition:
    """Flag every supply edge as essential or non-essential for its buyer."""
    sectors = net.sectors()
    unique = sorted(set(sectors))
    code_of = {s: k for k, s in enumerate(unique)}
    codes = np.array([code_of[s] for s in sectors], dtype=np.int64)
    sup_codes = codes[net.supplier_idx]
    buy_codes = codes[net.buyer_idx]

    # resolve each distinct sector pair once, then broadcast to edges
    pair_key = sup_codes * len(unique) + buy_codes
    flags = np.zeros(net.n_edges, dtype=bool)
    for key in np.unique(pair_key):
        sup_sector = unique[int(key) // len(unique)]
        buy_sector = unique[int(key) % len(unique)]
        flags[pair_key == key] = matrix.is_essential(sup_sector, buy_sector)
    return InputPartition(ids=net.ids, edge_essential=flags, matrix_source=matrix.source)


# -- calibrated production functions ------------------------------------------


@dataclass(frozen=True)
class EssentialGroup:
    sector: str
    alpha: float
    members: dict[str, float]  # supplier id -> in-weight


@dataclass(frozen=True)
class FirmProductionFunction:
    """Calibrated per-firm view, used for audits and absolute evaluation."""

    firm_id: str
    x0: float
    beta: float
    gamma: float
    essential_groups: tuple[EssentialGroup, ...]
    nonessential: dict[str, float]  # supplier id -> in-weight
    alpha_ne: float | None

    def evaluate(self, levels: Mapping[str, float], default: float = 1.0) -> float:
        """Absolute output at the given supplier levels (missing -> default)."""
        terms: list[float] = []
        for group in self.essential_groups:
            num = sum(w * levels.get(j, default) for j, w in group.members.items())
            terms.append(num / group.alpha if group.alpha > 0.0 else self.x0)
        if self.nonessential:
            num = sum(w * levels.get(j, default) for j, w in self.nonessential.items())
            if self.alpha_ne is None:  # beta == x0: extra inputs cannot raise output
                terms.append(self.x0)
            else:
                terms.append(self.beta + num / self.alpha_ne)
        if not terms:
            return self.x0
        return float(min(self.x0, max(0.0, min(terms))))


class ProductionFunctionSet:
    """Calibrated production functions for every firm, in vector form.

    The vectorized layout drives the propagation engine:
      - essential edges are sorted by (buyer, supplier sector) into
        contiguous groups; group g spans es_group_ptr[g]:es_group_ptr[g+1]
        inside the sorted edge arrays and belongs to es_group_owner[g];
      - groups themselves are sorted by owner so a per-firm minimum is a
        single reduceat over firm_group_ptr;
      - non-essential edges aggregate through one weighted average per firm.
    """

    def __init__(
        self,
        net: ProductionNetwork,
        partition: InputPartition,
        gamma: float,
        x0_rule: str,
    ):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {gamma}")
        if x0_rule not in X0_RULES:
            raise ValueError(f"x0_rule must be one of {X0_RULES}, got {x0_rule!r}")
        if partition.ids != net.ids:
            raise ValueError("input partition was built for a different network")
        self.net = net
        self.partition = partition
        self.gamma = float(gamma)
        self.x0_rule = x0_rule

        st = compute_strengths(net)
        if x0_rule == "out":
            self.x0 = np.where(st.s_out > 0.0, st.s_out, st.s_in)
        else:
            self.x0 = np.maximum(st.s_out, st.s_in)

        # defensive: unreachable under both rules with positive edge weights
        degenerate = (self.x0 == 0.0) & (st.s_in > 0.0)
        self.degenerate_ids: tuple[str, ...] = tuple(np.array(net.ids)[degenerate])
        if self.degenerate_ids:
            log.warning(
                "%d degenerate firm(s) with zero x0 but positive in-strength "
                "treated as unconstrained: %s",
                len(self.degenerate_ids),
                ", ".join(self.degenerate_ids[:5]),
            )
        active = ~degenerate

        es = partition.edge_essential & active[net.buyer_idx]
        ne = ~partition.edge_essential & active[net.buyer_idx]
        n = net.n_firms

        # essential layout: edges sorted by (buyer, supplier sector code)
        sectors = net.sectors()
        unique = sorted(set(sectors))
        code_of = {s: k for k, s in enumerate(unique)}
        sector_code = np.array([code_of[s] for s in sectors], dtype=np.int64)
        es_idx = np.flatnonzero(es)
        key = net.buyer_idx[es_idx] * len(unique) + sector_code[net.supplier_idx[es_idx]]
        order = np.argsort(key, kind="stable")
        es_idx = es_idx[order]
        key = key[order]
        self.es_supplier = net.supplier_idx[es_idx]
        self.es_weight = net.weights[es_idx]
        boundaries = np.flatnonzero(np.diff(key)) + 1
        self.es_group_ptr = np.concatenate(([0], boundaries, [es_idx.size])).astype(np.int64)
        if es_idx.size == 0:
            self.es_group_ptr = np.array([0], dtype=np.int64)
        group_first = self.es_group_ptr[:-1]
        self.es_group_owner = (
            net.buyer_idx[es_idx][group_first] if es_idx.size else np.empty(0, dtype=np.int64)
        )
        self.es_group_weight = np.add.reduceat(self.es_weight, group_first) if es_idx.size else np.empty(0)
        self.es_group_sector_code = (
            sector_code[self.es_supplier[group_first]] if es_idx.size else np.empty(0, dtype=np.int64)
        )
        self._sector_names = unique
        # groups are already owner-sorted; firm_group_ptr[i]:firm_group_ptr[i+1]
        # is the group range of firm i
        counts = np.bincount(self.es_group_owner, minlength=n)
        self.firm_group_ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

        # non-essential layout
        ne_idx = np.flatnonzero(ne)
        order = np.argsort(net.buyer_idx[ne_idx], kind="stable")
        ne_idx = ne_idx[order]
        self.ne_supplier = net.supplier_idx[ne_idx]
        self.ne_weight = net.weights[ne_idx]
        self.ne_buyer = net.buyer_idx[ne_idx]
        self.ne_firm_weight = np.bincount(self.ne_buyer, weights=self.ne_weight, minlength=n)
        self.has_ne = self.ne_firm_weight > 0.0

        self.beta = np.where(self.has_ne, self.gamma * self.x0, self.x0)

    # -- per-firm views -------------------------------------------------------

    def function_of(self, firm_id: str) -> FirmProductionFunction:
        i = self.net.index_of(firm_id)
        x0 = float(self.x0[i])
        groups: list[EssentialGroup] = []
        for g in range(self.firm_group_ptr[i], self.firm_group_ptr[i + 1]):
            lo, hi = self.es_group_ptr[g], self.es_group_ptr[g + 1]
            members = {
                self.net.firms[s].id: float(w)
                for s, w in zip(self.es_supplier[lo:hi], self.es_weight[lo:hi])
            }
            wsum = float(self.es_group_weight[g])
            groups.append(
                EssentialGroup(
                    sector=self._sector_names[int(self.es_group_sector_code[g])],
                    alpha=wsum / x0 if x0 > 0.0 else 0.0,
                    members=members,
                )
            )
        mask = self.ne_buyer == i
        nonessential = {
            self.net.firms[s].id: float(w)
            for s, w in zip(self.ne_supplier[mask], self.ne_weight[mask])
        }
        beta = float(self.beta[i])
        alpha_ne: float | None = None
        if nonessential and x0 > beta:
            alpha_ne = float(self.ne_firm_weight[i]) / (x0 - beta)
        return FirmProductionFunction(
            firm_id=firm_id,
            x0=x0,
            beta=beta,
            gamma=self.gamma,
            essential_groups=tuple(groups),
            nonessential=nonessential,
            alpha_ne=alpha_ne,
        )

    def evaluate(self, firm_id: str, levels: Mapping[str, float], default: float = 1.0) -> float:
        return self.function_of(firm_id).evaluate(levels, default)

    def audit_rows(self) -> list[tuple[str, float, float, int, int]]:
        """(firm_id, x0, beta, n_essential_groups, n_nonessential) per firm."""
        n_groups = np.diff(self.firm_group_ptr)
        n_ne = np.bincount(self.ne_buyer, minlength=self.net.n_firms).astype(int)
        return [
            (f.id, float(self.x0[i]), float(self.beta[i]), int(n_groups[i]), int(n_ne[i]))
            for i, f in enumerate(self.net.firms)
        ]


def calibrate(
    net: ProductionNetwork,
    partition: InputPartition,
    gamma: float = 0.5,
    x0_rule: str = "out",
) -> ProductionFunctionSet:
    """Calibrate every firm's production function against its reference output."""
    return ProductionFunctionSet(net, partition, gamma, x0_rule)
