"""Firm-level production network: CSV ingestion, strengths, validation.

Input schemas (CSV, UTF-8, comma separator, header row required):

    firms.csv:  id,sector,employees,co2,ets_member
                employees and co2 may be empty (missing data);
                ets_member is 0 or 1 and implies co2 is present.
    edges.csv:  supplier_id,buyer_id,weight
                weight is a strictly positive supplier->buyer flow.

Parallel edges between the same ordered firm pair are summed on load
(with a warning); self-loops and edges naming unknown firms are rejected.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

FIRM_COLUMNS = ("id", "sector", "employees", "co2", "ets_member")
EDGE_COLUMNS = ("supplier_id", "buyer_id", "weight")


# -- errors ---------------------------------------------------------------


class NetworkError(Exception):
    """Base class for ingestion and validation failures."""


class MissingFile(NetworkError):
    pass


class SchemaError(NetworkError):
    """Malformed header or cell value; the message names the offending row."""


class DuplicateFirmId(NetworkError):
    pass


class DanglingEdge(NetworkError):
    """Edge references a firm id absent from the firm file."""


class NonPositiveWeight(NetworkError):
    pass


class SelfLoop(NetworkError):
    pass


# -- domain types ---------------------------------------------------------


@dataclass(frozen=True)
class Firm:
    """One firm row; employees/co2 are None when the source cell is empty."""

    id: str
    sector: str
    employees: int | None = None
    co2: float | None = None
    ets_member: bool = False


@dataclass(frozen=True)
class SupplyEdge:
    supplier_id: str
    buyer_id: str
    weight: float


@dataclass(frozen=True)
class StrengthTable:
    """Per-firm in/out/total strengths, aligned with the network firm order."""

    ids: tuple[str, ...]
    s_in: np.ndarray
    s_out: np.ndarray

    @property
    def s_total(self) -> np.ndarray:
        return self.s_in + self.s_out

    def of(self, firm_id: str) -> tuple[float, float, float]:
        i = self.ids.index(firm_id)
        return float(self.s_in[i]), float(self.s_out[i]), float(self.s_in[i] + self.s_out[i])


@dataclass
class ValidationReport:
    n_firms: int
    n_edges: int
    n_isolated: int
    n_zero_out_strength: int
    n_ets: int
    total_weight: float
    max_s_out: float
    max_s_in: float
    employment_known_firms: int
    employment_known_share: float
    employees_total_known: int
    co2_known_firms: int
    co2_total_known: float
    ets_co2_total: float
    isolated_ids: tuple[str, ...]
    warnings: tuple[str, ...]

    def summary_lines(self) -> list[str]:
        lines = [
            f"firms: {self.n_firms}",
            f"edges: {self.n_edges}",
            f"isolated firms: {self.n_isolated}",
            f"zero out-strength firms: {self.n_zero_out_strength}",
            f"ets members: {self.n_ets}",
            f"total edge weight: {self.total_weight:.6g}",
            f"max out-strength: {self.max_s_out:.6g}",
            f"max in-strength: {self.max_s_in:.6g}",
            f"employment coverage: {self.employment_known_firms}/{self.n_firms} firms "
            f"({self.employment_known_share:.1%}), {self.employees_total_known} employees known",
            f"co2 coverage: {self.co2_known_firms} firms, total {self.co2_total_known:.6g} "
            f"(ets total {self.ets_co2_total:.6g})",
        ]
        lines.extend(f"warning: {w}" for w in self.warnings)
        return lines


class ProductionNetwork:
    """Immutable directed weighted firm network.

    Firms keep their input order; edges are stored in first-occurrence
    order of the (supplier, buyer) pair with parallel weights summed.
    """

    def __init__(self, firms: list[Firm] | tuple[Firm, ...], edges: list[SupplyEdge]):
        self.firms: tuple[Firm, ...] = tuple(firms)
        self._index: dict[str, int] = {}
        for pos, firm in enumerate(self.firms):
            if firm.id in self._index:
                raise DuplicateFirmId(f"duplicate firm id {firm.id!r}")
            self._index[firm.id] = pos
        sup, buy, wgt = _assemble_edges(self._index, edges)
        self.supplier_idx: np.ndarray = sup
        self.buyer_idx: np.ndarray = buy
        self.weights: np.ndarray = wgt
        self._matrix: sp.csr_matrix | None = None
        self._strengths: StrengthTable | None = None

    @classmethod
    def from_arrays(
        cls,
        firms: list[Firm] | tuple[Firm, ...],
        supplier_idx: np.ndarray,
        buyer_idx: np.ndarray,
        weights: np.ndarray,
    ) -> "ProductionNetwork":
        """Construct from already deduplicated and validated index arrays."""
        net = cls.__new__(cls)
        net.firms = tuple(firms)
        net._index = {}
        for pos, firm in enumerate(net.firms):
            if firm.id in net._index:
                raise DuplicateFirmId(f"duplicate firm id {firm.id!r}")
            net._index[firm.id] = pos
        if np.any(supplier_idx == buyer_idx):
            raise SelfLoop("self-loop in edge arrays")
        if weights.size and not np.all(weights > 0.0):
            raise NonPositiveWeight("non-positive weight in edge arrays")
        net.supplier_idx = np.asarray(supplier_idx, dtype=np.int64)
        net.buyer_idx = np.asarray(buyer_idx, dtype=np.int64)
        net.weights = np.asarray(weights, dtype=np.float64)
        net._matrix = None
        net._strengths = None
        return net

    # -- identity ----------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProductionNetwork):
            return NotImplemented
        return (
            self.firms == other.firms
            and np.array_equal(self.supplier_idx, other.supplier_idx)
            and np.array_equal(self.buyer_idx, other.buyer_idx)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"ProductionNetwork(n_firms={self.n_firms}, n_edges={self.n_edges})"

    # -- accessors ----------------------------------------------------------

    @property
    def n_firms(self) -> int:
        return len(self.firms)

    @property
    def n_edges(self) -> int:
        return int(self.weights.size)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.firms)

    def index_of(self, firm_id: str) -> int:
        try:
            return self._index[firm_id]
        except KeyError:
            raise KeyError(f"unknown firm id {firm_id!r}") from None

    def __contains__(self, firm_id: str) -> bool:
        return firm_id in self._index

    def firm(self, firm_id: str) -> Firm:
        return self.firms[self.index_of(firm_id)]

    def edges(self) -> list[SupplyEdge]:
        return [
            SupplyEdge(self.firms[s].id, self.firms[b].id, float(w))
            for s, b, w in zip(self.supplier_idx, self.buyer_idx, self.weights)
        ]

    @property
    def matrix(self) -> sp.csr_matrix:
        """Weight matrix W with W[i, j] = flow from firm i to firm j."""
        if self._matrix is None:
            n = self.n_firms
            self._matrix = sp.csr_matrix(
                (self.weights, (self.supplier_idx, self.buyer_idx)), shape=(n, n)
            )
        return self._matrix

    # -- vector views used across modules -----------------------------------

    def employees_array(self) -> np.ndarray:
        return np.array(
            [np.nan if f.employees is None else float(f.employees) for f in self.firms]
        )

    def co2_array(self) -> np.ndarray:
        return np.array([np.nan if f.co2 is None else float(f.co2) for f in self.firms])

    def ets_mask(self) -> np.ndarray:
        return np.array([f.ets_member for f in self.firms], dtype=bool)

    def sectors(self) -> tuple[str, ...]:
        return tuple(f.sector for f in self.firms)


def _assemble_edges(
    index: dict[str, int], edges: list[SupplyEdge]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index, validate and aggregate an edge list into parallel arrays."""
    order: dict[tuple[int, int], int] = {}
    sup: list[int] = []
    buy: list[int] = []
    wgt: list[float] = []
    n_parallel = 0
    for edge in edges:
        if edge.supplier_id not in index:
            raise DanglingEdge(f"edge references unknown supplier {edge.supplier_id!r}")
        if edge.buyer_id not in index:
            raise DanglingEdge(f"edge references unknown buyer {edge.buyer_id!r}")
        if edge.supplier_id == edge.buyer_id:
            raise SelfLoop(f"self-loop on firm {edge.supplier_id!r}")
        if not edge.weight > 0.0:
            raise NonPositiveWeight(
                f"edge {edge.supplier_id!r}->{edge.buyer_id!r} has weight {edge.weight!r}"
            )
        key = (index[edge.supplier_id], index[edge.buyer_id])
        pos = order.get(key)
        if pos is None:
            order[key] = len(sup)
            sup.append(key[0])
            buy.append(key[1])
            wgt.append(edge.weight)
        else:
            wgt[pos] += edge.weight
            n_parallel += 1
    if n_parallel:
        log.warning("summed %d parallel edge(s) during ingestion", n_parallel)
    return (
        np.asarray(sup, dtype=np.int64),
        np.asarray(buy, dtype=np.int64),
        np.asarray(wgt, dtype=np.float64),
    )


# -- ingestion --------------------------------------------------------------


def _open_rows(path: str | Path, expected_header: tuple[str, ...]) -> list[list[str]]:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"missing input file: {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != expected_header:
        raise SchemaError(
            f"{p.name} row 1: expected header {','.join(expected_header)!r}"
        )
    return rows[1:]


def _parse_optional_int(cell: str, what: str, where: str) -> int | None:
    if cell == "":
        return None
    try:
        value = int(cell)
    except ValueError:
        raise SchemaError(f"{where}: {what} must be an integer, got {cell!r}") from None
    if value < 0:
        raise SchemaError(f"{where}: {what} must be non-negative, got {value}")
    return value


def _parse_optional_float(cell: str, what: str, where: str) -> float | None:
    if cell == "":
        return None
    try:
        value = float(cell)
    except ValueError:
        raise SchemaError(f"{where}: {what} must be a number, got {cell!r}") from None
    if not np.isfinite(value) or value < 0.0:
        raise SchemaError(f"{where}: {what} must be finite and non-negative, got {cell!r}")
    return value


def load_network(firm_file: str | Path, edge_file: str | Path) -> ProductionNetwork:
    """Load and validate the firm and edge files into a ProductionNetwork."""
    firms: list[Firm] = []
    for row_no, row in enumerate(_open_rows(firm_file, FIRM_COLUMNS), start=2):
        where = f"{Path(firm_file).name} row {row_no}"
        if len(row) != len(FIRM_COLUMNS):
            raise SchemaError(f"{where}: expected {len(FIRM_COLUMNS)} cells, got {len(row)}")
        firm_id, sector, employees, co2, ets = (c.strip() for c in row)
        if not firm_id:
            raise SchemaError(f"{where}: empty firm id")
        if not sector:
            raise SchemaError(f"{where}: empty sector code")
        if ets not in ("0", "1"):
            raise SchemaError(f"{where}: ets_member must be 0 or 1, got {ets!r}")
        co2_value = _parse_optional_float(co2, "co2", where)
        if ets == "1" and co2_value is None:
            raise SchemaError(f"{where}: ets_member=1 requires a co2 value")
        firms.append(
            Firm(
                id=firm_id,
                sector=sector,
                employees=_parse_optional_int(employees, "employees", where),
                co2=co2_value,
                ets_member=ets == "1",
            )
        )

    seen: set[str] = set()
    for firm in firms:
        if firm.id in seen:
            raise DuplicateFirmId(f"duplicate firm id {firm.id!r} in {Path(firm_file).name}")
        seen.add(firm.id)

    edges: list[SupplyEdge] = []
    for row_no, row in enumerate(_open_rows(edge_file, EDGE_COLUMNS), start=2):
        where = f"{Path(edge_file).name} row {row_no}"
        if len(row) != len(EDGE_COLUMNS):
            raise SchemaError(f"{where}: expected {len(EDGE_COLUMNS)} cells, got {len(row)}")
        supplier, buyer, weight = (c.strip() for c in row)
        try:
            weight_value = float(weight)
        except ValueError:
            raise SchemaError(f"{where}: weight must be a number, got {weight!r}") from None
        if not np.isfinite(weight_value) or weight_value <= 0.0:
            raise NonPositiveWeight(f"{where}: weight must be positive, got {weight!r}")
        if supplier == buyer:
            raise SelfLoop(f"{where}: self-loop on firm {supplier!r}")
        if supplier not in seen:
            raise DanglingEdge(f"{where}: unknown supplier id {supplier!r}")
        if buyer not in seen:
            raise DanglingEdge(f"{where}: unknown buyer id {buyer!r}")
        edges.append(SupplyEdge(supplier, buyer, weight_value))

    return ProductionNetwork(firms, edges)


def write_network(net: ProductionNetwork, out_dir: str | Path) -> None:
    """Serialize firms.csv and edges.csv; load(write(net)) == net."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "firms.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIRM_COLUMNS)
        for f in net.firms:
            writer.writerow(
                [
                    f.id,
                    f.sector,
                    "" if f.employees is None else f.employees,
                    "" if f.co2 is None else repr(f.co2),
                    int(f.ets_member),
                ]
            )
    with open(out / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EDGE_COLUMNS)
        for e in net.edges():
            writer.writerow([e.supplier_id, e.buyer_id, repr(e.weight)])


# -- strengths and validation ------------------------------------------------


def compute_strengths(net: ProductionNetwork) -> StrengthTable:
    """In/out strengths as row and column sums of the weight matrix."""
    if net._strengths is None:
        w = net.matrix
        net._strengths = StrengthTable(
            ids=net.ids,
            s_in=np.asarray(w.sum(axis=0)).ravel(),
            s_out=np.asarray(w.sum(axis=1)).ravel(),
        )
    return net._strengths


def validate(net: ProductionNetwork) -> ValidationReport:
    """Structural and coverage diagnostics; never raises on a loaded network."""
    st = compute_strengths(net)
    isolated = st.s_total == 0.0
    employees = net.employees_array()
    co2 = net.co2_array()
    ets = net.ets_mask()
    known_emp = ~np.isnan(employees)
    known_co2 = ~np.isnan(co2)

    warnings: list[str] = []
    n_isolated = int(isolated.sum())
    if n_isolated:
        warnings.append(f"{n_isolated} isolated firm(s) take no part in propagation")
    if not known_emp.any():
        warnings.append("no firm has employee data; employment-weighted index unavailable")
    if not known_co2.any():
        warnings.append("no firm has emission data; CO2 accounting unavailable")

    return ValidationReport(
        n_firms=net.n_firms,
        n_edges=net.n_edges,
        n_isolated=n_isolated,
        n_zero_out_strength=int((st.s_out == 0.0).sum()),
        n_ets=int(ets.sum()),
        total_weight=float(net.weights.sum()),
        max_s_out=float(st.s_out.max(initial=0.0)),
        max_s_in=float(st.s_in.max(initial=0.0)),
        employment_known_firms=int(known_emp.sum()),
        employment_known_share=float(known_emp.mean()) if net.n_firms else 0.0,
        employees_total_known=int(np.nansum(employees)) if known_emp.any() else 0,
        co2_known_firms=int(known_co2.sum()),
        co2_total_known=float(np.nansum(co2)) if known_co2.any() else 0.0,
        ets_co2_total=float(np.nansum(np.where(ets, co2, np.nan))) if (ets & known_co2).any() else 0.0,
        isolated_ids=tuple(np.array(net.ids)[isolated][:20]),
        warnings=tuple(warnings),
    )
