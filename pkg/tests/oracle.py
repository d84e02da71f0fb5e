"""Dense brute-force reference for the two-channel shock propagation.

Independent of the package internals on purpose: plain per-firm Python
loops over a dense weight matrix, no sparse algebra, no shared helpers.
Used to cross-check the vectorized engine and the index formulas.
"""
from __future__ import annotations

import math


def dense_equilibrium(
    weights: list[list[float]],
    sectors: list[str],
    essential: dict[tuple[str, str], bool],
    gamma: float,
    removed: set[int],
    steps: int = 10_000,
    tol: float = 1e-12,
) -> tuple[list[float], list[float], list[float]]:
    """Iterate the two channels to a fixed point, return (h_d, h_u, h).

    weights[i][j] is the flow from supplier i to buyer j.  Pairs missing
    from `essential` count as non-essential.
    """
    n = len(weights)
    h_d = [0.0 if i in removed else 1.0 for i in range(n)]
    h_u = [0.0 if i in removed else 1.0 for i in range(n)]

    for _ in range(steps):
        new_d = [0.0] * n
        new_u = [0.0] * n
        for i in range(n):
            if i in removed:
                continue
            # -- downstream: generalized Leontief over current supplier h_d --
            groups: dict[str, tuple[float, float]] = {}
            ne_num = ne_den = 0.0
            for j in range(n):
                w = weights[j][i]
                if w <= 0.0:
                    continue
                if essential.get((sectors[j], sectors[i]), False):
                    num, den = groups.get(sectors[j], (0.0, 0.0))
                    groups[sectors[j]] = (num + w * h_d[j], den + w)
                else:
                    ne_num += w * h_d[j]
                    ne_den += w
            terms = [num / den for num, den in groups.values()]
            if ne_den > 0.0:
                terms.append(gamma + (1.0 - gamma) * ne_num / ne_den)
            level = min(terms) if terms else 1.0
            new_d[i] = min(1.0, max(0.0, level))
            # -- upstream: out-strength weighted average of customer h_u --
            cu_num = cu_den = 0.0
            for j in range(n):
                w = weights[i][j]
                if w <= 0.0:
                    continue
                cu_num += w * h_u[j]
                cu_den += w
            new_u[i] = cu_num / cu_den if cu_den > 0.0 else 1.0
        delta = max(
            max(abs(new_d[i] - h_d[i]) for i in range(n)),
            max(abs(new_u[i] - h_u[i]) for i in range(n)),
        )
        h_d, h_u = new_d, new_u
        if delta <= tol:
            break

    h = [min(h_d[i], h_u[i]) for i in range(n)]
    return h_d, h_u, h


def dense_esri(weights: list[list[float]], h: list[float]) -> float:
    n = len(weights)
    s_out = [sum(weights[i]) for i in range(n)]
    total = sum(s_out)
    if total <= 0.0:
        return 0.0
    return sum(s_out[i] / total * (1.0 - h[i]) for i in range(n))


def dense_ew_esri(employees: list[float | None], h: list[float]) -> float:
    total = sum(e for e in employees if e is not None)
    if total <= 0.0:
        return math.nan
    return sum(
        e / total * (1.0 - h[i]) for i, e in enumerate(employees) if e is not None
    )


def dense_eliminated_co2(co2: list[float | None], h: list[float]) -> float:
    return sum(c * (1.0 - h[i]) for i, c in enumerate(co2) if c is not None)
