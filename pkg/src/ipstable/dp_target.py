"""Size-targeted IP-stable clustering on the line via dynamic programming.

T[i, j, l] is the best lp-deviation (raised to the p-th power for finite p,
plain maximum for p = infinity) over stable contiguous l-clusterings of the
first i sorted points whose rightmost cluster holds exactly j points.
Stability of a contiguous clustering reduces to per-separator checks of the
two adjacent points, so the recurrence over the previous cluster size s only
needs two average comparisons at the boundary.

Both boundary conditions are monotone in s (averages over nested point sets
on a line), so for fixed (boundary position, right size) the feasible s form
an interval. The fill therefore precomputes interval endpoints by binary
search and answers the min over each interval with a sparse-table range
minimum, which brings the naive O(n^3 k) fill down to roughly O(n^2 (k+log n)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import STABILITY_TOL, Clustering
from .line1d import LineInstance

# float64 |size - target|^p overflows around p ~ 30 for realistic deviations
P_OVERFLOW_WARN = 30

MAX_TABLE_CELLS = 2.5e8


@dataclass
class DpTable:
    table: np.ndarray        # shape (n+1, n+1, k+1); [i, j, l], index 0 unused
    targets: np.ndarray
    p: float
    instance: LineInstance
    tol: float


def _prefix(values):
    return np.concatenate(([0.0], np.cumsum(values)))


def _avg_left(x, P, a, count):
    """Average distance from x_a (1-indexed) to the `count` points left of it."""
    if count <= 0:
        return 0.0
    return (count * x[a - 1] - (P[a - 1] - P[a - 1 - count])) / count


def _avg_right(x, P, a, count):
    """Average distance from x_a (1-indexed) to the `count` points right of it."""
    if count <= 0:
        return 0.0
    return ((P[a + count] - P[a]) - count * x[a - 1]) / count


def _boundary_ok(x, P, pos, left_size, right_size, tol):
    """Both separator conditions at sorted position `pos` (1-indexed).

    Left cluster = x_{pos-left_size+1..pos}, right cluster = the next
    right_size points. 0/0 counts as 0 on the own-cluster side.
    """
    own = _avg_left(x, P, pos, left_size - 1)
    other = _avg_right(x, P, pos, right_size)
    if own > other * (1.0 + tol):
        return False
    own2 = _avg_right(x, P, pos + 1, right_size - 1)
    other2 = _avg_left(x, P, pos + 1, left_size)
    return own2 <= other2 * (1.0 + tol)


class _SparseMin:
    """Static range-minimum structure with vectorized queries."""

    def __init__(self, a):
        self.tables = [a]
        length = len(a)
        t = 1
        while (1 << t) <= length:
            prev = self.tables[-1]
            half = 1 << (t - 1)
            self.tables.append(np.minimum(prev[: length - (1 << t) + 1], prev[half : length - half + 1]))
            t += 1

    def query(self, lo, hi):
        """Minimum over [lo, hi] inclusive, elementwise over index arrays."""
        length = hi - lo + 1
        out = np.full(len(lo), np.inf)
        ok = length > 0
        if not np.any(ok):
            return out
        t = np.zeros(len(lo), dtype=int)
        t[ok] = np.int64(np.floor(np.log2(length[ok])))
        for level in np.unique(t[ok]):
            sel = ok & (t == level)
            tab = self.tables[level]
            span = 1 << int(level)
            out[sel] = np.minimum(tab[lo[sel]], tab[hi[sel] - span + 1])
        return out


def _feasibility_thresholds(x, P, tol):
    """Per boundary position m: feasible previous-size interval endpoints.

    Returns (s_hi, s_lo): lists indexed by m = 1..n-1 of arrays over
    j = 1..n-m. s_hi[m][j-1] is the largest s satisfying the left-boundary
    condition, s_lo[m][j-1] the smallest s satisfying the right-boundary one
    (n - m + 1 means none).
    """
    n = len(x)
    s_hi = [None] * n
    s_lo = [None] * n
    for m in range(1, n):
        xm = x[m - 1]
        xm1 = x[m]
        counts = np.arange(m, dtype=float)                       # s - 1 = 0..m-1
        left_sums = counts * xm - (P[m - 1] - P[m - 1 - np.arange(m)])
        with np.errstate(invalid="ignore"):
            left_avg = np.divide(left_sums, counts, out=np.zeros(m), where=counts > 0)

        js = np.arange(1, n - m + 1, dtype=float)
        right_sums = P[m + np.arange(1, n - m + 1)] - P[m] - js * xm
        right_avg = right_sums / js

        own2_sums = P[m + np.arange(1, n - m + 1)] - P[m + 1] - (js - 1) * xm1
        with np.errstate(invalid="ignore"):
            own2_avg = np.divide(own2_sums, js - 1, out=np.zeros(n - m), where=js > 1)

        scounts = np.arange(1, m + 1, dtype=float)
        left2_sums = scounts * xm1 - (P[m] - P[m - np.arange(1, m + 1)])
        left2_avg = left2_sums / scounts

        s_hi[m] = np.searchsorted(left_avg, right_avg * (1.0 + tol), side="right")
        s_lo[m] = np.searchsorted(left2_avg * (1.0 + tol), own2_avg, side="left") + 1
    return s_hi, s_lo


def build_table(values, targets, p=math.inf, tol=STABILITY_TOL):
    """Fill the full DP table for the given target sizes and norm order.

    Args:
        values: raw values or a LineInstance.
        targets: positive integer sizes summing to n, ordered left to right.
        p: norm order, real >= 1 or math.inf.
        tol: relative stability slack used in the boundary conditions.
    """
    instance = values if isinstance(values, LineInstance) else LineInstance.from_values(values)
    n = instance.n
    targets = np.asarray(targets, dtype=int)
    if np.any(targets <= 0):
        raise ValueError("targets must be positive integers")
    if int(targets.sum()) != n:
        raise ValueError("targets must sum to n")
    k = len(targets)
    if p != math.inf:
        if p < 1:
            raise ValueError("p must be >= 1 or infinity")
        if p >= P_OVERFLOW_WARN:
            warnings.warn(
                f"p={p} risks float overflow in |size-target|^p; consider p=inf",
                UserWarning,
                stacklevel=2,
            )
    if float(n + 1) ** 2 * (k + 1) > MAX_TABLE_CELLS:
        raise ValueError("DP table would exceed the memory guard; reduce n or k")

    x = instance.values
    P = _prefix(x)
    T = np.full((n + 1, n + 1, k + 1), np.inf)

    t1 = float(targets[0])
    for i in range(1, n + 1):
        dev = abs(i - t1)
        T[i, i, 1] = dev if p == math.inf else dev**p

    if k == 1:
        return DpTable(T, targets, p, instance, tol)

    s_hi_all, s_lo_all = _feasibility_thresholds(x, P, tol)

    for l in range(2, k + 1):
        tl = float(targets[l - 1])
        all_j = np.arange(n + 1, dtype=float)
        pen = np.abs(all_j - tl) if p == math.inf else np.abs(all_j - tl) ** p
        for m in range(l - 1, n):
            layer = T[m, 1 : m + 1, l - 1]
            if not np.any(np.isfinite(layer)):
                continue
            rmq = _SparseMin(layer)
            jmax = n - m
            lo = s_lo_all[m][:jmax]
            hi = np.minimum(s_hi_all[m][:jmax], m - l + 2)
            valid = lo <= hi
            mins = np.full(jmax, np.inf)
            if np.any(valid):
                mins[valid] = rmq.query(lo[valid] - 1, hi[valid] - 1)
            js = np.arange(1, jmax + 1)
            if p == math.inf:
                vals = np.maximum(pen[js], mins)
            else:
                vals = pen[js] + mins
            T[m + js, js, l] = vals
    return DpTable(T, targets, p, instance, tol)


def reconstruct(dp):
    """Read an optimal stable clustering out of a filled table.

    Returns (Clustering in input order, objective value). The objective is
    the lp-norm of the size deviations (table entries store the p-th power
    for finite p). Among ties the smallest feasible cluster size is chosen,
    scanning boundary feasibility with O(1) prefix-sum checks.
    """
    T, targets, p, instance, tol = dp.table, dp.targets, dp.p, dp.instance, dp.tol
    n = instance.n
    k = len(targets)
    x = instance.values
    P = _prefix(x)

    final = T[n, 1 : n + 1, k]
    vstar = final.min()
    if not np.isfinite(vstar):
        raise RuntimeError("table holds no stable contiguous clustering")
    j0 = int(np.argmin(final)) + 1  # smallest optimal size for the last cluster

    sizes = [0] * (k + 1)  # 1-indexed cluster sizes
    sizes[k] = j0
    tail = 0.0 if p != math.inf else None
    if p != math.inf:
        tail = abs(j0 - float(targets[k - 1])) ** p

    remaining = n - j0
    right_size = j0
    for l in range(k - 1, 1, -1):
        found = None
        for h in range(1, remaining - (l - 1) + 1):
            val = T[remaining, h, l]
            if not np.isfinite(val):
                continue
            if p == math.inf:
                if val > vstar * (1.0 + 1e-12) + 1e-12:
                    continue
            else:
                if not np.isclose(val + tail, vstar, rtol=1e-9, atol=1e-12):
                    continue
            if _boundary_ok(x, P, remaining, h, right_size, tol):
                found = h
                break
        if found is None:
            raise RuntimeError("reconstruction failed: no consistent boundary")
        sizes[l] = found
        if p != math.inf:
            tail += abs(found - float(targets[l - 1])) ** p
        remaining -= found
        right_size = found
    if k >= 2:
        sizes[1] = remaining
        if sizes[1] < 1:
            raise RuntimeError("reconstruction failed: empty leading cluster")

    assign_sorted = np.empty(n, dtype=int)
    pos = 0
    for c in range(1, k + 1):
        assign_sorted[pos : pos + sizes[c]] = c - 1
        pos += sizes[c]
    assignment = np.empty(n, dtype=int)
    assignment[instance.sort_permutation] = assign_sorted
    clustering = Clustering(assignment, k)

    obj = float(vstar) if p == math.inf else float(vstar) ** (1.0 / p)
    return clustering, obj


def solve_targets(values, targets, p=math.inf, tol=STABILITY_TOL):
    """Convenience wrapper: build the table and reconstruct in one call."""
    return reconstruct(build_table(values, targets, p=p, tol=tol))
