"""Classic clustering algorithms, used as audit subjects and comparators.

None of these optimize for stability; they exist so the audit machinery has
realistic clusterings to grade and so the adversarial generators have
something to break. All are deterministic given their seed/start arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.cluster import hierarchy
from scipy.spatial.distance import cdist, squareform

from .core import Clustering, audit


def lloyd(features, center_coords, max_iters=100):
    """Lloyd iterations from explicit starting centers.

    Returns (assignment, centers, inertia_history, n_repairs). Iterates to
    an assignment fixpoint or max_iters. An emptied cluster is repaired by
    reassigning the point farthest from that cluster's last center (among
    points whose cluster keeps at least 2 members); repairs can bump the
    objective, so inertia_history is only guaranteed nonincreasing while
    n_repairs stays 0.
    """
    x = np.asarray(features, dtype=float)
    centers = np.asarray(center_coords, dtype=float).copy()
    k = len(centers)
    assign = None
    inertias = []
    n_repairs = 0
    for _ in range(max_iters):
        d2 = cdist(x, centers, metric="sqeuclidean")
        new_assign = d2.argmin(axis=1)
        inertias.append(float(d2[np.arange(len(x)), new_assign].sum()))
        for j in range(k):
            if (new_assign == j).any():
                continue
            sizes = np.bincount(new_assign, minlength=k)
            movable = sizes[new_assign] >= 2
            if not movable.any():
                raise RuntimeError("cannot repair empty cluster")
            cand = np.where(movable, d2[:, j], -np.inf)
            new_assign[int(cand.argmax())] = j
            n_repairs += 1
        if assign is not None and (new_assign == assign).all():
            break
        assign = new_assign
        for j in range(k):
            centers[j] = x[assign == j].mean(axis=0)
    return assign, centers, inertias, n_repairs


def kmeans_pp(features, k, seed=0, max_iters=100, init_centers=None):
    """k-means++ seeding followed by Lloyd, in Euclidean feature space.

    Seeding picks the first center uniformly, then each next center with
    probability proportional to squared distance from the chosen set.
    init_centers (point indices) overrides seeding entirely, which lets
    callers study Lloyd from an adversarial start.
    """
    x = np.asarray(features, dtype=float)
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    rng = np.random.default_rng(seed)
    if init_centers is not None:
        idx = list(init_centers)
        if len(idx) != k:
            raise ValueError("init_centers must supply exactly k points")
    else:
        idx = [int(rng.integers(n))]
        d2 = cdist(x, x[idx[-1:]], metric="sqeuclidean")[:, 0]
        while len(idx) < k:
            total = d2.sum()
            if total > 0:
                nxt = int(rng.choice(n, p=d2 / total))
            else:
                free = sorted(set(range(n)) - set(idx))
                nxt = free[int(rng.integers(len(free)))]
            idx.append(nxt)
            d2 = np.minimum(d2, cdist(x, x[nxt : nxt + 1], metric="sqeuclidean")[:, 0])
    assign, _, _, _ = lloyd(x, x[idx], max_iters=max_iters)
    return Clustering(assign, k)


def kcenter_greedy(oracle, k, first):
    """Farthest-first traversal from a required starting point.

    Each next center maximizes the distance to the chosen set (ties to the
    smallest point id). Points join their nearest center, ties to the
    earliest-selected one, except that a center always anchors its own
    cluster so all k clusters stay nonempty even among duplicates.
    """
    n = oracle.n
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    if not 0 <= first < n:
        raise ValueError("first out of range")
    m = oracle.matrix()
    centers = [int(first)]
    mind = m[first].copy()
    avail = np.ones(n, dtype=bool)
    avail[first] = False
    while len(centers) < k:
        # mask chosen ids so duplicate points cannot re-elect a center
        nxt = int(np.where(avail, mind, -np.inf).argmax())
        centers.append(nxt)
        avail[nxt] = False
        mind = np.minimum(mind, m[nxt])
    assign = m[:, centers].argmin(axis=1)
    for i, c in enumerate(centers):
        assign[c] = i
    return Clustering(assign, k)


@dataclass
class DendrogramNode:
    """Binary merge-tree node; leaves carry the original point index."""

    id: int
    height: float
    point: Optional[int] = None
    left: Optional["DendrogramNode"] = None
    right: Optional["DendrogramNode"] = None

    def is_leaf(self):
        return self.point is not None

    def leaves(self):
        """Point indices under this node (iterative; dendrograms can be deep)."""
        out = []
        stack = [self]
        while stack:
            v = stack.pop()
            if v.is_leaf():
                out.append(v.point)
            else:
                stack.append(v.right)
                stack.append(v.left)
        return out


def linkage(oracle, variant="single"):
    """Agglomerative dendrogram (single, average, or complete linkage)."""
    if variant not in ("single", "average", "complete"):
        raise ValueError("variant must be single, average, or complete")
    n = oracle.n
    if n == 1:
        return DendrogramNode(id=0, height=0.0, point=0)
    m = oracle.matrix()
    m = (m + m.T) / 2.0  # exact symmetry for squareform
    z = hierarchy.linkage(squareform(m, checks=False), method=variant)
    nodes = [DendrogramNode(id=i, height=0.0, point=i) for i in range(n)]
    for row_i, (a, b, h, _cnt) in enumerate(z):
        nodes.append(
            DendrogramNode(
                id=n + row_i,
                height=float(h),
                left=nodes[int(a)],
                right=nodes[int(b)],
            )
        )
    return nodes[-1]


def cut_dendrogram(root, k):
    """The k clusters left after undoing the k-1 highest merges.

    Ties between equal-height merges break toward the larger node id
    (the later merge).
    """
    frontier = [root]
    n_leaves = len(root.leaves())
    if not 1 <= k <= n_leaves:
        raise ValueError("need 1 <= k <= number of leaves")
    while len(frontier) < k:
        internal = [v for v in frontier if not v.is_leaf()]
        v = max(internal, key=lambda w: (w.height, w.id))
        frontier.remove(v)
        frontier.extend([v.left, v.right])
    return _frontier_clustering(frontier, n_leaves)


def _frontier_clustering(frontier, n):
    labels = np.empty(n, dtype=int)
    for i, v in enumerate(frontier):
        labels[v.leaves()] = i
    return Clustering.from_labels(labels)


def greedy_prune(root, oracle, k, measure="num-unstable"):
    """Greedy top-down dendrogram pruning toward k stable-ish clusters.

    Starts from the root's two children and, for k-2 rounds, splits the
    frontier node whose split gives the best audited score: fewest
    unstable points or smallest max violation. Ties go to the smallest
    node id. Only non-singleton nodes can split.
    """
    if measure not in ("num-unstable", "max-violation"):
        raise ValueError("measure must be num-unstable or max-violation")
    if root.is_leaf():
        raise ValueError("cannot prune a single-leaf dendrogram")
    n = oracle.n
    if not 2 <= k <= n:
        raise ValueError("need 2 <= k <= n")
    frontier = [root.left, root.right]
    for _ in range(k - 2):
        best = None
        for v in frontier:
            if v.is_leaf():
                continue
            cand = [w for w in frontier if w is not v] + [v.left, v.right]
            rep = audit(oracle, _frontier_clustering(cand, n))
            score = rep.num_unstable if measure == "num-unstable" else rep.max_violation
            if best is None or (score, v.id) < (best[0], best[1]):
                best = (score, v.id, v, cand)
        if best is None:
            raise RuntimeError("no splittable frontier node before reaching k")
        frontier = best[3]
    return _frontier_clustering(frontier, n)


def random_clustering(n, k, seed=0):
    """Uniform random assignment, repaired so every cluster is nonempty."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    rng = np.random.default_rng(seed)
    assign = rng.integers(k, size=n)
    missing = [j for j in range(k) if not (assign == j).any()]
    while missing:
        sizes = np.bincount(assign, minlength=k)
        donors = np.flatnonzero(sizes[assign] >= 2)
        pick = donors[int(rng.integers(len(donors)))]
        assign[pick] = missing.pop()
    return Clustering(assign, k)
