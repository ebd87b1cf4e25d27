"""Local sufficient conditions for exactness of 2D hierarchical complexes.

* support condition: each refined region is a union of supports of coarse
  top-degree functions;
* overlap condition: the part of a coarse support outside the refined
  region is connected and has no holes.

Supports and overlaps are boolean masks over level-``l`` Bezier elements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .hierarchy import LevelStack
from .topology import RegionTopology, region_topology

__all__ = [
    "OverlapRegion",
    "check_assumption_support",
    "overlap",
    "check_assumption_overlap",
    "extended_support",
    "support_union",
    "check_assumptions",
]


@dataclass
class OverlapRegion:
    level: int
    k: int
    index: int
    box: tuple
    cells: np.ndarray
    topology: Optional[RegionTopology]

    @property
    def empty(self) -> bool:
        return not self.cells.any()

    @property
    def ok(self) -> bool:
        return self.empty or (self.topology.n_comp == 1 and self.topology.n_holes == 0)

    def as_dict(self) -> dict:
        lo = [b[0] for b in self.box]
        cells = [[int(i + lo[0]), int(j + lo[1])] for i, j in np.argwhere(self.cells)]
        out = {"level": self.level, "k": self.k, "index": self.index, "cells": cells}
        if self.topology is not None:
            out.update(self.topology.as_dict())
        return out


def _require_2d(stack: LevelStack) -> None:
    if stack.n != 2:
        raise NotImplementedError("local conditions are implemented for n = 2 only")


def _boxes(stack: LevelStack, level: int, k: int) -> np.ndarray:
    """Support boxes ``(full_dim, 2, 2)`` of level-``level`` k-forms on the
    level-``level`` element grid (``[:, d] = (lo, hi)``)."""
    parts = []
    for lo, hi in stack.support_boxes(level, k, level):
        parts.append(np.stack([np.stack(lo, axis=1), np.stack(hi, axis=1)], axis=2))
    return np.concatenate(parts)


def support_union(stack: LevelStack, level: int, indices) -> np.ndarray:
    """Union of the supports of level-``level`` n-form functions, as a mask
    over level-``level`` elements."""
    boxes = _boxes(stack, level, stack.n)
    mask = np.zeros(stack.num_elements(level), dtype=bool)
    for i in indices:
        b = boxes[int(i)]
        mask[tuple(slice(b[d, 0], b[d, 1]) for d in range(stack.n))] = True
    return mask


def check_assumption_support(stack: LevelStack, level: int) -> dict:
    """Is ``Omega_{level+1}`` covered by supports of level-``level`` n-forms
    that lie inside it?"""
    _require_2d(stack)
    if not 0 <= level < stack.N:
        raise ValueError("level must satisfy 0 <= level < N")
    om = stack.omega(level + 1, level)
    inside = np.flatnonzero(stack.contained(level, 2, level + 1))
    covered = support_union(stack, level, inside)
    missing = np.argwhere(om & ~covered)
    witness = None if missing.size == 0 else [int(x) for x in missing[0]]
    return {"level": level, "ok": witness is None, "witness": witness,
            "uncovered": int(missing.shape[0])}


def overlap(stack: LevelStack, level: int, k: int, index: int) -> OverlapRegion:
    """``supp(beta) ∩ Omega^c_{level+1}`` for a level-``level`` k-form."""
    _require_2d(stack)
    b = _boxes(stack, level, k)[index]
    box = tuple((int(b[d, 0]), int(b[d, 1])) for d in range(2))
    outside = ~stack.omega(level + 1, level)
    cells = outside[box[0][0]:box[0][1], box[1][0]:box[1][1]]
    topo = region_topology(cells) if cells.any() else None
    return OverlapRegion(level, k, int(index), box, cells.copy(), topo)


def check_assumption_overlap(stack: LevelStack, level: int, forms=(0, 1, 2),
                             include_boundary: bool = False) -> dict:
    """Check that every nonempty overlap is connected without holes.

    Only functions surviving the boundary conditions are checked unless
    ``include_boundary``. Overlaps that are empty or fill the whole support
    box are trivially fine and skipped.
    """
    _require_2d(stack)
    if not 0 <= level < stack.N:
        raise ValueError("level must satisfy 0 <= level < N")
    outside = ~stack.omega(level + 1, level)
    P = np.pad(np.cumsum(np.cumsum(outside.astype(np.int64), 0), 1), [(1, 0), (1, 0)])
    violations: List[dict] = []
    checked = 0
    for k in forms:
        boxes = _boxes(stack, level, k)
        keep = stack.complexes[level].spaces[k].keep
        lo0, hi0, lo1, hi1 = boxes[:, 0, 0], boxes[:, 0, 1], boxes[:, 1, 0], boxes[:, 1, 1]
        cnt = P[hi0, hi1] - P[lo0, hi1] - P[hi0, lo1] + P[lo0, lo1]
        vol = (hi0 - lo0) * (hi1 - lo1)
        todo = np.flatnonzero((cnt > 0) & (cnt < vol) & (keep | include_boundary))
        for i in todo:
            checked += 1
            ov = overlap(stack, level, k, int(i))
            if not ov.ok:
                violations.append(ov.as_dict())
    return {"level": level, "ok": not violations, "violations": violations, "checked": checked}


def check_assumptions(stack: LevelStack) -> dict:
    """Both conditions at every level."""
    sup = [check_assumption_support(stack, l) for l in range(stack.N)]
    ovl = [check_assumption_overlap(stack, l) for l in range(stack.N)]
    return {
        "support": {"ok": all(s["ok"] for s in sup), "levels": sup},
        "overlap": {"ok": all(o["ok"] for o in ovl), "levels": ovl},
    }


def extended_support(stack: LevelStack, level: int, element) -> dict:
    """Extended support of a level-``level`` element ``Q``.

    Returns the element box covered by supports of the level 0-forms that
    do not vanish on ``Q``, the Greville cells of the n-forms that do not
    vanish on ``Q``, and the one-cell dilation of those cells clipped to
    the grid. Boxes are half-open index ranges ``((lo0, hi0), (lo1, hi1))``.
    """
    _require_2d(stack)
    shape = stack.num_elements(level)
    q = tuple(int(i) for i in element)
    if len(q) != 2 or any(not 0 <= i < s for i, s in zip(q, shape)):
        raise ValueError("element %s outside the level-%d mesh" % (q, level))
    r0 = stack.complexes[level].spaces[0].components[0].support_ranges()
    r2 = stack.complexes[level].spaces[2].components[0].support_ranges()
    ebox, gbox, gext = [], [], []
    for d in range(2):
        r = r0[d]
        hit = np.flatnonzero((r[:, 0] <= q[d]) & (q[d] < r[:, 1]))
        ebox.append((int(r[hit, 0].min()), int(r[hit, 1].max())))
        r = r2[d]
        hit = np.flatnonzero((r[:, 0] <= q[d]) & (q[d] < r[:, 1]))
        gbox.append((int(hit.min()), int(hit.max()) + 1))
        gext.append((max(gbox[-1][0] - 1, 0), min(gbox[-1][1] + 1, r.shape[0])))
    return {"element": list(q), "elements": tuple(ebox), "greville_cells": tuple(gbox),
            "greville_cells_extended": tuple(gext)}
