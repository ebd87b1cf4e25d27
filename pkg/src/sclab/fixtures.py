"""Named mesh specifications used by the test-suite and the CLI.

Each function returns a :class:`~sclab.meshspec.MeshSpec`. Diagonal
fixtures place square blocks of level elements along the main diagonal with
a fixed overlap between consecutive blocks.
"""
from __future__ import annotations

from typing import List

import numpy as np

from .meshspec import MeshSpec

__all__ = [
    "diagonal_boxes",
    "counterexample",
    "remove_add",
    "maxwell_fixtures",
    "MAXWELL_EXPECTED",
    "stokes_uniform",
    "stokes_two_level",
    "stokes_multilevel",
    "condition_examples",
    "random_support_union",
    "FIXTURES",
    "get_fixture",
]

PI_BOX = {"box": [[0.0, 0.0], [float(np.pi), float(np.pi)]]}


def diagonal_boxes(block: int, overlap: int, start: int, count: int) -> List[List[int]]:
    """``count`` square blocks of side ``block`` starting at ``(start,
    start)`` with stride ``block - overlap``."""
    if not 0 <= overlap < block:
        raise ValueError("overlap must lie in [0, block)")
    stride = block - overlap
    return [[s, s + block, s, s + block] for s in (start + i * stride for i in range(count))]


def counterexample() -> MeshSpec:
    """Two 4x4 blocks with a 2x2 overlap on a 9x9 cubic mesh; the complex is
    not exact and its dimensions are (147, 328, 181)."""
    return MeshSpec([3, 3], [9, 9], levels=[{"refined_boxes": diagonal_boxes(4, 2, 1, 2)}],
                    name="counterexample")


def remove_add(overlap: int) -> MeshSpec:
    """Two cubic 4x4 blocks along the diagonal with the given overlap."""
    return MeshSpec([3, 3], [10, 10], levels=[{"refined_boxes": diagonal_boxes(4, overlap, 1, 2)}],
                    name="remove_add_%dx%d" % (overlap, overlap))


def _strips(n: int, thickness, gap: int, margin: int) -> List[List[int]]:
    y = (n - sum(thickness) - gap * (len(thickness) - 1)) // 2
    boxes = []
    for t in thickness:
        boxes.append([margin, n - margin, y, y + t])
        y += t + gap
    return boxes


def maxwell_fixtures() -> dict:
    """The six quartic meshes on ``(0, pi)^2``.

    * ``3lines``: three horizontal refined strips of 1, 2 and 1 elements;
    * ``3lines_bulge``: the same with a 4x4 bulge on the middle strip;
    * ``diag_OxO``: 5x5 blocks along the diagonal of a 19x19 mesh with
      overlap ``O``, spanning elements 1..17.
    """
    n = 16
    lines = _strips(n, (1, 2, 1), 3, 1)
    mid = lines[1]
    bulge = [n // 2 - 2, n // 2 + 2, mid[3], mid[3] + 4]
    out = {
        "3lines": MeshSpec([4, 4], [n, n], geometry=PI_BOX, levels=[{"refined_boxes": lines}],
                           name="maxwell_3lines"),
        "3lines_bulge": MeshSpec([4, 4], [n, n], geometry=PI_BOX, levels=[{"refined_boxes": lines + [bulge]}],
                                 name="maxwell_3lines_bulge"),
    }
    for o, cnt in ((1, 4), (2, 5), (3, 7), (4, 13)):
        out["diag_%dx%d" % (o, o)] = MeshSpec(
            [4, 4], [19, 19], geometry=PI_BOX,
            levels=[{"refined_boxes": diagonal_boxes(5, o, 1, cnt)}], name="maxwell_diag_%dx%d" % (o, o))
    return out


# expected per fixture: (support condition, overlap condition, exact, mixed-1 zeros, mixed-2 zeros, spurious free)
MAXWELL_EXPECTED = {
    "3lines": (False, False, False, 0, 1, False),
    "3lines_bulge": (False, False, True, 0, 0, False),
    "diag_1x1": (True, False, True, 0, 0, True),
    "diag_2x2": (True, False, False, 4, 0, False),
    "diag_3x3": (True, False, False, 6, 0, True),
    "diag_4x4": (True, True, True, 0, 0, True),
}


def stokes_uniform(n: int = 10) -> MeshSpec:
    return MeshSpec([3, 3], [n, n], name="stokes_uniform_%d" % n)


def stokes_two_level(overlap: int, n: int = 10) -> MeshSpec:
    """4x4 blocks tiling the diagonal of an ``n x n`` cubic mesh."""
    stride = 4 - overlap
    cnt = (n - 4) // stride + 1
    return MeshSpec([3, 3], [n, n], levels=[{"refined_boxes": diagonal_boxes(4, overlap, 0, cnt)}],
                    name="stokes_2level_%dx%d_%d" % (overlap, overlap, n))


def _diag_level(size: int, block: int, overlap: int) -> List[List[int]]:
    stride = block - overlap
    cnt = (size - block) // stride + 1
    return diagonal_boxes(block, overlap, 0, cnt)


def stokes_multilevel(overlap: int, levels: int, n: int = 10, graded: bool = False) -> MeshSpec:
    """Diagonal refinement repeated on every level.

    On level ``l`` the refined region is the union of diagonal blocks of
    4x4 level-``l`` elements tiling the diagonal with the given overlap,
    restricted to blocks inside the previous refined region. With
    ``graded`` every level but the finest uses a 3x3 overlap.
    """
    lv = []
    prev = None
    size = n
    for j in range(levels - 1):
        o = overlap if (not graded or j == levels - 2) else 3
        boxes = _diag_level(size, 4, o)
        if prev is not None:
            up = np.repeat(np.repeat(prev, 2, axis=0), 2, axis=1)
            boxes = [b for b in boxes if up[b[0]:b[1], b[2]:b[3]].all()]
        mask = np.zeros((size, size), dtype=bool)
        for b in boxes:
            mask[b[0]:b[1], b[2]:b[3]] = True
        lv.append({"refined_boxes": boxes})
        prev = mask
        size *= 2
    tag = "graded_" if graded else ""
    return MeshSpec([3, 3], [n, n], levels=lv, name="stokes_%s%dx%d_%dlevels" % (tag, overlap, overlap, levels))


def condition_examples() -> dict:
    """Cubic two-level meshes illustrating the local conditions.

    * ``a``: a ring of elements around an unrefined centre; no cubic
      support fits and overlaps have holes;
    * ``b``: two 4x4 blocks overlapping in a 2x2 square; supports fit but
      some overlaps are disconnected;
    * ``c``: a single 6x6 block satisfying both conditions.
    """
    n = 12
    ring = [[3, 6, 3, 4], [3, 6, 5, 6], [3, 4, 4, 5], [5, 6, 4, 5]]
    return {
        "a": MeshSpec([3, 3], [n, n], levels=[{"refined_boxes": ring}], name="assumption_a"),
        "b": MeshSpec([3, 3], [n, n], levels=[{"refined_boxes": diagonal_boxes(4, 2, 3, 2)}],
                      name="assumption_b"),
        "c": MeshSpec([3, 3], [n, n], levels=[{"refined_boxes": [[3, 9, 3, 9]]}], name="assumption_c"),
    }


def random_support_union(rng: np.random.Generator, degree: int = 2, n: int = 8, levels: int = 2,
                         max_functions: int = 4) -> MeshSpec:
    """Random mesh whose refined regions are unions of top-degree supports.

    On each level a random number (1..``max_functions``) of n-form
    functions whose supports lie inside the current refined region is
    drawn, so the support condition holds by construction.
    """
    from .meshspec import build_stack

    spec = MeshSpec([degree, degree], [n, n], levels=[], name="random_support_union")
    for l in range(levels - 1):
        stack = build_stack(spec)
        space = stack.complexes[l].spaces[2].components[0]
        inside = stack.contained(l, 2, l) if l > 0 else np.ones(space.size, dtype=bool)
        cand = np.flatnonzero(inside)
        if cand.size == 0:
            break
        pick = rng.choice(cand, size=min(cand.size, int(rng.integers(1, max_functions + 1))), replace=False)
        ids = [list(int(v) for v in np.unravel_index(i, space.shape, order="F")) for i in sorted(pick)]
        spec.levels.append({"support_union_of": ids})
    return spec


def _all() -> dict:
    out = {"counterexample": counterexample()}
    for k, v in maxwell_fixtures().items():
        out["maxwell_" + k] = v
    out["stokes_uniform"] = stokes_uniform()
    for o in (1, 2, 3):
        out["stokes_2level_%dx%d" % (o, o)] = stokes_two_level(o)
    out["stokes_1x1_4levels"] = stokes_multilevel(1, 4)
    out["stokes_graded_4levels"] = stokes_multilevel(1, 4, graded=True)
    for k, v in condition_examples().items():
        out["assumption_" + k] = v
    return out


FIXTURES = tuple(_all().keys())


def get_fixture(name: str) -> MeshSpec:
    table = _all()
    if name not in table:
        raise KeyError("unknown fixture %r; known: %s" % (name, ", ".join(sorted(table))))
    return table[name]
