"""JSON mesh specifications.

A spec describes a 2D (or n-D for non-hierarchical use) hierarchical
B-spline complex::

    {
      "degrees": [3, 3],
      "continuity": "max",
      "base_elements": [10, 10],
      "geometry": "identity",
      "levels": [
        {"refined_elements": [[0, 0], [0, 1]]},
        {"refined_boxes": [[0, 4, 0, 4]]},
        {"support_union_of": [[2, 2], [5, 5]]}
      ]
    }

Level ``j`` entries define ``Omega_{j+1}`` in level-``j`` element indices.
``refined_boxes`` rows are half-open ``[lo_0, hi_0, lo_1, hi_1]`` ranges;
``support_union_of`` lists level-``j`` n-form basis functions (tensor
indices) whose supports are unioned. Geometry is ``"identity"``,
``{"box": [[x0, y0], [x1, y1]]}`` or ``{"control_net": [...]}`` (uniform
maximal-continuity knots of the given ``degrees`` and net shape).
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, List, Optional, Union

import jsonschema
import numpy as np

from .assembly import Geometry, box_geometry, identity_geometry, spline_geometry
from .hierarchy import LevelStack, build_levels
from .tensor import build_complex, rotate_complex_2d
from .univariate import open_knot_vector, uniform_knot_vector

__all__ = ["SpecError", "MeshSpec", "SCHEMA", "load_spec", "parse_spec", "build_stack", "build_geometry",
           "spec_hash"]


class SpecError(ValueError):
    """Invalid spec; the message names the offending line or field."""


_index_pair = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["degrees", "base_elements"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "degrees": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1, "maxItems": 3},
        "continuity": {
            "oneOf": [
                {"enum": ["max", "maximal"]},
                {"type": "integer", "minimum": 0},
                {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
            ]
        },
        "base_elements": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1, "maxItems": 3},
        "geometry": {
            "oneOf": [
                {"enum": ["identity"]},
                {"type": "object", "required": ["box"], "additionalProperties": False,
                 "properties": {"box": {"type": "array", "minItems": 2, "maxItems": 2,
                                        "items": {"type": "array", "items": {"type": "number"},
                                                  "minItems": 2, "maxItems": 2}}}},
                {"type": "object", "required": ["control_net"], "additionalProperties": False,
                 "properties": {"control_net": {"type": "array"}, "degrees": {"type": "array"}}},
            ]
        },
        "levels": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "minProperties": 1,
                "properties": {
                    "refined_elements": {"type": "array", "items": _index_pair},
                    "refined_boxes": {"type": "array",
                                      "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                                "minItems": 4, "maxItems": 6}},
                    "support_union_of": {"type": "array", "items": _index_pair},
                },
            },
        },
    },
}


def spec_hash(data: dict) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class MeshSpec:
    degrees: List[int]
    base_elements: List[int]
    continuity: Union[str, int, list] = "max"
    geometry: Any = "identity"
    levels: List[dict] = field(default_factory=list)
    name: Optional[str] = None
    description: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"degrees": list(self.degrees), "base_elements": list(self.base_elements),
               "continuity": self.continuity, "geometry": self.geometry,
               "levels": copy.deepcopy(self.levels)}
        if self.name is not None:
            out["name"] = self.name
        if self.description is not None:
            out["description"] = self.description
        return out

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @property
    def hash(self) -> str:
        return spec_hash(self.to_dict())

    @property
    def n(self) -> int:
        return len(self.degrees)


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def parse_spec(data: dict) -> MeshSpec:
    """Validate a decoded spec and return a :class:`MeshSpec`."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SpecError("field %s: %s" % (_field_path(e), e.message))
    if len(data["degrees"]) != len(data["base_elements"]):
        raise SpecError("field degrees: length differs from base_elements")
    spec = MeshSpec(
        degrees=list(data["degrees"]),
        base_elements=list(data["base_elements"]),
        continuity=data.get("continuity", "max"),
        geometry=copy.deepcopy(data.get("geometry", "identity")),
        levels=copy.deepcopy(data.get("levels", [])),
        name=data.get("name"),
        description=data.get("description"),
    )
    if spec.levels and spec.n != 2:
        raise SpecError("field levels: hierarchical refinement requires two dimensions")
    return spec


def load_spec(path) -> MeshSpec:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("line %d, column %d: %s" % (exc.lineno, exc.colno, exc.msg)) from exc
    return parse_spec(data)


def _knot_vectors(spec: MeshSpec):
    kvs = []
    for d, (p, ne) in enumerate(zip(spec.degrees, spec.base_elements)):
        cont = spec.continuity
        if cont in ("max", "maximal"):
            kvs.append(uniform_knot_vector(p, ne))
            continue
        if isinstance(cont, list):
            if len(cont) != spec.n:
                raise SpecError("field continuity: need one list per direction")
            cont = cont[d]
            if len(cont) != ne - 1:
                raise SpecError("field continuity/%d: need %d interior values" % (d, ne - 1))
        try:
            kvs.append(open_knot_vector(p, np.linspace(0.0, 1.0, ne + 1), cont))
        except ValueError as exc:
            raise SpecError("field continuity: %s" % exc) from exc
    return kvs


def _level_mask(stack_like, spec_level: dict, shape: tuple, level: int, key: str) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for i, c in enumerate(spec_level.get("refined_elements", [])):
        if len(c) != len(shape) or any(v >= s for v, s in zip(c, shape)):
            raise SpecError("field %s/refined_elements/%d: element %s outside %s" % (key, i, c, shape))
        mask[tuple(c)] = True
    for i, b in enumerate(spec_level.get("refined_boxes", [])):
        if len(b) != 2 * len(shape):
            raise SpecError("field %s/refined_boxes/%d: need %d bounds" % (key, i, 2 * len(shape)))
        lo, hi = b[0::2], b[1::2]
        if any(l >= h or h > s for l, h, s in zip(lo, hi, shape)):
            raise SpecError("field %s/refined_boxes/%d: box %s outside %s" % (key, i, b, shape))
        mask[tuple(slice(l, h) for l, h in zip(lo, hi))] = True
    ids = spec_level.get("support_union_of", [])
    if ids:
        comp = stack_like.spaces[len(shape)].components[0]
        rngs = comp.support_ranges()
        for i, c in enumerate(ids):
            if len(c) != len(shape) or any(v >= r.shape[0] for v, r in zip(c, rngs)):
                raise SpecError("field %s/support_union_of/%d: function %s out of range" % (key, i, c))
            mask[tuple(slice(r[v, 0], r[v, 1]) for v, r in zip(c, rngs))] = True
    return mask


def build_stack(spec: MeshSpec, rotated: bool = False) -> LevelStack:
    """Level stack with homogeneous boundary conditions (optionally with
    rotated 1-forms)."""
    cx = build_complex(_knot_vectors(spec))
    if rotated:
        cx = rotate_complex_2d(cx)
    masks = []
    level_cx = cx
    for j, lv in enumerate(spec.levels):
        shape = tuple(kv.num_elements for kv in level_cx.knot_vectors)
        masks.append(_level_mask(level_cx, lv, shape, j, "levels/%d" % j))
        level_cx = level_cx.refine()
    try:
        return build_levels(cx, masks)
    except ValueError as exc:
        raise SpecError("field levels: %s" % exc) from exc


def build_geometry(spec: MeshSpec) -> Geometry:
    g = spec.geometry
    if g in (None, "identity"):
        return identity_geometry()
    if "box" in g:
        (x0, y0), (x1, y1) = g["box"]
        try:
            return box_geometry((x0, y0), (x1, y1))
        except ValueError as exc:
            raise SpecError("field geometry/box: %s" % exc) from exc
    net = np.asarray(g["control_net"], dtype=float)
    if net.ndim != 3 or net.shape[2] != 2:
        raise SpecError("field geometry/control_net: expected shape (m0, m1, 2)")
    degs = g.get("degrees", [1, 1])
    kvs = []
    for p, m in zip(degs, net.shape[:2]):
        if m - p < 1:
            raise SpecError("field geometry/control_net: too few control points for degree %d" % p)
        kvs.append(uniform_knot_vector(p, m - p))
    return spline_geometry(kvs, net)
