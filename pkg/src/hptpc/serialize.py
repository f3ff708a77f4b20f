"""JSON exchange formats.

Complex numbers are always ``[re, im]`` pairs and matrices are row-major
lists of rows. The map format::

    { "dim": d,
      "representation": "kraus" | "choi" | "superop",
      "kraus": [ { "sign": 1|-1, "matrix": [[[re,im], ...], ...] }, ... ],
      "choi": [[[re,im], ...], ...],
      "superop": [[[re,im], ...], ...] }

Compiled maps add ``weights``, ``gamma``, ``completed``, ``source_rank``
and optionally ``tree``. Loaders validate invariants on read and name
the failing one.
"""

import json

import numpy as np

from . import channels as ch
from .compiler import CompiledCptp, TreeLeaf, TreeNode, TreePlan
from .errors import HptpcError, InvalidMapFormat


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def matrix_from_json(rows) -> np.ndarray:
    try:
        return np.array([[complex(x[0], x[1]) for x in row] for row in rows])
    except (TypeError, IndexError) as exc:
        raise InvalidMapFormat(f"malformed matrix: {exc}") from exc


def map_to_dict(m) -> dict:
    if isinstance(m, ch.SignedKrausMap):
        return {"dim": m.dim, "representation": "kraus",
                "kraus": [{"sign": s, "matrix": matrix_to_json(k)}
                          for s, k in zip(m.signs, m.ops)]}
    if isinstance(m, ch.ChoiMatrix):
        return {"dim": m.dim, "representation": "choi", "choi": matrix_to_json(m.mat)}
    if isinstance(m, ch.Superoperator):
        return {"dim": m.dim, "representation": "superop", "superop": matrix_to_json(m.mat)}
    raise TypeError(f"not a serializable map: {type(m)!r}")


def map_from_dict(d: dict):
    try:
        dim = int(d["dim"])
        rep = d["representation"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidMapFormat(f"missing dim/representation: {exc}") from exc
    try:
        if rep == "kraus":
            ops = [matrix_from_json(e["matrix"]) for e in d["kraus"]]
            signs = [int(e["sign"]) for e in d["kraus"]]
            return ch.SignedKrausMap(dim=dim, ops=ops, signs=signs)
        if rep == "choi":
            return ch.ChoiMatrix(dim=dim, mat=matrix_from_json(d["choi"]))
        if rep == "superop":
            return ch.Superoperator(dim=dim, mat=matrix_from_json(d["superop"]))
    except (HptpcError, ValueError) as exc:
        raise InvalidMapFormat(f"invariant violated while loading {rep!r} map: {exc}") from exc
    raise InvalidMapFormat(f"unknown representation {rep!r}")


def _tree_to_dict(node):
    if isinstance(node, TreeLeaf):
        return {"leaf": True, "branch": node.branch,
                "correction": matrix_to_json(node.correction)}
    return {"leaf": False, "branches": list(node.branches),
            "m0": matrix_to_json(node.m0), "m1": matrix_to_json(node.m1),
            "dilation": matrix_to_json(node.dilation),
            "support": matrix_to_json(node.support),
            "left": _tree_to_dict(node.left), "right": _tree_to_dict(node.right)}


def _tree_from_dict(d):
    if d["leaf"]:
        return TreeLeaf(branch=int(d["branch"]), correction=matrix_from_json(d["correction"]))
    return TreeNode(branches=[int(b) for b in d["branches"]],
                    m0=matrix_from_json(d["m0"]), m1=matrix_from_json(d["m1"]),
                    dilation=matrix_from_json(d["dilation"]),
                    support=matrix_from_json(d["support"]),
                    left=_tree_from_dict(d["left"]), right=_tree_from_dict(d["right"]))


def compiled_to_dict(c: CompiledCptp, plan: TreePlan = None) -> dict:
    out = {"dim": c.dim, "representation": "kraus",
           "kraus": [{"sign": 1, "matrix": matrix_to_json(k)} for k in c.kraus],
           "weights": [float(w) for w in c.weights],
           "gamma": float(c.gamma), "completed": bool(c.completed),
           "source_rank": int(c.source_rank)}
    if plan is not None:
        out["tree"] = {"depth": plan.depth, "leaf_order": list(plan.leaf_order),
                       "root": _tree_to_dict(plan.root)}
    return out


def compiled_from_dict(d: dict):
    try:
        c = CompiledCptp(dim=int(d["dim"]),
                         kraus=[matrix_from_json(e["matrix"]) for e in d["kraus"]],
                         weights=[float(w) for w in d["weights"]],
                         gamma=float(d["gamma"]), completed=bool(d["completed"]),
                         source_rank=int(d["source_rank"]))
    except (HptpcError, ValueError) as exc:
        raise InvalidMapFormat(f"invariant violated while loading compiled map: {exc}") from exc
    plan = None
    if "tree" in d:
        t = d["tree"]
        plan = TreePlan(dim=c.dim, depth=int(t["depth"]), root=_tree_from_dict(t["root"]),
                        leaf_order=[int(i) for i in t["leaf_order"]])
    return c, plan


def state_to_dict(rho: ch.DensityMatrix) -> dict:
    return {"dim": rho.dim, "matrix": matrix_to_json(rho.mat)}


def state_from_dict(d: dict) -> ch.DensityMatrix:
    try:
        return ch.DensityMatrix(dim=int(d["dim"]), mat=matrix_from_json(d["matrix"]))
    except (HptpcError, ValueError) as exc:
        raise InvalidMapFormat(f"invalid density matrix: {exc}") from exc


def observable_to_dict(obs: ch.Observable) -> dict:
    return {"dim": obs.dim, "matrix": matrix_to_json(obs.mat)}


def observable_from_dict(d: dict) -> ch.Observable:
    try:
        return ch.Observable(dim=int(d["dim"]), mat=matrix_from_json(d["matrix"]))
    except (HptpcError, ValueError) as exc:
        raise InvalidMapFormat(f"invalid observable: {exc}") from exc


def save_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
