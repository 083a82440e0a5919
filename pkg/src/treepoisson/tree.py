"""Rooted trees with an optional homogeneous tail.

A model is a finite stored core plus, optionally, a q-ary constant-potential
tree hanging below every frontier leaf.  Vertices are addressed canonically by
their arc from the origin, written as a tuple of child indices: ``()`` is the
origin, ``(0, 2)`` the third child of the first child, and so on.  Tail
vertices are addressed the same way, continuing past a frontier vertex with
indices in ``range(q)``; they are never materialized unless asked for.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

Address = tuple

DEFAULT_DEGREE_BOUND = 16
MAX_ENUMERATED_VERTICES = 500_000


class ModelError(ValueError):
    """Raised when a model document is malformed or violates an invariant."""


def format_address(addr: Address) -> str:
    return "o" if len(addr) == 0 else ".".join(str(i) for i in addr)


def parse_address(text: str) -> Address:
    text = text.strip()
    if text in ("", "o"):
        return ()
    try:
        return tuple(int(tok) for tok in text.split("."))
    except ValueError as exc:
        raise ValueError(f"bad vertex address {text!r}") from exc


@dataclass(frozen=True)
class HomogeneousTail:
    """A q-ary tree with constant potential attached below each frontier vertex."""

    frontier: frozenset  # core indices
    branching: int
    potential: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if self.branching < 1:
            raise ModelError("tail branching must be >= 1")
        if self.weight == 0 or not np.isfinite(self.weight):
            raise ModelError("tail weight must be finite and nonzero")

    @property
    def band(self) -> tuple[float, float]:
        """Closed interval carrying the absolutely continuous spectrum of the tail."""
        half = 2.0 * abs(self.weight) * np.sqrt(self.branching)
        return (self.potential - half, self.potential + half)


@dataclass(frozen=True)
class DirectedEdge:
    """The pair (v|w): at ``source``, looking away from ``target``."""

    source: Address
    target: Address


class TreeModel:
    """Immutable tree carrying the operator ``H = A_p + diag``.

    Core vertices are stored in DFS preorder, so the subtree of core vertex
    ``i`` occupies indices ``i .. subtree_end[i] - 1``.
    """

    def __init__(self, names, parent, children, weight_up, potential, diagonal,
                 tail=None, degree_bound=DEFAULT_DEGREE_BOUND):
        n = len(names)
        self.names = tuple(names)
        self.parent = _frozen(np.asarray(parent, dtype=np.int64))
        self.children = tuple(tuple(c) for c in children)
        self.weight_up = _frozen(np.asarray(weight_up, dtype=float))
        self.potential = _frozen(np.asarray(potential, dtype=float))
        self.diagonal = _frozen(np.asarray(diagonal, dtype=float))
        self.tail = tail
        self.degree_bound = int(degree_bound)

        addresses = [()] * n
        depth = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            p = self.parent[i]
            addresses[i] = addresses[p] + (self.children[p].index(i),)
            depth[i] = depth[p] + 1
        self.addresses = tuple(addresses)
        self.depth = _frozen(depth)
        self.index = {a: i for i, a in enumerate(addresses)}
        self.name_index = {nm: i for i, nm in enumerate(self.names)}

        end = np.arange(1, n + 1, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            end[self.parent[i]] = max(end[self.parent[i]], end[i])
        self.subtree_end = _frozen(end)

        ptr = np.zeros(n + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(c) for c in self.children])
        self.child_ptr = _frozen(ptr)
        self.child_idx = _frozen(np.array([c for cs in self.children for c in cs], dtype=np.int64))
        mask = np.zeros(n, dtype=np.uint8)
        if tail is not None:
            mask[list(tail.frontier)] = 1
        self.frontier_mask = _frozen(mask)

    # -- basic queries -------------------------------------------------
    def __len__(self):
        return len(self.names)

    def __repr__(self):
        t = "" if self.tail is None else f", tail q={self.tail.branching}"
        return f"TreeModel({len(self)} stored vertices{t})"

    @property
    def origin(self) -> Address:
        return ()

    @property
    def has_tail(self) -> bool:
        return self.tail is not None

    def address(self, name) -> Address:
        """Canonical address of the core vertex with external id ``name``."""
        if name not in self.name_index:
            raise KeyError(f"no vertex named {name!r}")
        return self.addresses[self.name_index[name]]

    def name(self, addr: Address):
        return self.names[self.index[addr]]

    def locate(self, addr: Address) -> tuple[int, int]:
        """Return ``(core index, tail depth)`` for a stored or virtual vertex.

        Tail depth is 0 for stored vertices; otherwise it counts the steps taken
        below the frontier vertex whose index is returned.
        """
        addr = tuple(addr)
        i = self.index.get(addr)
        if i is not None:
            return i, 0
        # longest stored prefix
        k = len(addr) - 1
        while k >= 0 and addr[:k] not in self.index:
            k -= 1
        if k < 0:
            raise KeyError(f"vertex {format_address(addr)} not in model")
        f = self.index[addr[:k]]
        if not self.frontier_mask[f] or any(
                not (0 <= c < self.tail.branching) for c in addr[k:]):
            raise KeyError(f"vertex {format_address(addr)} not in model")
        return f, len(addr) - k

    def contains(self, addr: Address) -> bool:
        try:
            self.locate(addr)
        except KeyError:
            return False
        return True

    def is_stored(self, addr: Address) -> bool:
        return tuple(addr) in self.index

    def children_of(self, addr: Address) -> list:
        i, k = self.locate(addr)
        if k == 0 and not self.frontier_mask[i]:
            return [self.addresses[c] for c in self.children[i]]
        return [addr + (j,) for j in range(self.tail.branching)]

    def neighbors(self, addr: Address) -> list:
        out = [addr[:-1]] if len(addr) else []
        return out + self.children_of(addr)

    def edge_weight(self, a: Address, b: Address) -> float:
        """Off-diagonal entry p_a(b) of the operator for adjacent ``a``, ``b``."""
        if len(a) > len(b):
            a, b = b, a
        if len(b) != len(a) + 1 or b[:-1] != a:
            raise ValueError(f"{format_address(a)} and {format_address(b)} are not adjacent")
        if b in self.index:
            return float(self.weight_up[self.index[b]])
        self.locate(b)
        return float(self.tail.weight)

    def diag(self, addr: Address) -> float:
        i, k = self.locate(addr)
        return float(self.diagonal[i]) if k == 0 else float(self.tail.potential)

    def degree(self, addr: Address) -> int:
        return len(self.neighbors(addr))

    # -- enumeration ---------------------------------------------------
    def shell(self, n: int) -> list:
        """All vertices at distance ``n`` from the origin, in lexicographic order."""
        if n < 0:
            raise ValueError("negative depth")
        out = [a for i, a in enumerate(self.addresses) if self.depth[i] == n]
        if self.tail is not None:
            q = self.tail.branching
            count = sum(q ** (n - self.depth[f]) for f in self.tail.frontier if self.depth[f] < n)
            if count + len(out) > MAX_ENUMERATED_VERTICES:
                raise ValueError(f"shell {n} has {count + len(out)} vertices; too many to enumerate")
            for f in sorted(self.tail.frontier, key=lambda j: self.addresses[j]):
                k = n - int(self.depth[f])
                if k > 0:
                    base = self.addresses[f]
                    out.extend(base + s for s in np.ndindex(*([q] * k)))
        out.sort()
        return out

    def ball(self, radius: int) -> list:
        """Vertices with ``|v| <= radius``, shell by shell."""
        return [a for n in range(radius + 1) for a in self.shell(n)]

    def iter_edges(self) -> Iterator[tuple[int, int, float]]:
        for i in range(1, len(self)):
            yield int(self.parent[i]), i, float(self.weight_up[i])

    # -- derived models ------------------------------------------------
    def to_document(self) -> dict:
        doc = {
            "degree_bound": self.degree_bound,
            "origin": self.names[0],
            "vertices": [
                {"id": nm, "potential": float(self.potential[i]), "diagonal": float(self.diagonal[i])}
                for i, nm in enumerate(self.names)
            ],
            "edges": [
                {"a": self.names[p], "b": self.names[c], "weight": w} for p, c, w in self.iter_edges()
            ],
        }
        if self.tail is not None:
            doc["tail"] = {
                "frontier": [self.names[f] for f in sorted(self.tail.frontier)],
                "branching": self.tail.branching,
                "potential": self.tail.potential,
                "weight": self.tail.weight,
            }
        return doc

    def rerooted(self, new_origin: Address) -> "TreeModel":
        """Same operator, with the origin moved to a stored vertex."""
        new_origin = tuple(new_origin)
        if not self.is_stored(new_origin):
            raise ValueError(f"{format_address(new_origin)} is not a stored vertex")
        if self.tail is not None and self.index[new_origin] in self.tail.frontier and new_origin:
            raise ValueError("the origin cannot move onto a tail frontier vertex; enlarge the core")
        doc = self.to_document()
        doc["origin"] = self.name(new_origin)
        return load_model(doc)

    def without_branch(self, edge: DirectedEdge) -> "TreeModel":
        """The model on T^(v|w), rooted at v; both ends of ``edge`` must be stored."""
        v, w = tuple(edge.source), tuple(edge.target)
        if not (self.is_stored(v) and self.is_stored(w)):
            raise ValueError("branch removal needs both endpoints stored")
        if w not in self.neighbors(v):
            raise ValueError("edge endpoints are not adjacent")
        doc = self.to_document()
        drop = _component(self, w, blocked=v)
        keep = [nm for i, nm in enumerate(self.names) if i not in drop]
        keep_set = set(keep)
        doc["origin"] = self.name(v)
        doc["vertices"] = [d for d in doc["vertices"] if d["id"] in keep_set]
        doc["edges"] = [e for e in doc["edges"] if e["a"] in keep_set and e["b"] in keep_set]
        if "tail" in doc:
            doc["tail"]["frontier"] = [f for f in doc["tail"]["frontier"] if f in keep_set]
            if not doc["tail"]["frontier"]:
                del doc["tail"]
        return load_model(doc)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _component(model: TreeModel, start: Address, blocked: Address) -> set:
    """Core indices reachable from ``start`` without passing through ``blocked``."""
    adj = _core_adjacency(model)
    s, b = model.index[start], model.index[blocked]
    seen = {s}
    stack = [s]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y != b and y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def _core_adjacency(model: TreeModel) -> list:
    adj = [list(c) for c in model.children]
    for i in range(1, len(model)):
        adj[i].append(int(model.parent[i]))
    return adj


# -- loading -----------------------------------------------------------------
def load_model(document) -> TreeModel:
    """Build a validated :class:`TreeModel` from a model document.

    ``document`` is a mapping or JSON text following the model-file schema::

        {"degree_bound": 16, "origin": "o",
         "vertices": [{"id": "o", "potential": 0.0, "diagonal": 0.0}, ...],
         "edges": [{"a": "o", "b": "x", "weight": 1.0}, ...],
         "tail": {"frontier": ["x"], "branching": 2, "potential": 0.0, "weight": 1.0}}

    Missing weights default to 1 and a missing diagonal equals the potential.
    Children are ordered by their first appearance in ``edges``.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"malformed model document: {exc}") from exc
    if not isinstance(document, Mapping):
        raise ModelError("model document must be a mapping")
    try:
        vertices = list(document["vertices"])
        edges = list(document.get("edges", []))
        origin = document["origin"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: missing {exc}") from exc
    bound = int(document.get("degree_bound", DEFAULT_DEGREE_BOUND))

    ids, pot, dia = [], {}, {}
    for vd in vertices:
        try:
            vid = vd["id"]
            p = float(vd.get("potential", 0.0))
            d = float(vd.get("diagonal", p))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed vertex entry {vd!r}") from exc
        if vid in pot:
            raise ModelError(f"duplicate vertex id {vid!r}")
        if not (np.isfinite(p) and np.isfinite(d)):
            raise ModelError(f"non-finite potential at {vid!r}")
        ids.append(vid)
        pot[vid], dia[vid] = p, d
    if origin not in pot:
        raise ModelError(f"origin {origin!r} is not a vertex")

    adj = {vid: [] for vid in ids}
    wts = {}
    for ed in edges:
        try:
            a, b = ed["a"], ed["b"]
            w = float(ed.get("weight", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed edge entry {ed!r}") from exc
        if a not in adj or b not in adj:
            raise ModelError(f"edge {a!r}-{b!r} references an unknown vertex")
        if a == b:
            raise ModelError("not a tree: self-loop")
        key = frozenset((a, b))
        if key in wts:
            raise ModelError("not a tree: repeated edge")
        if w == 0 or not np.isfinite(w):
            raise ModelError(f"edge {a!r}-{b!r} has zero or non-finite weight")
        wts[key] = w
        adj[a].append(b)
        adj[b].append(a)
    if len(wts) != len(ids) - 1:
        raise ModelError("not a tree: edge count must be |V| - 1")

    # DFS preorder from the origin
    order, parent_of = [], {origin: None}
    stack = [origin]
    while stack:
        x = stack.pop()
        order.append(x)
        kids = [y for y in adj[x] if y != parent_of[x]]
        for y in kids:
            if y in parent_of:
                raise ModelError("not a tree: cycle detected")
            parent_of[y] = x
        stack.extend(reversed(kids))
    if len(order) != len(ids):
        raise ModelError("not a tree: graph is disconnected")
    idx = {vid: i for i, vid in enumerate(order)}
    parent = [-1] + [idx[parent_of[x]] for x in order[1:]]
    children = [[idx[y] for y in adj[x] if y != parent_of[x]] for x in order]
    weight_up = [0.0] + [wts[frozenset((x, parent_of[x]))] for x in order[1:]]

    tail = None
    td = document.get("tail")
    if td is not None:
        try:
            frontier = [idx[f] for f in td["frontier"]]
            tail = HomogeneousTail(
                frontier=frozenset(frontier),
                branching=int(td["branching"]),
                potential=float(td.get("potential", 0.0)),
                weight=float(td.get("weight", 1.0)),
            )
        except KeyError as exc:
            raise ModelError(f"tail references unknown vertex or field {exc}") from exc
        for f in frontier:
            if children[f]:
                raise ModelError(f"frontier vertex {order[f]!r} is not a leaf of the core")

    for x in order:
        deg = len(adj[x])
        if tail is not None and idx[x] in tail.frontier:
            deg += tail.branching
        if deg > bound:
            raise ModelError(f"vertex {x!r} has degree {deg} > bound {bound}")

    return TreeModel(
        names=order, parent=parent, children=children, weight_up=weight_up,
        potential=[pot[x] for x in order], diagonal=[dia[x] for x in order],
        tail=tail, degree_bound=bound,
    )


def read_model(path) -> TreeModel:
    return load_model(Path(path).read_text())


def regular_ball(degree: int = 3, radius: int = 2, potential: float = 0.0,
                 weight: float = 1.0, tail: bool = True) -> TreeModel:
    """Ball of the ``degree``-regular tree, optionally closed off by a homogeneous tail.

    Vertex ids are the dotted addresses (``"o"`` for the origin).
    """
    if degree < 2:
        raise ValueError("degree must be >= 2")
    vertices = [{"id": "o", "potential": potential}]
    edges = []
    shell = [()]
    for r in range(radius):
        nxt = []
        for a in shell:
            for j in range(degree if r == 0 else degree - 1):
                b = a + (j,)
                vertices.append({"id": format_address(b), "potential": potential})
                edges.append({"a": format_address(a), "b": format_address(b), "weight": weight})
                nxt.append(b)
        shell = nxt
    doc = {"degree_bound": max(degree, DEFAULT_DEGREE_BOUND), "origin": "o",
           "vertices": vertices, "edges": edges}
    if tail:
        if radius == 0:
            raise ValueError("a tail on the bare origin would not be regular")
        doc["tail"] = {"frontier": [format_address(a) for a in shell],
                       "branching": degree - 1, "potential": potential, "weight": weight}
    return load_model(doc)


# -- paths, rays, cylinders ----------------------------------------------------
def _common_prefix(a: Address, b: Address) -> Address:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return a[:n]


def arc_between(model: TreeModel, v: Address, w: Address) -> list:
    """The unique non-backtracking path from ``v`` to ``w``."""
    v, w = tuple(v), tuple(w)
    for x in (v, w):
        if not model.contains(x):
            raise KeyError(f"vertex {format_address(x)} not in model")
    c = len(_common_prefix(v, w))
    return [v[:k] for k in range(len(v), c - 1, -1)] + [w[:k] for k in range(c + 1, len(w) + 1)]


@dataclass(frozen=True, eq=False)
class RayAddress:
    """A boundary point: a finite prefix continued by always taking child 0.

    On a finite core without tail, the continuation stops at a leaf and the
    ray is a terminated path; such rays only make sense for checks that stay
    away from the terminal vertex.
    """

    prefix: Address = ()

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(i) for i in self.prefix))

    @property
    def _canonical(self) -> Address:
        p = self.prefix
        while p and p[-1] == 0:
            p = p[:-1]
        return p

    def __eq__(self, other):
        return isinstance(other, RayAddress) and self._canonical == other._canonical

    def __hash__(self):
        return hash(self._canonical)

    def validate(self, model: TreeModel) -> None:
        if not model.contains(self.prefix):
            raise ValueError(f"ray prefix {format_address(self.prefix)} is not a path in the model")

    def vertex_at(self, model: TreeModel, n: int) -> Address:
        """Vertex of the ray at depth ``n``, or the terminal vertex if the ray ends sooner."""
        if n <= len(self.prefix):
            a = self.prefix[:n]
            if not model.contains(a):
                raise ValueError(f"ray prefix {format_address(self.prefix)} is not a path in the model")
            return a
        a = self.prefix
        self.validate(model)
        if model.is_stored(a):
            # walk the stored part until the tail (if any) takes over
            while len(a) < n and model.is_stored(a):
                i = model.index[a]
                if model.children[i]:
                    a = a + (0,)
                elif model.frontier_mask[i]:
                    break
                else:
                    return a
        return a + (0,) * (n - len(a))

    def terminal_depth(self, model: TreeModel) -> Optional[int]:
        """Depth where the ray ends, or ``None`` when it is a genuine infinite ray."""
        a = self.prefix
        self.validate(model)
        if not model.is_stored(a):
            return None
        while True:
            i = model.index[a]
            if model.frontier_mask[i]:
                return None
            if not model.children[i]:
                return len(a)
            a = a + (0,)

    def contains(self, model: TreeModel, v: Address) -> bool:
        """Whether ``v`` lies on the ray."""
        return self.vertex_at(model, len(v)) == tuple(v)


def confluence(model: TreeModel, v: Address, xi: RayAddress) -> Address:
    """v ∧ ξ: last common vertex of [o, v] and [o, ξ]."""
    v = tuple(v)
    if not model.contains(v):
        raise KeyError(f"vertex {format_address(v)} not in model")
    return _common_prefix(v, xi.vertex_at(model, len(v)))


@dataclass(frozen=True)
class Cylinder:
    """The set of boundary points whose ray passes through ``base``; ``None`` is all of ∂T."""

    base: Optional[Address] = None

    def contains(self, model: TreeModel, xi: RayAddress) -> bool:
        if self.base is None:
            return True
        return xi.vertex_at(model, len(self.base)) == self.base


def cylinder_partition(model: TreeModel, depth: int) -> list:
    """Cylinders over all vertices at distance ``depth`` from the origin."""
    if depth < 1:
        raise ValueError("cylinder depth must be >= 1")
    verts = model.shell(depth)
    if not verts:
        raise ValueError(f"no vertices at depth {depth}: depth exceeds representable range")
    return [Cylinder(a) for a in verts]
