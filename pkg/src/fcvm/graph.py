"""The expression graph and its backtracking trail.

Node contents are immutable values; a node is rewritten by swapping in a new
content object under the same id, so every referrer observes the rewrite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

NodeId = int


@dataclass(frozen=True)
class BotNode:
    pass


@dataclass(frozen=True)
class FreeNode:
    pass


@dataclass(frozen=True)
class ChoiceNode:
    left: NodeId
    right: NodeId


@dataclass(frozen=True)
class FunNode:
    name: str
    children: tuple[NodeId, ...]


@dataclass(frozen=True)
class ConNode:
    name: str
    children: tuple[NodeId, ...]


@dataclass(frozen=True)
class LitNode:
    value: int


@dataclass(frozen=True)
class FwdNode:
    target: NodeId


@dataclass(frozen=True)
class PartNode:
    head: str
    missing: int
    supplied: tuple[NodeId, ...]


NodeContent = Union[BotNode, FreeNode, ChoiceNode, FunNode, ConNode, LitNode, FwdNode, PartNode]

BOT = BotNode()
FREE = FreeNode()


def node_children(c: NodeContent) -> tuple[NodeId, ...]:
    if isinstance(c, (FunNode, ConNode)):
        return c.children
    if isinstance(c, ChoiceNode):
        return (c.left, c.right)
    if isinstance(c, FwdNode):
        return (c.target,)
    if isinstance(c, PartNode):
        return c.supplied
    return ()


class GraphError(Exception):
    pass


class StoreExhausted(GraphError):
    pass


@dataclass
class Frame:
    """One trail entry: on backtracking, ``target`` gets ``replacement``.

    Choice frames also carry ``restore``, the content the target held before
    the choice was taken, so that resuming the alternative can still be
    undone later.
    """

    target: NodeId
    replacement: NodeContent
    is_choice: bool = False
    restore: Optional[NodeContent] = None

    def __str__(self):
        mark = "?" if self.is_choice else ""
        return f"<{self.target}{mark}, {describe(self.replacement)}>"


class BtStack:
    def __init__(self, frames=None):
        self.frames: list[Frame] = list(frames or [])

    def push(self, frame: Frame):
        self.frames.append(frame)

    def pop(self) -> Frame:
        return self.frames.pop()

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __repr__(self):
        return "<" + " | ".join(str(f) for f in reversed(self.frames)) + ">"

    def copy(self) -> "BtStack":
        return BtStack(self.frames)


class Graph:
    def __init__(self, arities: Optional[dict[str, int]] = None, max_nodes: Optional[int] = None):
        self.nodes: list[Optional[NodeContent]] = []
        self.root: Optional[NodeId] = None
        self.arities = arities
        self.max_nodes = max_nodes
        self._free_slots: list[NodeId] = []

    def __len__(self):
        return len(self.nodes) - len(self._free_slots)

    def copy(self) -> "Graph":
        """An independent graph; node contents are immutable, so they are shared."""
        g = Graph(self.arities, self.max_nodes)
        g.nodes = list(self.nodes)
        g.root = self.root
        g._free_slots = list(self._free_slots)
        return g

    def _check(self, c: NodeContent):
        for k in node_children(c):
            if not (0 <= k < len(self.nodes)) or self.nodes[k] is None:
                raise GraphError(f"dangling child {k} in {c!r}")
        if self.arities is None:
            return
        if isinstance(c, (FunNode, ConNode)) and c.name in self.arities:
            if len(c.children) != self.arities[c.name]:
                raise GraphError(f"{c.name} needs {self.arities[c.name]} children, got {len(c.children)}")
        elif isinstance(c, PartNode):
            arity = self.arities.get(c.head)
            if c.missing < 1 or (arity is not None and c.missing + len(c.supplied) != arity):
                raise GraphError(f"bad partial application {c!r}")

    def alloc(self, c: NodeContent) -> NodeId:
        self._check(c)
        if self._free_slots:
            n = self._free_slots.pop()
            self.nodes[n] = c
            return n
        if self.max_nodes is not None and len(self.nodes) >= self.max_nodes:
            raise StoreExhausted(f"node store limit {self.max_nodes} reached")
        self.nodes.append(c)
        return len(self.nodes) - 1

    def reserve(self) -> NodeId:
        """Allocate a node whose content is filled in later (recursive lets)."""
        n = self.alloc(BOT)
        return n

    def __getitem__(self, n: NodeId) -> NodeContent:
        c = self.nodes[n]
        if c is None:
            raise GraphError(f"node {n} was reclaimed")
        return c

    def get(self, n: NodeId) -> NodeContent:
        return self[n]

    def set(self, n: NodeId, c: NodeContent):
        if not (0 <= n < len(self.nodes)) or self.nodes[n] is None:
            raise GraphError(f"no node {n}")
        if isinstance(c, FwdNode) and c.target == n:
            raise GraphError(f"node {n} cannot forward to itself")
        self._check(c)
        self.nodes[n] = c

    def contract_fwd(self, n: NodeId) -> NodeId:
        seen = set()
        while isinstance(self.nodes[n], FwdNode):
            if n in seen:
                raise GraphError(f"forwarding cycle through node {n}")
            seen.add(n)
            n = self.nodes[n].target
        return n

    def reachable(self, start: NodeId) -> set[NodeId]:
        seen = {start}
        todo = [start]
        while todo:
            for k in node_children(self[todo.pop()]):
                if k not in seen:
                    seen.add(k)
                    todo.append(k)
        return seen

    def collect(self, roots, stack: Optional[BtStack] = None) -> int:
        """Reclaim nodes unreachable from ``roots`` and from the trail.

        Only safe between answers; returns the number of reclaimed nodes.
        """
        live: set[NodeId] = set()
        starts = list(roots)
        for f in stack or ():
            starts.append(f.target)
            starts.extend(node_children(f.replacement))
            if f.restore is not None:
                starts.extend(node_children(f.restore))
        for s in starts:
            if s not in live:
                live |= self.reachable(s)
        freed = 0
        for n, c in enumerate(self.nodes):
            if c is not None and n not in live:
                self.nodes[n] = None
                self._free_slots.append(n)
                freed += 1
        self._free_slots.sort(reverse=True)
        return freed

    def snapshot(self, start: NodeId):
        return snapshot_reachable(self, start)

    def to_dot(self, start: NodeId, name: str = "G") -> str:
        return to_dot(self, start, name)


# ---------------------------------------------------------------------------
# Trail operations


def _take_choice(g: Graph, s: BtStack, f: Frame):
    restore = f.restore
    if restore is None:
        # rebuild ?(l, r) from FWD(l) in the graph and FWD(r) in the frame
        cur = g[f.target]
        if isinstance(cur, FwdNode) and isinstance(f.replacement, FwdNode):
            restore = ChoiceNode(cur.target, f.replacement.target)
        else:
            restore = cur
    g.set(f.target, f.replacement)
    s.push(Frame(f.target, restore))


def backtrack_step(g: Graph, s: BtStack) -> Frame:
    """Undo the top frame.  Taking a choice frame leaves its restore frame behind."""
    if not s.frames:
        raise GraphError("backtrack_step on an empty stack")
    f = s.pop()
    if f.is_choice:
        _take_choice(g, s, f)
    else:
        g.set(f.target, f.replacement)
    return f


def backtrack_to_choice(g: Graph, s: BtStack) -> bool:
    while s.frames:
        f = s.pop()
        if f.is_choice:
            _take_choice(g, s, f)
            return True
        g.set(f.target, f.replacement)
    return False


def unwind_to(g: Graph, s: BtStack, depth: int) -> int:
    """Single-step until the stack is back at ``depth``; returns the step count."""
    steps = 0
    while len(s) > depth:
        backtrack_step(g, s)
        steps += 1
    return steps


# ---------------------------------------------------------------------------
# Inspection


def describe(c: NodeContent) -> str:
    if isinstance(c, BotNode):
        return "fail"
    if isinstance(c, FreeNode):
        return "free"
    if isinstance(c, ChoiceNode):
        return f"?({c.left},{c.right})"
    if isinstance(c, LitNode):
        return str(c.value)
    if isinstance(c, FwdNode):
        return f"FWD({c.target})"
    if isinstance(c, PartNode):
        return f"PART({c.head},{c.missing},{list(c.supplied)})"
    args = ",".join(map(str, c.children))
    return f"{c.name}({args})" if c.children else c.name


def _shape(c: NodeContent):
    if isinstance(c, (FunNode, ConNode)):
        return (type(c).__name__, c.name)
    if isinstance(c, LitNode):
        return ("Lit", c.value)
    if isinstance(c, PartNode):
        return ("Part", c.head, c.missing)
    return (type(c).__name__,)


def snapshot_reachable(g: Graph, start: NodeId) -> tuple:
    """Canonical encoding of the subgraph reachable from ``start``.

    Nodes are numbered in depth-first discovery order, so two snapshots are
    equal exactly when the subgraphs are isomorphic with the same sharing.
    """
    label: dict[NodeId, int] = {}
    order: list[NodeId] = []
    todo = [start]
    while todo:
        n = todo.pop()
        if n in label:
            continue
        label[n] = len(order)
        order.append(n)
        todo.extend(reversed([k for k in node_children(g[n]) if k not in label]))
    return tuple((_shape(g[n]), tuple(label[k] for k in node_children(g[n]))) for n in order)


def _dot_label(c: NodeContent) -> str:
    if isinstance(c, BotNode):
        return "⊥"
    if isinstance(c, FreeNode):
        return "free"
    if isinstance(c, ChoiceNode):
        return "?"
    if isinstance(c, LitNode):
        return str(c.value)
    if isinstance(c, FwdNode):
        return "FWD"
    if isinstance(c, PartNode):
        return f"PART {c.head} {c.missing}"
    return c.name


def to_dot(g: Graph, start: NodeId, name: str = "G") -> str:
    lines = [f"digraph {name} {{", "  node [shape=box, fontname=\"monospace\"];"]
    nodes = sorted(g.reachable(start))
    for n in nodes:
        c = g[n]
        kind = type(c).__name__.removesuffix("Node").lower()
        label = _dot_label(c).replace('"', '\\"')
        lines.append(f'  n{n} [label="{label}", comment="{kind}"];')
    for n in nodes:
        for i, k in enumerate(node_children(g[n])):
            lines.append(f"  n{n} -> n{k} [label={i}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
