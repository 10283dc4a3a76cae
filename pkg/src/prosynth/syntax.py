"""Constituency-parse ingestion and the graph machinery behind the syntax
sampler: Penn bracketed parsing, word stripping, tree-to-graph conversion,
diameters, the message-pass-count rule, and depth-first leaf ordering.

All functions are pure; graphs derived from trees are connected and acyclic
by construction (edges = nodes - 1, symmetric adjacency).
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class StructuralError(ValueError):
    """Graph violates a structural precondition (e.g. disconnected)."""


@dataclass
class ParseNode:
    label: str
    children: list["ParseNode"] = field(default_factory=list)
    word: str | None = None  # set only on word leaves of the full tree

    def is_word(self) -> bool:
        return self.word is not None


@dataclass
class ParseTree:
    root: ParseNode

    def words(self) -> list[str]:
        out: list[str] = []

        def walk(n: ParseNode):
            if n.is_word():
                out.append(n.word)
            for ch in n.children:
                walk(ch)

        walk(self.root)
        return out

    def node_count(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            n = stack.pop()
            count += 1
            stack.extend(n.children)
        return count

    def depth(self) -> int:
        """Edge count of the longest root-to-leaf path."""

        def walk(n: ParseNode) -> int:
            if not n.children:
                return 0
            return 1 + max(walk(ch) for ch in n.children)

        return walk(self.root)


def parse_penn(text: str) -> ParseTree:
    """Parse one Penn bracketed string like "(S (NP (DT the)) (VP (VBD sat)))".

    Bare tokens inside a bracket become word leaves; bracketed tokens become
    constituent nodes.  Malformed input raises ParseError with a byte offset.
    """
    i = 0
    n = len(text)

    def skip_ws(pos: int) -> int:
        while pos < n and text[pos].isspace():
            pos += 1
        return pos

    def read_atom(pos: int) -> tuple[str, int]:
        start = pos
        while pos < n and not text[pos].isspace() and text[pos] not in "()":
            pos += 1
        if pos == start:
            raise ParseError("expected a label or word", start)
        return text[start:pos], pos

    def read_node(pos: int) -> tuple[ParseNode, int]:
        if pos >= n or text[pos] != "(":
            raise ParseError("expected '('", pos)
        pos = skip_ws(pos + 1)
        label, pos = read_atom(pos)
        node = ParseNode(label)
        pos = skip_ws(pos)
        while True:
            if pos >= n:
                raise ParseError("unbalanced parentheses at end of input", pos)
            if text[pos] == ")":
                return node, pos + 1
            if text[pos] == "(":
                child, pos = read_node(pos)
                node.children.append(child)
            else:
                word, pos = read_atom(pos)
                node.children.append(ParseNode(label="", word=word))
            pos = skip_ws(pos)

    i = skip_ws(i)
    if i >= n:
        raise ParseError("empty input", i)
    root, i = read_node(i)
    i = skip_ws(i)
    if i != n:
        raise ParseError("trailing characters after parse", i)
    return ParseTree(root)


def strip_words(tree: ParseTree) -> ParseTree:
    """Drop word leaves so part-of-speech nodes become the leaves. Idempotent."""

    def walk(n: ParseNode) -> ParseNode:
        return ParseNode(n.label, [walk(ch) for ch in n.children if not ch.is_word()])

    return ParseTree(walk(tree.root))


@dataclass
class SyntaxGraph:
    """Undirected acyclic graph over a word-stripped tree.

    Node ids are preorder positions (root = 0).  Adjacency keeps a structural
    order per node: parent first, then children left to right, which makes
    downstream reductions reproducible under relabelling.
    """

    labels: list[str]
    adjacency: list[list[int]]
    leaf_order: list[int]
    root: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2


def tree_to_graph(tree: ParseTree) -> SyntaxGraph:
    """One graph node per (stripped) tree node, one undirected edge per
    parent-child link, with the depth-first leaf order recorded."""
    labels: list[str] = []
    adjacency: list[list[int]] = []

    def walk(n: ParseNode, parent: int | None) -> int:
        my_id = len(labels)
        labels.append(n.label)
        adjacency.append([] if parent is None else [parent])
        if parent is not None:
            adjacency[parent].append(my_id)
        for ch in n.children:
            walk(ch, my_id)
        return my_id

    walk(tree.root, None)
    graph = SyntaxGraph(labels=labels, adjacency=adjacency, leaf_order=[])
    graph.leaf_order = dfs_leaf_order(graph)
    return graph


def dfs_leaf_order(graph: SyntaxGraph) -> list[int]:
    """Leaf node ids in depth-first order from the root, preserving the
    left-to-right child order of the source bracketing.

    Leaves are degree-1 non-root nodes; a single-node graph's root is the
    sole leaf.
    """
    if graph.num_nodes == 1:
        return [graph.root]
    order: list[int] = []

    def walk(node: int, parent: int):
        children = [v for v in graph.adjacency[node] if v != parent]
        if not children and node != graph.root:
            order.append(node)
        for ch in children:
            walk(ch, node)

    walk(graph.root, -1)
    return order


def graph_diameter(graph: SyntaxGraph) -> int:
    """Longest shortest-path length over all node pairs, by BFS from every node."""
    n = graph.num_nodes
    best = 0
    for src in range(n):
        dist = [-1] * n
        dist[src] = 0
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in graph.adjacency[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        if min(dist) < 0:
            raise StructuralError("graph is disconnected")
        best = max(best, max(dist))
    return best


def message_pass_count(diameters: list[int]) -> int:
    """Nearest-rank 75th percentile of the diameter distribution, floored at 1.

    Sort ascending and take the 1-based element at ceil(0.75 * n).
    """
    if not diameters:
        raise ValueError("message_pass_count needs a non-empty diameter list")
    ordered = sorted(diameters)
    rank = -(-3 * len(ordered) // 4)  # ceil(0.75 n) in exact integer arithmetic
    return max(1, ordered[rank - 1])


class LabelVocab:
    """Constituent/POS tag vocabulary with an unknown-label fallback.

    Built from the training corpus; unseen tags at inference map to UNK.
    """

    UNK = "<unk>"

    def __init__(self, labels):
        uniq = sorted(set(labels) - {self.UNK})
        self._id = {self.UNK: 0}
        for lab in uniq:
            self._id[lab] = len(self._id)

    def __len__(self) -> int:
        return len(self._id)

    def id(self, label: str) -> int:
        return self._id.get(label, 0)

    def ids(self, labels) -> list[int]:
        return [self.id(lab) for lab in labels]

    def to_list(self) -> list[str]:
        return [lab for lab in self._id if lab != self.UNK]

    @classmethod
    def from_list(cls, labels: list[str]) -> "LabelVocab":
        return cls(labels)
