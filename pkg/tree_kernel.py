#!/usr/bin/env python3
"""
Tree Kernel - rooted planar trees with labeled input half-edges

A tree is an immutable nested value: a Node holds its children in planar
order, each child being another Node (a full internal edge) or a Leaf (an
incoming half-edge carrying its input label). The trivial tree "|" is the
distinguished singleton TRIVIAL. Nodes optionally carry a decoration (free
operad elements) and a length for the edge to their parent (W-construction).

Text form (UTF-8, whitespace separated):
    TREE  := "|" | "(" DEC ["@" LEN] CHILD* ")"
    CHILD := TREE | "#" INT
DEC is "_" for undecorated vertices.
"""

import itertools
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Iterator, List, Optional, Sequence, Tuple, Union

from errors import ArityMismatchError, MalformedTreeError, ParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Leaf:
    label: int


@dataclass(frozen=True)
class Node:
    children: Tuple[Union['Node', Leaf], ...] = ()
    dec: Any = None
    length: Optional[Fraction] = None

    @property
    def valency(self) -> int:
        return len(self.children)


class TrivialTree:
    """The tree with a unique edge and no vertex"""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return 'TRIVIAL'

    def __reduce__(self):
        return (TrivialTree, ())


TRIVIAL = TrivialTree()

Slot = Union[Node, Leaf]
LabeledTree = Union[Node, TrivialTree]
Address = Tuple[int, ...]


@dataclass(frozen=True, order=True)
class CanonicalTreeCode:
    code: bytes

    @property
    def text(self) -> str:
        return self.code.decode('utf-8')

    def __str__(self) -> str:
        return self.text


# ---------------------------------------------------------------- basics

def leaves(t: LabeledTree) -> List[int]:
    """Input labels in planar (left to right) order"""
    if t is TRIVIAL:
        return [1]
    out = []
    stack = [t]
    while stack:
        slot = stack.pop()
        if isinstance(slot, Leaf):
            out.append(slot.label)
        else:
            stack.extend(reversed(slot.children))
    return out


def arity(t: LabeledTree) -> int:
    return len(leaves(t))


def vertex_count(t: LabeledTree) -> int:
    if t is TRIVIAL:
        return 0
    return sum(1 for _ in iter_vertices(t))


def iter_vertices(t: LabeledTree) -> Iterator[Tuple[Address, Node]]:
    """Pre-order walk yielding (address, node); an address lists child positions from the root"""
    if t is TRIVIAL:
        return
    stack: List[Tuple[Address, Node]] = [((), t)]
    while stack:
        address, node = stack.pop()
        yield address, node
        for pos in range(len(node.children) - 1, -1, -1):
            child = node.children[pos]
            if isinstance(child, Node):
                stack.append((address + (pos,), child))


def get_at(t: Node, address: Address) -> Slot:
    slot = t
    for pos in address:
        slot = slot.children[pos]
    return slot


def replace_at(t: Node, address: Address, new: Slot) -> Slot:
    if not address:
        return new
    pos = address[0]
    children = list(t.children)
    children[pos] = replace_at(children[pos], address[1:], new)
    return replace(t, children=tuple(children))


def validate(t: LabeledTree) -> LabeledTree:
    """Check the labeling is a bijection onto {1..n} and the root has no edge length"""
    if t is TRIVIAL:
        return t
    if not isinstance(t, Node):
        raise MalformedTreeError(f"Not a tree: {t!r}")
    if t.length is not None:
        raise MalformedTreeError("The root vertex cannot carry an edge length")
    labels = leaves(t)
    if sorted(labels) != list(range(1, len(labels) + 1)):
        raise MalformedTreeError(f"Labeling {labels} is not a bijection onto 1..{len(labels)}")
    return t


def corolla(n: int, dec: Any = None) -> Node:
    if n < 0:
        raise ArityMismatchError(f"Corolla arity must be >= 0, got {n}")
    return Node(tuple(Leaf(i) for i in range(1, n + 1)), dec)


def strip(t: LabeledTree) -> LabeledTree:
    """Forget decorations and lengths"""
    if t is TRIVIAL:
        return t
    return Node(tuple(c if isinstance(c, Leaf) else strip(c) for c in t.children))


def relabel(slot: Slot, mapping: Callable[[int], int]) -> Slot:
    if isinstance(slot, Leaf):
        return Leaf(mapping(slot.label))
    return replace(slot, children=tuple(relabel(c, mapping) for c in slot.children))


# ---------------------------------------------------------------- permutations

def check_permutation(sigma: Sequence[int], n: int) -> Tuple[int, ...]:
    sigma = tuple(sigma)
    if sorted(sigma) != list(range(1, n + 1)):
        raise ArityMismatchError(f"{sigma} is not a permutation of 1..{n}")
    return sigma


def inverse(sigma: Sequence[int]) -> Tuple[int, ...]:
    inv = [0] * len(sigma)
    for j, s in enumerate(sigma, 1):
        inv[s - 1] = j
    return tuple(inv)


def act(t: LabeledTree, sigma: Sequence[int]) -> LabeledTree:
    """Right symmetric action: label i of t.sigma names the half-edge labeled sigma(i) in t"""
    n = arity(t)
    sigma = check_permutation(sigma, n)
    if t is TRIVIAL:
        return t
    inv = inverse(sigma)
    return relabel(t, lambda l: inv[l - 1])


# ---------------------------------------------------------------- grafting

def graft(base: LabeledTree, parts: Sequence[LabeledTree],
          edge_length: Optional[Fraction] = None) -> LabeledTree:
    """Operadic composition gamma(base; parts): part i is fused onto the input labeled i.

    Labels of the parts are concatenated left to right. Every newly created
    internal edge gets edge_length (W-construction), or no length.
    """
    k = arity(base)
    if len(parts) != k:
        raise ArityMismatchError(f"Base has arity {k} but {len(parts)} parts were given")
    for part in parts:
        validate(part)
    if base is TRIVIAL:
        return parts[0]

    offsets = list(itertools.accumulate([0] + [arity(p) for p in parts[:-1]]))

    def plug(slot: Slot) -> Slot:
        if isinstance(slot, Leaf):
            part = parts[slot.label - 1]
            offset = offsets[slot.label - 1]
            if part is TRIVIAL:
                return Leaf(offset + 1)
            shifted = relabel(part, lambda l: l + offset)
            if edge_length is not None:
                shifted = replace(shifted, length=edge_length)
            return shifted
        return replace(slot, children=tuple(plug(c) for c in slot.children))

    return plug(base)


def partial_graft(u: LabeledTree, i: int, v: LabeledTree,
                  edge_length: Optional[Fraction] = None) -> LabeledTree:
    """u o_i v = gamma(u; |, ..., v, ..., |)"""
    k = arity(u)
    if not 1 <= i <= k:
        raise ArityMismatchError(f"Input index {i} out of range 1..{k}")
    parts: List[LabeledTree] = [TRIVIAL] * k
    parts[i - 1] = v
    return graft(u, parts, edge_length)


# ---------------------------------------------------------------- text form

def format_length(length: Fraction) -> str:
    return str(Fraction(length))


def _format_dec(dec: Any, fmt: Optional[Callable[[Any], str]]) -> str:
    if dec is None:
        return '_'
    return fmt(dec) if fmt else str(dec)


@lru_cache(maxsize=1 << 16)
def render(t: Union[LabeledTree, Leaf], fmt: Optional[Callable[[Any], str]] = None) -> str:
    if t is TRIVIAL:
        return '|'
    if isinstance(t, Leaf):
        return f'#{t.label}'
    parts = [_format_dec(t.dec, fmt)]
    if t.length is not None:
        parts.append('@' + format_length(t.length))
    parts.extend(render(c, fmt) for c in t.children)
    return '(' + ' '.join(parts) + ')'


def _tokenize(text: str) -> Iterator[Tuple[str, int, int]]:
    line, col = 1, 0
    buf, start = '', (1, 1)
    for ch in text:
        col += 1
        if ch in '()' or ch.isspace():
            if buf:
                yield buf, start[0], start[1]
                buf = ''
            if ch in '()':
                yield ch, line, col
            if ch == '\n':
                line, col = line + 1, 0
        else:
            if not buf:
                start = (line, col)
            buf += ch
    if buf:
        yield buf, start[0], start[1]


def _is_structural(tok: str) -> bool:
    return tok in ('(', ')', '|') or tok.startswith('#') or tok.startswith('@')


def parse_tree(text: str, parse_dec: Optional[Callable[[str], Any]] = None) -> LabeledTree:
    """Parse the s-expression form; parse_dec turns a DEC payload into a decoration"""
    tokens = list(_tokenize(text))
    if not tokens:
        raise ParseError("Empty input", 1, 1)
    pos = 0

    def peek():
        if pos >= len(tokens):
            last = tokens[-1]
            raise ParseError("Unexpected end of input", last[1], last[2])
        return tokens[pos]

    def parse_slot(top: bool) -> Any:
        nonlocal pos
        tok, line, col = peek()
        pos += 1
        if tok == '|':
            if not top:
                raise ParseError("The trivial tree cannot appear as a child", line, col)
            return TRIVIAL
        if tok.startswith('#'):
            if top:
                raise ParseError("A half-edge cannot be a whole tree", line, col)
            try:
                return Leaf(int(tok[1:]))
            except ValueError:
                raise ParseError(f"Bad half-edge label {tok!r}", line, col)
        if tok != '(':
            raise ParseError(f"Unexpected token {tok!r}", line, col)
        dec_tokens = []
        while not _is_structural(peek()[0]):
            dec_tokens.append(peek()[0])
            pos += 1
        if not dec_tokens:
            raise ParseError("Missing decoration (use '_' for none)", line, col)
        payload = ' '.join(dec_tokens)
        if payload == '_':
            dec = None
        elif parse_dec is None:
            dec = payload
        else:
            try:
                dec = parse_dec(payload)
            except ParseError:
                raise
            except ValueError as e:
                raise ParseError(str(e), line, col)
        length = None
        if peek()[0].startswith('@'):
            ltok, lline, lcol = peek()
            pos += 1
            try:
                length = Fraction(ltok[1:])
            except ValueError:
                raise ParseError(f"Bad length {ltok!r}", lline, lcol)
            if top:
                raise ParseError("The root vertex cannot carry a length", lline, lcol)
        children = []
        while peek()[0] != ')':
            children.append(parse_slot(False))
        pos += 1
        return Node(tuple(children), dec, length)

    tree = parse_slot(True)
    if pos != len(tokens):
        tok, line, col = tokens[pos]
        raise ParseError(f"Trailing input {tok!r}", line, col)
    try:
        return validate(tree)
    except MalformedTreeError as e:
        raise ParseError(str(e), tokens[0][1], tokens[0][2])


# ---------------------------------------------------------------- canonical form

def slot_key(slot: Slot, fmt: Optional[Callable[[Any], str]] = None) -> Tuple[int, int, str]:
    """Sibling order: half-edges first, numerically, then subtrees by their text"""
    if isinstance(slot, Leaf):
        return (0, slot.label, '')
    return (1, 0, render(slot, fmt))


def canonical_form(t: LabeledTree, fmt: Optional[Callable[[Any], str]] = None,
                   act_dec: Optional[Callable[[Any, Tuple[int, ...]], Any]] = None) -> LabeledTree:
    """Bottom-up canonical planar presentation of the non-planar class of t.

    Children are sorted by slot_key. When act_dec is given, reordering the
    children of a vertex by pi twists its decoration to dec.pi, and ties
    between equal siblings are broken by the smallest twisted decoration.
    """
    if t is TRIVIAL:
        return t

    def canon(node: Node) -> Node:
        kids = [c if isinstance(c, Leaf) else canon(c) for c in node.children]
        keys = [slot_key(k, fmt) for k in kids]
        order = sorted(range(len(kids)), key=lambda j: keys[j])
        dec = node.dec
        if act_dec is not None and dec is not None:
            groups = [list(g) for _, g in itertools.groupby(order, key=lambda j: keys[j])]
            best = None
            for choice in itertools.product(*(itertools.permutations(g) for g in groups)):
                perm = [j for g in choice for j in g]
                twisted = act_dec(dec, tuple(j + 1 for j in perm))
                text = _format_dec(twisted, fmt)
                if best is None or text < best[0]:
                    best = (text, twisted, perm)
            _, dec, order = best
        return Node(tuple(kids[j] for j in order), dec, node.length)

    return canon(t)


def canonicalize(t: LabeledTree) -> CanonicalTreeCode:
    """Code of the non-planar isomorphism class of an undecorated labeled tree"""
    return CanonicalTreeCode(render(canonical_form(strip(t))).encode('utf-8'))


# ---------------------------------------------------------------- enumeration

def _subsets(labels: frozenset) -> Iterator[frozenset]:
    items = sorted(labels)
    for r in range(len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield frozenset(combo)


@lru_cache(maxsize=None)
def _shape_trees(labels: frozenset, size: int) -> frozenset:
    if size < 1:
        return frozenset()
    out = set()
    for own in _subsets(labels):
        for forest in _shape_forests(labels - own, size - 1):
            children = [Leaf(l) for l in sorted(own)] + list(forest)
            out.add(Node(tuple(sorted(children, key=slot_key))))
    return frozenset(out)


@lru_cache(maxsize=None)
def _shape_forests(labels: frozenset, size: int) -> frozenset:
    if size == 0:
        return frozenset({()}) if not labels else frozenset()
    out = set()
    for first in _subsets(labels):
        for s1 in range(1, size + 1):
            for tree in _shape_trees(first, s1):
                for rest in _shape_forests(labels - first, size - s1):
                    out.add(tuple(sorted((tree,) + rest, key=slot_key)))
    return frozenset(out)


def enumerate_shapes(n: int, max_vertices: int, min_valency: int = 0) -> List[LabeledTree]:
    """One canonical presentation per isomorphism class of arity-n trees with <= max_vertices vertices.

    min_valency drops classes having a vertex with fewer inputs (e.g. 1 excludes arity-0 vertices).
    """
    labels = frozenset(range(1, n + 1))
    found: List[LabeledTree] = [TRIVIAL] if n == 1 else []
    for size in range(1, max_vertices + 1):
        for tree in _shape_trees(labels, size):
            if all(node.valency >= min_valency for _, node in iter_vertices(tree)):
                found.append(tree)
    return sorted(found, key=lambda t: render(t))


def enumerate_trees(n: int, max_vertices: int) -> List[CanonicalTreeCode]:
    """Exactly one code per isomorphism class with at most max_vertices vertices, sorted"""
    if n < 0 or max_vertices < 0:
        raise ArityMismatchError("Arity and vertex bound must be >= 0")
    return sorted(canonicalize(t) for t in enumerate_shapes(n, max_vertices))
