#!/usr/bin/env python3
"""
W Construction - trees with edge lengths over an operad instance

A W-element is a decorated tree whose internal edges carry exact lengths in
[0, 1], stored on the child vertex (Node.length). Composition grafts with
length 1 on every new edge; zero-length edges are contracted by composing
the two decorations. The unit of W(O) is the trivial tree.

hd_normalize is a separate gluing model for split surfaces: every seam of
weight 0 is erased with its own genus, arity and modulus bookkeeping, so it
can be checked against w_contract over Fr~.
"""

import itertools
import logging
from dataclasses import replace
from fractions import Fraction
from typing import Any, Iterator, List, Sequence

import numpy as np

import tree_kernel as tk
from errors import MalformedTreeError
from operad_core import OperadInstance, Perm, check_decorated, counit
from surface_instances import (ANNULUS, NODAL, NODAL_SMOOTH, SMOOTH, SurfaceDec, annulus, format_surface,
                               nodal_piece, piece_kind, smooth)
from tree_kernel import TRIVIAL, CanonicalTreeCode, LabeledTree, Leaf, Node

logger = logging.getLogger(__name__)

DEFAULT_LENGTHS = (Fraction(0), Fraction(1, 2), Fraction(1))
ONE = Fraction(1)


def check_lengths(e: LabeledTree) -> LabeledTree:
    for address, node in tk.iter_vertices(e):
        if address and node.length is None:
            raise MalformedTreeError(f"Internal edge at {address} has no length")
        if address and not 0 <= node.length <= 1:
            raise MalformedTreeError(f"Edge length {node.length} at {address} is outside [0, 1]")
    return e


def w_compose(base: LabeledTree, parts: Sequence[LabeledTree]) -> LabeledTree:
    """Graft; every new internal edge has length 1"""
    return tk.graft(base, parts, edge_length=ONE)


def w_partial(u: LabeledTree, i: int, v: LabeledTree) -> LabeledTree:
    return tk.partial_graft(u, i, v, edge_length=ONE)


def w_contract(O: OperadInstance, e: LabeledTree) -> LabeledTree:
    """Merge the endpoints of every length-0 edge, composing their decorations in O"""
    if e is TRIVIAL:
        return e

    def walk(node: Node) -> Node:
        node = replace(node, children=tuple(c if isinstance(c, Leaf) else walk(c) for c in node.children))
        for pos in range(len(node.children) - 1, -1, -1):
            child = node.children[pos]
            if isinstance(child, Node) and child.length == 0:
                dec = O.partial(node.dec, pos + 1, child.dec)
                children = node.children[:pos] + child.children + node.children[pos + 1:]
                node = Node(children, dec, node.length)
        return node

    return walk(e)


def w_counit(O: OperadInstance, e: LabeledTree) -> Any:
    """Forget lengths and compose everything"""
    return counit(O, e)


class WOperad(OperadInstance):
    """W(O) enumerated over a length grid; elements compare after zero-length contraction"""

    trivial_action = False

    def __init__(self, O: OperadInstance, length_grid: Sequence[Fraction] = DEFAULT_LENGTHS,
                 max_vertices: int = 2):
        self.O = O
        self.length_grid = tuple(length_grid)
        self.max_vertices = max_vertices
        self.name = f'W({O.name})'
        self.tag = f'w{O.tag}'

    def _dec_text(self, x: Any) -> str:
        return str(self.O.key(x))

    def elements(self, n: int) -> List[LabeledTree]:
        seen = {}
        for shape in tk.enumerate_shapes(n, self.max_vertices):
            for e in decorate_w(self.O, shape, self.length_grid):
                seen.setdefault(self.key(e), e)
        return [seen[k] for k in sorted(seen)]

    def arity_of(self, x: LabeledTree) -> int:
        return tk.arity(x)

    def act(self, x: LabeledTree, sigma: Perm) -> LabeledTree:
        return tk.act(x, sigma)

    def compose(self, x: LabeledTree, parts: Sequence[LabeledTree]) -> LabeledTree:
        return w_compose(x, parts)

    def grade(self, x: LabeledTree) -> int:
        return tk.vertex_count(x)

    def unit(self) -> LabeledTree:
        return TRIVIAL

    def key(self, x: LabeledTree) -> CanonicalTreeCode:
        canon = tk.canonical_form(w_contract(self.O, x), self._dec_text, self.O.act_for_canon)
        return CanonicalTreeCode(tk.render(canon, self._dec_text).encode('utf-8'))

    def format(self, x: LabeledTree) -> str:
        return tk.render(x, self.O.format)

    def parse(self, text: str) -> LabeledTree:
        return check_lengths(check_decorated(self.O, tk.parse_tree(text, self.O.parse)))


def decorate_w(O: OperadInstance, shape: LabeledTree, length_grid: Sequence[Fraction]) -> Iterator[LabeledTree]:
    """Every decoration of a shape by elements of O and every length assignment from the grid"""
    if shape is TRIVIAL:
        yield TRIVIAL
        return
    vertices = list(tk.iter_vertices(shape))
    choices = [O.elements(node.valency) for _, node in vertices]
    lengths = [list(length_grid) if address else [None] for address, _ in vertices]
    for decs in itertools.product(*choices):
        for lens in itertools.product(*lengths):
            tree = shape
            for (address, _), dec, length in sorted(zip(vertices, decs, lens), key=lambda p: -len(p[0][0])):
                current = tk.get_at(tree, address)
                tree = tk.replace_at(tree, address, Node(current.children, dec, length))
            yield tree


def sample_w_elements(O: OperadInstance, count: int, seed: int, max_arity: int = 3, max_vertices: int = 3,
                      length_grid: Sequence[Fraction] = DEFAULT_LENGTHS) -> List[LabeledTree]:
    """Seeded random W-elements: uniform shape, then uniform decorations and lengths"""
    rng = np.random.default_rng(seed)
    shapes = [s for n in range(1, max_arity + 1)
              for s in tk.enumerate_shapes(n, max_vertices, min_valency=1) if s is not TRIVIAL]
    pools = {}
    out = []
    for _ in range(count):
        shape = shapes[int(rng.integers(len(shapes)))]
        tree = shape
        vertices = sorted(tk.iter_vertices(shape), key=lambda p: -len(p[0]))
        for address, node in vertices:
            pool = pools.setdefault(node.valency, O.elements(node.valency))
            dec = pool[int(rng.integers(len(pool)))]
            length = length_grid[int(rng.integers(len(length_grid)))] if address else None
            current = tk.get_at(tree, address)
            tree = tk.replace_at(tree, address, Node(current.children, dec, length))
        out.append(tree)
    return out


def w_code(e: LabeledTree, fmt=format_surface) -> CanonicalTreeCode:
    return CanonicalTreeCode(tk.render(tk.canonical_form(e, fmt), fmt).encode('utf-8'))


# ---------------------------------------------------------------- Humpty-Dumpty gluing

def _glue(outer: SurfaceDec, inner: SurfaceDec) -> SurfaceDec:
    """The piece left after erasing the seam between outer and one of its inputs"""
    kinds = {outer.kind, inner.kind}
    if kinds == {ANNULUS}:
        return annulus(outer.modulus + inner.modulus)
    if kinds <= {NODAL, ANNULUS}:
        return outer if outer.kind == NODAL else inner
    genus = outer.genus + inner.genus
    inputs = outer.arity - 1 + inner.arity
    if kinds & {NODAL, NODAL_SMOOTH}:
        return nodal_piece(genus, inputs)
    return smooth(genus, inputs)


def hd_normalize(e: LabeledTree) -> LabeledTree:
    """Erase every seam of weight 0; seams of positive weight keep their length"""
    if e is TRIVIAL:
        return e

    def walk(node: Node) -> Node:
        kids = [c if isinstance(c, Leaf) else walk(c) for c in node.children]
        dec = node.dec
        children: List[Any] = []
        for child in kids:
            if isinstance(child, Node) and child.length == 0:
                dec = _glue(dec, child.dec)
                children.extend(child.children)
            else:
                children.append(child)
        return Node(tuple(children), dec, node.length)

    return walk(e)


def is_w_protected(e: LabeledTree) -> bool:
    """No contracted seams, no unprotected nodes, and a full-length seam on every path from a node to a smooth piece"""
    if e is TRIVIAL:
        return True
    vertices = dict(tk.iter_vertices(e))
    kinds = {a: piece_kind(n.dec) for a, n in vertices.items()}
    if NODAL_SMOOTH in kinds.values():
        return False
    if any(a and n.length == 0 for a, n in vertices.items()):
        return False

    def short_neighbours(a):
        node = vertices[a]
        if a and node.length < 1:
            yield a[:-1]
        for pos, c in enumerate(node.children):
            if isinstance(c, Node) and c.length < 1:
                yield a + (pos,)

    for start, kind in kinds.items():
        if kind != NODAL:
            continue
        stack, seen = [start], {start}
        while stack:
            a = stack.pop()
            for b in short_neighbours(a):
                if b in seen:
                    continue
                seen.add(b)
                if kinds[b] == SMOOTH:
                    return False
                if kinds[b] == ANNULUS:
                    stack.append(b)
    return True
