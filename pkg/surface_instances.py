#!/usr/bin/env python3
"""
Surface Instances - discrete (coarse) models of the surface operads

Only genus, arity and annulus moduli survive: boundary parametrizations
live in contractible spaces and are dropped. Arity 0 (discs) is excluded
everywhere, so every component of a dual graph reaches an input circle.

    AnnuliMonoid      Ann~   annuli a(alpha), alpha >= 0 exact, a(0) the unit
    FramedSurfaces    Fr~    smooth pieces (g, m) plus the annuli
    NodalAnnuli       NodAnn~  annuli plus the nodal annulus N (modulus infinity)
    NodalFramed       NodFr~   stable tree-like dual graphs with boundary
"""

import itertools
import logging
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import tree_kernel as tk
from errors import ArityMismatchError, MalformedTreeError, ParseError, UnstableSkeletonError
from operad_core import OperadInstance, Perm
from tree_kernel import TRIVIAL, LabeledTree, Leaf, Node

logger = logging.getLogger(__name__)

DEFAULT_GRID = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(1))
_RATIONAL_RE = re.compile(r'\d+(/\d+)?')


def parse_rational(text: str) -> Fraction:
    """'3/4' -> Fraction(3, 4); decimals, floats and signs are rejected"""
    text = text.strip()
    if not _RATIONAL_RE.fullmatch(text):
        raise ValueError(f"Moduli must be exact rationals like 1/4, got {text!r}")
    return Fraction(text)


def parse_grid(text: str) -> Tuple[Fraction, ...]:
    """'0,1/4,1/2,1' -> exact rationals"""
    return tuple(sorted({parse_rational(item) for item in text.split(',')}))


# ---------------------------------------------------------------- moduli

@dataclass(frozen=True)
class ExtModulus:
    """Nonnegative exact modulus; value None is the modulus infinity of a nodal annulus"""
    value: Optional[Fraction]

    def __post_init__(self):
        if self.value is not None and self.value < 0:
            raise ValueError(f"Modulus must be >= 0, got {self.value}")

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def __add__(self, other: 'ExtModulus') -> 'ExtModulus':
        if self.is_infinite or other.is_infinite:
            return INFINITY
        return ExtModulus(self.value + other.value)

    def __str__(self) -> str:
        return 'inf' if self.is_infinite else str(self.value)

    @classmethod
    def parse(cls, text: str) -> 'ExtModulus':
        if text == 'inf':
            return INFINITY
        return cls(parse_rational(text))


INFINITY = ExtModulus(None)
ZERO = ExtModulus(Fraction(0))


def ann_compose(a: ExtModulus, b: ExtModulus) -> ExtModulus:
    return a + b


# ---------------------------------------------------------------- surface decorations

SMOOTH = 'smooth'
ANNULUS = 'annulus'
NODAL = 'nodal'
NODAL_SMOOTH = 'nodal_smooth'


@dataclass(frozen=True)
class SurfaceDec:
    kind: str
    genus: int = 0
    inputs: int = 1
    modulus: Optional[Fraction] = None

    def __post_init__(self):
        if self.kind in (SMOOTH, NODAL_SMOOTH):
            if self.inputs < 1 or self.genus < 0:
                raise MalformedTreeError(f"Bad surface piece g={self.genus} m={self.inputs}")
            if self.kind == SMOOTH and (self.genus, self.inputs) == (0, 1):
                raise MalformedTreeError("A genus-0 piece with one input is an annulus")
        elif self.kind == ANNULUS:
            if self.modulus is None or self.modulus < 0:
                raise MalformedTreeError("Annuli carry a finite modulus >= 0")
        elif self.kind != NODAL:
            raise MalformedTreeError(f"Unknown surface kind {self.kind!r}")

    @property
    def arity(self) -> int:
        return self.inputs if self.kind in (SMOOTH, NODAL_SMOOTH) else 1

    @property
    def is_annulus(self) -> bool:
        return self.kind == ANNULUS

    def ext_modulus(self) -> ExtModulus:
        if self.kind == NODAL:
            return INFINITY
        if self.kind == ANNULUS:
            return ExtModulus(self.modulus)
        raise ValueError(f"{self} has no modulus")

    def __str__(self) -> str:
        return format_surface(self)


def smooth(genus: int, inputs: int) -> SurfaceDec:
    return SurfaceDec(SMOOTH, genus, inputs)


def annulus(modulus) -> SurfaceDec:
    return SurfaceDec(ANNULUS, 0, 1, Fraction(modulus))


def nodal_piece(genus: int, inputs: int) -> SurfaceDec:
    """A piece with a node inside a larger component: never protected"""
    return SurfaceDec(NODAL_SMOOTH, genus, inputs)


NODAL_ANNULUS = SurfaceDec(NODAL)
UNIT_ANNULUS = annulus(0)


def format_surface(d: SurfaceDec) -> str:
    if d.kind == SMOOTH:
        return f'fr g={d.genus} m={d.inputs}'
    if d.kind == ANNULUS:
        return f'ann {d.modulus}'
    if d.kind == NODAL:
        return 'nod'
    return f'nfr g={d.genus} m={d.inputs}'


_SMOOTH_RE = re.compile(r'(fr|nfr) g=(\d+) m=(\d+)')


def parse_surface(text: str) -> SurfaceDec:
    text = ' '.join(text.split())
    if text == 'nod':
        return NODAL_ANNULUS
    if text.startswith('ann '):
        return annulus(parse_rational(text[4:]))
    match = _SMOOTH_RE.fullmatch(text)
    if match:
        kind, g, m = match.groups()
        return smooth(int(g), int(m)) if kind == 'fr' else nodal_piece(int(g), int(m))
    raise ValueError(f"Unknown surface decoration {text!r}")


def piece_of(dec: Any) -> SurfaceDec:
    """The surface piece behind a decoration (side-tagged decorations expose .piece)"""
    return getattr(dec, 'piece', dec)


def fr_compose(base: SurfaceDec, parts: Sequence[SurfaceDec]) -> SurfaceDec:
    """Gluing in Fr~: genera add along a tree, annulus chains add moduli, other annuli are absorbed"""
    if len(parts) != base.arity:
        raise ArityMismatchError(f"{format_surface(base)} takes {base.arity} parts, got {len(parts)}")
    if base.kind not in (SMOOTH, ANNULUS) or any(p.kind not in (SMOOTH, ANNULUS) for p in parts):
        raise MalformedTreeError("Fr~ composes smooth pieces and annuli only")
    if base.is_annulus and parts[0].is_annulus:
        return annulus(base.modulus + parts[0].modulus)
    genus = base.genus + sum(p.genus for p in parts)
    inputs = sum(p.arity for p in parts)
    return smooth(genus, inputs)


class AnnuliMonoid(OperadInstance):
    """Ann~ as an arity-1 operad"""

    name = 'ann'
    tag = 'ann'
    kinds = (ANNULUS,)

    def __init__(self, grid: Sequence[Fraction] = DEFAULT_GRID):
        self.grid = tuple(grid)

    def elements(self, n: int) -> List[SurfaceDec]:
        return [annulus(a) for a in self.grid] if n == 1 else []

    def arity_of(self, x: SurfaceDec) -> int:
        return x.arity

    def compose(self, x: SurfaceDec, parts: Sequence[SurfaceDec]) -> SurfaceDec:
        if len(parts) != 1:
            raise ArityMismatchError("Annuli have exactly one input")
        return annulus(ann_compose(x.ext_modulus(), parts[0].ext_modulus()).value)

    def unit(self) -> SurfaceDec:
        return UNIT_ANNULUS

    def format(self, x: SurfaceDec) -> str:
        return format_surface(x)

    def accepts(self, x: Any) -> bool:
        return isinstance(x, SurfaceDec) and x.kind in self.kinds

    def parse(self, text: str) -> SurfaceDec:
        x = parse_surface(text)
        if not self.accepts(x):
            raise ValueError(f"{text!r} is not an element of {self.name}")
        return x


class FramedSurfaces(AnnuliMonoid):
    """Fr~ at the coarse level: pieces (g, m), m >= 1, plus annuli in arity one"""

    name = 'fr'
    tag = 'fr'
    kinds = (SMOOTH, ANNULUS)

    def __init__(self, max_genus: int = 3, grid: Sequence[Fraction] = DEFAULT_GRID):
        super().__init__(grid)
        self.max_genus = max_genus

    def elements(self, n: int) -> List[SurfaceDec]:
        if n < 1:
            return []
        if n == 1:
            return super().elements(1) + [smooth(g, 1) for g in range(1, self.max_genus + 1)]
        return [smooth(g, n) for g in range(0, self.max_genus + 1)]

    def compose(self, x: SurfaceDec, parts: Sequence[SurfaceDec]) -> SurfaceDec:
        return fr_compose(x, parts)

    def grade(self, x: SurfaceDec) -> int:
        return x.genus


class NodalAnnuli(AnnuliMonoid):
    """NodAnn~: annuli and the stable nodal annulus N; gluing two N's is stabilized back to N"""

    name = 'nodann'
    tag = 'nod'
    kinds = (ANNULUS, NODAL)

    def elements(self, n: int) -> List[SurfaceDec]:
        return super().elements(n) + ([NODAL_ANNULUS] if n == 1 else [])

    def compose(self, x: SurfaceDec, parts: Sequence[SurfaceDec]) -> SurfaceDec:
        if len(parts) != 1:
            raise ArityMismatchError("Nodal annuli have exactly one input")
        total = ann_compose(x.ext_modulus(), parts[0].ext_modulus())
        return NODAL_ANNULUS if total.is_infinite else annulus(total.value)


# ---------------------------------------------------------------- dual graphs

@dataclass(frozen=True, order=True)
class Component:
    """A component of genus g, its input circles (or markings) and the components hanging below its nodes"""
    genus: int
    inputs: Tuple[int, ...] = ()
    nodes: Tuple['Component', ...] = ()

    @property
    def subtree_inputs(self) -> List[int]:
        out = list(self.inputs)
        for child in self.nodes:
            out.extend(child.subtree_inputs)
        return out


def component(genus: int, inputs: Iterable[int] = (), nodes: Iterable[Component] = ()) -> Component:
    return Component(genus, tuple(sorted(inputs)), tuple(sorted(nodes)))


@dataclass(frozen=True)
class DualGraph:
    """Rooted at the component holding the output; modulus is kept only for a bare annulus"""
    root: Component
    modulus: Optional[Fraction] = None
    marked: bool = False

    def components(self) -> List[Tuple[Component, Optional[int]]]:
        """Pre-order list of (component, parent index)"""
        out: List[Tuple[Component, Optional[int]]] = []

        def walk(c: Component, parent: Optional[int]):
            out.append((c, parent))
            me = len(out) - 1
            for child in c.nodes:
                walk(child, me)

        walk(self.root, None)
        return out

    @property
    def arity(self) -> int:
        return len(self.root.subtree_inputs)

    @property
    def genus(self) -> int:
        return sum(c.genus for c, _ in self.components())

    @property
    def node_count(self) -> int:
        return len(self.components()) - 1

    @property
    def is_bare_annulus(self) -> bool:
        return self.root == Component(0, (1,), ())

    def __str__(self) -> str:
        return format_graph(self)


def _format_component(c: Component) -> str:
    return f"g{c.genus}[{','.join(str(i) for i in c.inputs)}]" + ''.join(
        '{' + _format_component(child) + '}' for child in c.nodes)


def format_graph(g: DualGraph) -> str:
    """Inline single-token form used inside tree decorations, e.g. 'dg g0[]{g1[1,2]}'"""
    text = ('dm ' if g.marked else 'dg ') + _format_component(g.root)
    if g.modulus is not None:
        text += f'~{g.modulus}'
    return text


_COMP_HEAD = re.compile(r'g(\d+)\[([\d,]*)\]')


def parse_graph(text: str) -> DualGraph:
    text = text.strip()
    prefix, _, body = text.partition(' ')
    if prefix not in ('dg', 'dm'):
        raise ValueError(f"Dual graphs start with 'dg' or 'dm', got {text!r}")
    body, _, modulus = body.partition('~')
    pos = 0

    def parse_comp() -> Component:
        nonlocal pos
        match = _COMP_HEAD.match(body, pos)
        if not match:
            raise ValueError(f"Bad component at offset {pos} in {body!r}")
        pos = match.end()
        inputs = [int(i) for i in match.group(2).split(',') if i]
        children = []
        while pos < len(body) and body[pos] == '{':
            pos += 1
            children.append(parse_comp())
            if pos >= len(body) or body[pos] != '}':
                raise ValueError(f"Unclosed node block in {body!r}")
            pos += 1
        return component(int(match.group(1)), inputs, children)

    root = parse_comp()
    if pos != len(body):
        raise ValueError(f"Trailing text in dual graph {body!r}")
    return DualGraph(root, parse_rational(modulus) if modulus else None, prefix == 'dm')


def format_graph_block(g: DualGraph) -> str:
    """Multi-line file form: one 'comp' line per component, parents referenced by index"""
    head = 'dm' if g.marked else 'dg'
    if g.modulus is not None:
        head += f' ~{g.modulus}'
    lines = [head]
    for idx, (c, parent) in enumerate(g.components()):
        parts = [f'comp {idx} g={c.genus}']
        if c.inputs:
            parts.append('(in ' + ' '.join(str(i) for i in c.inputs) + ')')
        parts.append('(out)' if parent is None else f'(node {parent})')
        lines.append(' '.join(parts))
    return '\n'.join(lines) + '\n'


_BLOCK_LINE = re.compile(r'comp (\d+) g=(\d+)(?: \(in ([\d ]+)\))? (?:\((out)\)|\(node (\d+)\))')


def parse_graph_block(text: str) -> DualGraph:
    lines = [l.strip() for l in text.strip().splitlines() if l.strip()]
    if not lines:
        raise ParseError("Empty dual graph block", 1, 1)
    head = lines[0].split()
    if head[0] not in ('dg', 'dm'):
        raise ParseError(f"Expected 'dg' or 'dm', got {head[0]!r}", 1, 1)
    modulus = parse_rational(head[1][1:]) if len(head) > 1 else None
    records: Dict[int, Tuple[int, List[int], Optional[int]]] = {}
    for lineno, line in enumerate(lines[1:], 2):
        match = _BLOCK_LINE.fullmatch(line)
        if not match:
            raise ParseError(f"Bad component line {line!r}", lineno, 1)
        idx, g, ins, out, parent = match.groups()
        records[int(idx)] = (int(g), [int(i) for i in ins.split()] if ins else [],
                             None if out else int(parent))
    roots = [i for i, r in records.items() if r[2] is None]
    if len(roots) != 1:
        raise ParseError("Exactly one component must hold the output", 1, 1)

    def build(i: int) -> Component:
        g, ins, _ = records[i]
        return component(g, ins, [build(j) for j, r in records.items() if r[2] == i])

    return DualGraph(build(roots[0]), modulus, head[0] == 'dm')


def _relabel_component(c: Component, mapping) -> Component:
    return component(c.genus, [mapping(i) for i in c.inputs],
                     [_relabel_component(child, mapping) for child in c.nodes])


def act_graph(g: DualGraph, sigma: Perm) -> DualGraph:
    inv = tk.inverse(tk.check_permutation(sigma, g.arity))
    return replace(g, root=_relabel_component(g.root, lambda l: inv[l - 1]))


# ---------------------------------------------------------------- stability

def _special_points(c: Component) -> int:
    """Markings/boundary circles plus nodes, counting the output or parent node once"""
    return len(c.inputs) + len(c.nodes) + 1


def _is_unstable(c: Component) -> bool:
    return 2 * c.genus - 2 + _special_points(c) <= 0


def is_stable(g: DualGraph) -> bool:
    """Interior components (no boundary circle) must satisfy 2g - 2 + n > 0"""
    return all(not (parent is not None and not c.inputs and _is_unstable(c))
               for c, parent in g.components())


def is_stable_marked(d: DualGraph) -> bool:
    return all(not _is_unstable(c) for c, _ in d.components())


def is_cap(c: Component, is_root: bool) -> bool:
    """Half of a nodal annulus: genus 0, one boundary circle, one node"""
    boundary = len(c.inputs) + (1 if is_root else 0)
    nodes = len(c.nodes) + (0 if is_root else 1)
    return c.genus == 0 and boundary == 1 and nodes == 1


def graph_weight(g: DualGraph) -> int:
    """Nodes plus components that are not node caps"""
    comps = g.components()
    if len(comps) == 1:
        return 1
    return g.node_count + sum(1 for c, parent in comps if not is_cap(c, parent is None))


def _stabilize_boundary(c: Component) -> Component:
    nodes: List[Component] = []
    for child in (_stabilize_boundary(k) for k in c.nodes):
        if not child.inputs and _is_unstable(child):
            nodes.extend(child.nodes)
        else:
            nodes.append(child)
    return component(c.genus, c.inputs, nodes)


def stabilize(g: DualGraph) -> DualGraph:
    """Contract every unstable interior component, merging its node edges"""
    return replace(g, root=_stabilize_boundary(g.root))


def _stabilize_marked(c: Component) -> Component:
    inputs = list(c.inputs)
    nodes: List[Component] = []
    for child in (_stabilize_marked(k) for k in c.nodes):
        if not _is_unstable(child):
            nodes.append(child)
        elif child.inputs:
            inputs.extend(child.inputs)
        else:
            nodes.extend(child.nodes)
    return component(c.genus, inputs, nodes)


def stabilize_marked(d: DualGraph) -> DualGraph:
    """Deligne-Mumford stabilization of a marked skeleton"""
    root = _stabilize_marked(d.root)
    while _is_unstable(root) and not root.inputs and len(root.nodes) == 1:
        root = root.nodes[0]
    return replace(d, root=root)


# ---------------------------------------------------------------- NodFr~ composition

def _graft_component(c: Component, i: int, part: Component, shift) -> Tuple[Component, bool]:
    inputs = [shift(l) for l in c.inputs if l != i]
    nodes = []
    glued = i in c.inputs
    for child in c.nodes:
        new_child, hit = _graft_component(child, i, part, shift)
        glued = glued or hit
        nodes.append(new_child)
    genus = c.genus
    if i in c.inputs:
        genus += part.genus
        inputs.extend(part.inputs)
        nodes.extend(part.nodes)
    return component(genus, inputs, nodes), glued


def nodfr_partial(base: DualGraph, i: int, part: DualGraph) -> DualGraph:
    k, n = base.arity, part.arity
    if not 1 <= i <= k:
        raise ArityMismatchError(f"Input index {i} out of range 1..{k}")
    shifted_part = _relabel_component(part.root, lambda l: l + i - 1)
    root, _ = _graft_component(base.root, i, shifted_part,
                               lambda l: l if l < i else l + n - 1)
    modulus = None
    if base.modulus is not None and part.modulus is not None:
        modulus = base.modulus + part.modulus
    return stabilize(DualGraph(root, modulus, base.marked))


def nodfr_compose(base: DualGraph, parts: Sequence[DualGraph]) -> DualGraph:
    """Glue along the boundary, then stabilize"""
    if len(parts) != base.arity:
        raise ArityMismatchError(f"Dual graph has arity {base.arity}, got {len(parts)} parts")
    result = base
    for i in range(len(parts), 0, -1):
        result = nodfr_partial(result, i, parts[i - 1])
    return result


UNIT_GRAPH = DualGraph(Component(0, (1,), ()), Fraction(0))
NODE_GRAPH = DualGraph(component(0, (), [component(0, (1,))]))


def bare_annulus(modulus) -> DualGraph:
    return DualGraph(Component(0, (1,), ()), Fraction(modulus))


# ---------------------------------------------------------------- enumeration

def _subsets(labels: frozenset):
    items = sorted(labels)
    for r in range(len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield frozenset(combo)


@lru_cache(maxsize=None)
def _graph_trees(labels: frozenset, genus: int, size: int, reach: bool) -> frozenset:
    if size < 1 or (reach and not labels):
        return frozenset()
    out = set()
    for g0 in range(genus + 1):
        for own in _subsets(labels):
            for forest in _graph_forests(labels - own, genus - g0, size - 1, reach):
                out.add(component(g0, own, forest))
    return frozenset(out)


@lru_cache(maxsize=None)
def _graph_forests(labels: frozenset, genus: int, size: int, reach: bool) -> frozenset:
    if size == 0:
        return frozenset({()}) if not labels and genus == 0 else frozenset()
    out = set()
    for first in _subsets(labels):
        for g1 in range(genus + 1):
            for s1 in range(1, size + 1):
                for tree in _graph_trees(first, g1, s1, reach):
                    for rest in _graph_forests(labels - first, genus - g1, size - s1, reach):
                        out.add(tuple(sorted((tree,) + rest)))
    return frozenset(out)


def enumerate_dual_graphs(arity: int, genus: int, max_components: int,
                          marked: bool = False, reach: bool = True) -> List[DualGraph]:
    """All rooted component trees with exactly this arity and total genus (no stability filter)"""
    labels = frozenset(range(1, arity + 1))
    found = set()
    for size in range(1, max_components + 1):
        for root in _graph_trees(labels, genus, size, reach):
            found.add(DualGraph(root, None, marked))
    return sorted(found, key=format_graph)


def modulus_closure(grid: Sequence[Fraction], max_summands: int) -> Tuple[Fraction, ...]:
    """Sums of 1..max_summands grid values"""
    values = set(grid)
    frontier = set(grid)
    for _ in range(max_summands - 1):
        frontier = {a + b for a in frontier for b in grid}
        values |= frontier
    return tuple(sorted(values))


def stable_dual_graphs(arity: int, genus: int, max_weight: int,
                       moduli: Sequence[Fraction] = DEFAULT_GRID) -> List[DualGraph]:
    """Stable, input-reachable boundary graphs of weight <= max_weight; bare annuli once per modulus"""
    out = []
    for g in enumerate_dual_graphs(arity, genus, max_weight + 1):
        if g.is_bare_annulus:
            continue
        if is_stable(g) and graph_weight(g) <= max_weight:
            out.append(g)
    if arity == 1 and genus == 0 and max_weight >= 1:
        out.extend(bare_annulus(a) for a in moduli)
    return sorted(out, key=format_graph)


def stable_marked_skeletons(arity: int, genus: int, max_components: int) -> List[DualGraph]:
    return [d for d in enumerate_dual_graphs(arity, genus, max_components, marked=True, reach=False)
            if is_stable_marked(d)]


class NodalFramed(OperadInstance):
    """NodFr~ (tree part) on dual graphs with boundary"""

    name = 'nodfr'
    tag = 'dg'
    trivial_action = False

    def __init__(self, max_genus: int = 3, max_weight: int = 3, grid: Sequence[Fraction] = DEFAULT_GRID):
        self.max_genus = max_genus
        self.max_weight = max_weight
        self.grid = tuple(grid)

    def elements(self, n: int) -> List[DualGraph]:
        if n < 1:
            return []
        out = []
        for g in range(self.max_genus + 1):
            out.extend(stable_dual_graphs(n, g, self.max_weight, self.grid))
        return out

    def arity_of(self, x: DualGraph) -> int:
        return x.arity

    def act(self, x: DualGraph, sigma: Perm) -> DualGraph:
        return act_graph(x, sigma)

    def compose(self, x: DualGraph, parts: Sequence[DualGraph]) -> DualGraph:
        return nodfr_compose(x, parts)

    def grade(self, x: DualGraph) -> int:
        return x.genus

    def unit(self) -> DualGraph:
        return UNIT_GRAPH

    def format(self, x: DualGraph) -> str:
        return format_graph(x)

    def parse(self, text: str) -> DualGraph:
        return parse_graph(text)


# ---------------------------------------------------------------- Fr / cap

def fr_map(d: DualGraph) -> DualGraph:
    """Glue a disc at every marking: at the skeleton level markings become boundary circles"""
    if not is_stable_marked(d):
        raise UnstableSkeletonError(f"No stable marked curve for {format_graph(d)}")
    return DualGraph(d.root, None, marked=False)


def cap_map(g: DualGraph) -> DualGraph:
    """Cap every boundary circle with a marked disc, then stabilize.

    Genus 0 with one input caps to a sphere with two marked points, which has no
    stable model. That includes the bare annuli and the nodal annulus. The unstable
    skeleton 'dm g0[1]' is returned as is, with a warning, instead of being
    collapsed to an identity, so callers such as the fr-cap check can skip that
    corner instead of comparing against it.
    """
    d = stabilize_marked(DualGraph(g.root, None, marked=True))
    if not is_stable_marked(d):
        logger.warning("cap_map: %s has no stable marked model (M_{0,2} corner)", format_graph(g))
    return d


# ---------------------------------------------------------------- split structures

@dataclass(frozen=True)
class SplitStructure:
    """Pieces glued along seams: a tree decorated by SurfaceDec whose internal edges are the seams.

    Coinciding seams appear as a degenerate annulus a(0) between them.
    """
    pieces: LabeledTree

    @classmethod
    def from_seams(cls, tree: LabeledTree, coinciding: Optional[Dict[tk.Address, int]] = None) -> 'SplitStructure':
        """coinciding maps the address of a seam's lower piece to the number of copies of that seam"""
        for address in sorted(coinciding or {}, key=len, reverse=True):
            copies = coinciding[address]
            if not address or copies < 1:
                raise MalformedTreeError(f"Cannot repeat seam at {address}")
            lower = tk.get_at(tree, address)
            for _ in range(copies - 1):
                lower = Node((lower,), UNIT_ANNULUS)
            tree = tk.replace_at(tree, address, lower)
        return cls(tree)

    @property
    def seams(self) -> List[tk.Address]:
        return [address for address, _ in tk.iter_vertices(self.pieces) if address]

    @property
    def coinciding(self) -> List[tk.Address]:
        """Degenerate pieces sitting between two copies of the same seam, innermost (deepest) first"""
        out = [address for address, node in tk.iter_vertices(self.pieces)
               if address and piece_of(node.dec) == UNIT_ANNULUS
               and node.children and isinstance(node.children[0], Node)]
        return sorted(out, key=lambda a: (-len(a), a))


def dual_graph(s: SplitStructure) -> LabeledTree:
    """Vertices are the components of the complement of the seams, edges the seams"""
    return tk.strip(s.pieces)


def is_protected(s: Union[SplitStructure, LabeledTree]) -> bool:
    tree = s.pieces if isinstance(s, SplitStructure) else s
    return all(piece_of(node.dec).kind != NODAL_SMOOTH for _, node in tk.iter_vertices(tree))


@dataclass
class _Builder:
    genus: int = 0
    inputs: List[int] = field(default_factory=list)
    nodes: List['_Builder'] = field(default_factory=list)

    def freeze(self) -> Component:
        return component(self.genus, self.inputs, [n.freeze() for n in self.nodes])


def erase_seams(s: Union[SplitStructure, LabeledTree]) -> DualGraph:
    """Glue every seam: smooth gluing adds genus, nodal annuli contribute node edges; then stabilize"""
    tree = s.pieces if isinstance(s, SplitStructure) else s
    if tree is TRIVIAL:
        return UNIT_GRAPH
    pieces = [piece_of(node.dec) for _, node in tk.iter_vertices(tree)]
    if all(p.is_annulus for p in pieces):
        return bare_annulus(sum(p.modulus for p in pieces))

    def walk(slot, comp: _Builder):
        if isinstance(slot, Leaf):
            comp.inputs.append(slot.label)
            return
        p = piece_of(slot.dec)
        if p.kind == NODAL_SMOOTH:
            raise MalformedTreeError("Unprotected node: seams must flank every node")
        if p.kind == NODAL:
            lower = _Builder()
            comp.nodes.append(lower)
            comp = lower
        else:
            comp.genus += p.genus
        for child in slot.children:
            walk(child, comp)

    root = _Builder()
    walk(tree, root)
    return stabilize(DualGraph(root.freeze()))


def _set_partitions(items: Tuple[int, ...]) -> Iterator[List[Tuple[int, ...]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [(first,)] + part
        for k in range(len(part)):
            yield part[:k] + [(first,) + part[k]] + part[k + 1:]


def _genus_splits(total: int, parts: int) -> List[Tuple[int, ...]]:
    return [c for c in itertools.product(range(total + 1), repeat=parts) if sum(c) == total]


@lru_cache(maxsize=None)
def _cut(labels: Tuple[int, ...], genus: int, budget: int, grid: Tuple[Fraction, ...], top: bool) -> Tuple[Node, ...]:
    """Cuts of the surface (genus, labels) into at most budget pieces along distinct seams.

    Below a seam an a(0) collar would sit between two seams; that case belongs to
    repeated seams and is left to SplitStructure.from_seams.
    """
    if budget < 1:
        return ()
    out = []
    if genus == 0 and len(labels) == 1:
        out.extend(Node((Leaf(labels[0]),), annulus(a)) for a in grid)
    for a in grid:
        if a == 0 and not top:
            continue
        out.extend(Node((rest,), annulus(a)) for rest in _cut(labels, genus, budget - 1, grid, False))
    for g0 in range(genus + 1):
        for r in range(len(labels) + 1):
            for own in itertools.combinations(labels, r):
                rest = tuple(l for l in labels if l not in own)
                for blocks in _set_partitions(rest):
                    valency = len(own) + len(blocks)
                    room = budget - 1 - len(blocks)
                    if (g0 == 0 and valency < 2) or room < 0:
                        continue
                    for genera in _genus_splits(genus - g0, len(blocks)):
                        options = [_cut(block, g, room + 1, grid, False) for block, g in zip(blocks, genera)]
                        for kids in itertools.product(*options):
                            if 1 + sum(tk.vertex_count(k) for k in kids) <= budget:
                                out.append(Node(tuple(Leaf(l) for l in own) + kids, smooth(g0, valency)))
    return tuple(out)


def enumerate_splittings(arity: int, genus: int, max_pieces: int,
                         grid: Sequence[Fraction] = DEFAULT_GRID) -> List[SplitStructure]:
    """Split structures on the glued surface of this genus with inputs 1..arity.

    Every way of cutting along separating seams is produced once; a seam may be
    repeated, k coinciding copies leaving k-1 degenerate annuli between them.
    """
    out = []
    for base in _cut(tuple(range(1, arity + 1)), genus, max_pieces, tuple(sorted(set(grid))), True):
        seams = [address for address, _ in tk.iter_vertices(base) if address]
        room = max_pieces - tk.vertex_count(base)
        for extra in itertools.product(range(room + 1), repeat=len(seams)):
            if sum(extra) <= room:
                copies = {address: k + 1 for address, k in zip(seams, extra) if k}
                out.append(SplitStructure.from_seams(base, copies))
    return out


def graph_of_piece(p: SurfaceDec) -> DualGraph:
    """NodFr~ element of a protected piece: one component, a bare annulus, or the nodal annulus"""
    if p.kind == SMOOTH:
        return DualGraph(component(p.genus, range(1, p.inputs + 1)))
    if p.kind == ANNULUS:
        return bare_annulus(p.modulus)
    if p.kind == NODAL:
        return NODE_GRAPH
    raise MalformedTreeError(f"{format_surface(p)} has a node that no seam protects")


def piece_kind(dec: Any) -> str:
    """Surface kind of a piece or of the dual graph standing for one"""
    if isinstance(dec, DualGraph):
        if dec.is_bare_annulus:
            return ANNULUS
        if dec == NODE_GRAPH:
            return NODAL
        return SMOOTH if not dec.root.nodes else NODAL_SMOOTH
    return piece_of(dec).kind
