#!/usr/bin/env python3
"""
Rewrite Pushout - the amalgamated product P *_A Q as rewriting on decorated trees

Vertices of a tree over P + Q carry side-tagged decorations. Two relations
generate the pushout:

    ~1  an edge joining two vertices of the same side is contracted to one
        vertex decorated by the composite (CONTRACT_SAME_SIDE)
    ~2  a vertex decorated by i(a) may be relabeled j(a), and back (SWAP_SIDE)

normal_form orients ~2 per connected block of image vertices (a block moves to
Q exactly when it touches a vertex of Q outside the image, otherwise to P),
so each vertex is swapped at most once, and exhausts ~1 innermost first
between swap passes. equal_in_pushout is the independent closure
oracle, confluence_sample the empirical check that rewriting order does not
matter.
"""

import logging
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import tree_kernel as tk
from errors import BudgetExceededError, MalformedTreeError
from operad_core import OperadInstance, Perm, SCollection, canonical_decorated, check_decorated
from surface_instances import DEFAULT_GRID, AnnuliMonoid, FramedSurfaces, NodalAnnuli
from tree_kernel import TRIVIAL, CanonicalTreeCode, LabeledTree, Leaf, Node

logger = logging.getLogger(__name__)

P_SIDE = 'P'
Q_SIDE = 'Q'

CONTRACT_SAME_SIDE = 'contract'
SWAP_SIDE = 'swap'


@dataclass(frozen=True)
class Tagged:
    side: str
    piece: Any


class OperadMorphism:
    """A map of operads A -> target with a partial inverse on the image"""

    def __init__(self, source: OperadInstance, target: OperadInstance):
        self.source = source
        self.target = target

    def apply(self, a: Any) -> Any:
        raise NotImplementedError

    def preimage(self, x: Any) -> Optional[Any]:
        raise NotImplementedError

    def violations(self, max_arity: int = 2) -> List[str]:
        """Elements where compose-then-map differs from map-then-compose"""
        S, T = self.source, self.target
        bad = []
        pool = {n: S.elements(n) for n in range(0, max_arity + 1)}
        if not T.equal(self.apply(S.unit()), T.unit()):
            bad.append('unit')
        for k in range(1, max_arity + 1):
            for a in pool[k]:
                for n in range(0, max_arity + 1):
                    for b in pool[n]:
                        for i in range(1, k + 1):
                            lhs = self.apply(S.partial(a, i, b))
                            rhs = T.partial(self.apply(a), i, self.apply(b))
                            if not T.equal(lhs, rhs):
                                bad.append(f'{S.format(a)} o{i} {S.format(b)}')
        return bad


class InclusionMorphism(OperadMorphism):
    """A sub-operad included as is; the preimage is the target's own membership test on the source"""

    def apply(self, a: Any) -> Any:
        return a

    def preimage(self, x: Any) -> Optional[Any]:
        return x if self.source.accepts(x) else None


class TaggedCollection(SCollection):
    """P + Q as one decoration domain. Q elements in the image of A print with q_prefix."""

    trivial_action = True

    def __init__(self, system: 'PushoutSystem', q_prefix: str = 'n'):
        self.system = system
        self.q_prefix = q_prefix
        self.tag = f'{system.P.tag}+{system.Q.tag}'
        self.trivial_action = system.P.trivial_action and system.Q.trivial_action

    def side_operad(self, side: str) -> OperadInstance:
        return self.system.P if side == P_SIDE else self.system.Q

    def elements(self, n: int) -> List[Tagged]:
        return ([Tagged(P_SIDE, x) for x in self.system.P.elements(n)]
                + [Tagged(Q_SIDE, y) for y in self.system.Q.elements(n)])

    def arity_of(self, x: Tagged) -> int:
        return self.side_operad(x.side).arity_of(x.piece)

    def act(self, x: Tagged, sigma: Perm) -> Tagged:
        return Tagged(x.side, self.side_operad(x.side).act(x.piece, sigma))

    def format(self, x: Tagged) -> str:
        if x.side == P_SIDE:
            return self.system.P.format(x.piece)
        text = self.system.Q.format(x.piece)
        if self.system.j.preimage(x.piece) is not None:
            return self.q_prefix + text
        return text

    def parse(self, text: str) -> Tagged:
        if text.startswith(self.q_prefix):
            try:
                y = self.system.Q.parse(text[len(self.q_prefix):])
                if self.system.j.preimage(y) is not None:
                    return Tagged(Q_SIDE, y)
            except ValueError:
                pass
        try:
            return Tagged(P_SIDE, self.system.P.parse(text))
        except ValueError:
            y = self.system.Q.parse(text)
            if self.system.j.preimage(y) is not None:
                raise ValueError(f"{text!r} is ambiguous: write {self.q_prefix + text!r} for the Q side")
            return Tagged(Q_SIDE, y)


class PushoutSystem:
    """The diagram P <-i- A -j-> Q together with its rewriting rules"""

    def __init__(self, P: OperadInstance, Q: OperadInstance, A: OperadInstance,
                 i: OperadMorphism, j: OperadMorphism, check_arity: int = 2):
        self.P, self.Q, self.A = P, Q, A
        self.i, self.j = i, j
        for name, m in (('i', i), ('j', j)):
            bad = m.violations(check_arity)
            if bad:
                raise MalformedTreeError(f"{name} is not an operad morphism: {bad[:3]}")
        self.collection = TaggedCollection(self)
        self.name = f'{P.name}*{A.name}{Q.name}'

    def side_operad(self, side: str) -> OperadInstance:
        return self.P if side == P_SIDE else self.Q

    def image_of(self, dec: Tagged) -> Optional[Any]:
        """The element of A a vertex decoration comes from, if any"""
        m = self.i if dec.side == P_SIDE else self.j
        return m.preimage(dec.piece)

    def swapped(self, dec: Tagged) -> Tagged:
        a = self.image_of(dec)
        if a is None:
            raise MalformedTreeError(f"{self.collection.format(dec)} is not in the image of A")
        if dec.side == P_SIDE:
            return Tagged(Q_SIDE, self.j.apply(a))
        return Tagged(P_SIDE, self.i.apply(a))

    def is_genuine_q(self, dec: Tagged) -> bool:
        return dec.side == Q_SIDE and self.image_of(dec) is None

    def unit_tree(self) -> Node:
        return tk.corolla(1, Tagged(P_SIDE, self.i.apply(self.A.unit())))

    def lift(self, e: LabeledTree) -> Node:
        """The trivial tree is identified with the common unit vertex"""
        return self.unit_tree() if e is TRIVIAL else e

    def format(self, e: LabeledTree) -> str:
        return tk.render(e, self.collection.format)

    def parse(self, text: str) -> LabeledTree:
        return check_decorated(self.collection, tk.parse_tree(text, self.collection.parse))

    def code(self, e: LabeledTree) -> CanonicalTreeCode:
        return canonical_decorated(self.collection, e)


@dataclass(frozen=True, order=True)
class RewriteRule:
    kind: str
    locus: tk.Address

    def __str__(self) -> str:
        return f"{'~1' if self.kind == CONTRACT_SAME_SIDE else '~2'}@{'.'.join(map(str, self.locus)) or 'root'}"


# ---------------------------------------------------------------- single steps

def block_orientation(sys: PushoutSystem, e: Node) -> Dict[tk.Address, str]:
    """Target side of every image vertex.

    Image vertices are grouped into maximal connected blocks; a whole block goes
    to Q iff one of its members touches a genuine Q vertex, otherwise to P.
    """
    vertices = dict(tk.iter_vertices(e))
    image = {a for a, n in vertices.items() if sys.image_of(n.dec) is not None}
    target: Dict[tk.Address, str] = {}
    for start in sorted(image):
        if start in target:
            continue
        block, stack, seen, touches_q = [], [start], {start}, False
        while stack:
            a = stack.pop()
            block.append(a)
            around = [a + (pos,) for pos, c in enumerate(vertices[a].children) if isinstance(c, Node)]
            if a:
                around.append(a[:-1])
            for b in around:
                if b in image:
                    if b not in seen:
                        seen.add(b)
                        stack.append(b)
                elif sys.is_genuine_q(vertices[b].dec):
                    touches_q = True
        side = Q_SIDE if touches_q else P_SIDE
        for a in block:
            target[a] = side
    return target


def applicable_rules(sys: PushoutSystem, e: LabeledTree, oriented: bool = False) -> List[RewriteRule]:
    """All single-step rewrites of e; with oriented=True only the swaps the orientation forces"""
    if e is TRIVIAL:
        return []
    target = block_orientation(sys, e) if oriented else {}
    rules = []
    for address, node in tk.iter_vertices(e):
        if address and tk.get_at(e, address[:-1]).dec.side == node.dec.side:
            rules.append(RewriteRule(CONTRACT_SAME_SIDE, address))
        if sys.image_of(node.dec) is not None:
            if not oriented or target[address] != node.dec.side:
                rules.append(RewriteRule(SWAP_SIDE, address))
    return sorted(rules)


def _merge_child(sys: PushoutSystem, parent: Node, pos: int) -> Node:
    """Contract the edge to parent.children[pos]; grandchildren take its place in planar order"""
    child = parent.children[pos]
    op = sys.side_operad(parent.dec.side)
    dec = Tagged(parent.dec.side, op.partial(parent.dec.piece, pos + 1, child.dec.piece))
    children = parent.children[:pos] + child.children + parent.children[pos + 1:]
    return Node(children, dec, parent.length)


def apply_rule(sys: PushoutSystem, e: Node, rule: RewriteRule) -> Node:
    if rule.kind == SWAP_SIDE:
        node = tk.get_at(e, rule.locus)
        return tk.replace_at(e, rule.locus, replace(node, dec=sys.swapped(node.dec)))
    if not rule.locus:
        raise MalformedTreeError("The root has no edge to contract")
    parent_address = rule.locus[:-1]
    parent = tk.get_at(e, parent_address)
    if parent.dec.side != tk.get_at(e, rule.locus).dec.side:
        raise MalformedTreeError(f"{rule} joins vertices of different sides")
    return tk.replace_at(e, parent_address, _merge_child(sys, parent, rule.locus[-1]))


# ---------------------------------------------------------------- normal forms

def contract_all(sys: PushoutSystem, e: Node) -> Tuple[Node, int]:
    """Exhaust ~1 in one bottom-up pass; returns the tree and the number of contractions"""
    steps = 0

    def walk(node: Node) -> Node:
        nonlocal steps
        node = replace(node, children=tuple(c if isinstance(c, Leaf) else walk(c) for c in node.children))
        for pos in range(len(node.children) - 1, -1, -1):
            child = node.children[pos]
            if isinstance(child, Node) and child.dec.side == node.dec.side:
                node = _merge_child(sys, node, pos)
                steps += 1
        return node

    return walk(e), steps


def normalize(sys: PushoutSystem, e: LabeledTree, budget: Optional[int] = None) -> Tuple[Node, int]:
    """Oriented strategy to a fixpoint; returns the normal tree and the step count"""
    e = sys.lift(check_decorated(sys.collection, e))
    vertices = tk.vertex_count(e)
    if budget is None:
        images = sum(1 for _, n in tk.iter_vertices(e) if sys.image_of(n.dec) is not None)
        budget = 2 * (vertices + images) + 1
    steps = 0
    while True:
        e, contracted = contract_all(sys, e)
        steps += contracted
        forced = [r for r in applicable_rules(sys, e, oriented=True) if r.kind == SWAP_SIDE]
        if not forced:
            return e, steps
        for rule in forced:
            e = apply_rule(sys, e, rule)
        steps += len(forced)
        if steps > budget:
            raise BudgetExceededError("Normalization did not terminate within its step budget", sys.format(e))


def normal_form(sys: PushoutSystem, e: LabeledTree) -> CanonicalTreeCode:
    tree, _ = normalize(sys, e)
    return sys.code(tree)


# ---------------------------------------------------------------- closure oracle

class Decision(Enum):
    TRUE = 'TRUE'
    FALSE = 'FALSE'
    UNDECIDED = 'UNDECIDED'


def _expand(sys: PushoutSystem, e: Node) -> Iterable[Node]:
    for rule in applicable_rules(sys, e):
        yield apply_rule(sys, e, rule)


def closure(sys: PushoutSystem, e: LabeledTree, budget: int) -> Tuple[Dict[CanonicalTreeCode, Node], bool]:
    """Breadth-first closure of e under single steps; (representative per code, complete)"""
    start = sys.lift(e)
    seen = {sys.code(start): start}
    queue = deque([start])
    while queue:
        current = queue.popleft()
        for nxt in _expand(sys, current):
            code = sys.code(nxt)
            if code not in seen:
                if len(seen) >= budget:
                    return seen, False
                seen[code] = nxt
                queue.append(nxt)
    return seen, True


def equal_in_pushout(sys: PushoutSystem, e1: LabeledTree, e2: LabeledTree, budget: int = 20000) -> Decision:
    """Grow both closures a level at a time until they meet or both are exhausted"""
    sides = []
    for e in (e1, e2):
        start = sys.lift(check_decorated(sys.collection, e))
        sides.append({'seen': {sys.code(start)}, 'frontier': [start]})
    if sides[0]['seen'] & sides[1]['seen']:
        return Decision.TRUE
    while any(s['frontier'] for s in sides):
        for me, other in ((sides[0], sides[1]), (sides[1], sides[0])):
            nxt = []
            for current in me['frontier']:
                for t in _expand(sys, current):
                    code = sys.code(t)
                    if code in other['seen']:
                        return Decision.TRUE
                    if code not in me['seen']:
                        if len(me['seen']) >= budget:
                            logger.warning("equal_in_pushout: closure budget %d exhausted", budget)
                            return Decision.UNDECIDED
                        me['seen'].add(code)
                        nxt.append(t)
            me['frontier'] = nxt
    return Decision.FALSE


# ---------------------------------------------------------------- confluence sampling

@dataclass
class ConfluenceReport:
    start: str
    trials: int
    outcomes: Counter = field(default_factory=Counter)

    @property
    def passed(self) -> bool:
        return len(self.outcomes) == 1

    def to_dict(self) -> Dict[str, Any]:
        return {'start': self.start, 'trials': self.trials, 'status': 'PASS' if self.passed else 'FAIL',
                'outcomes': {str(code): n for code, n in sorted(self.outcomes.items())}}


def random_rewrite(sys: PushoutSystem, e: LabeledTree, rng: np.random.Generator,
                   budget: Optional[int] = None) -> Node:
    """One maximal oriented rewrite sequence choosing each step uniformly"""
    e = sys.lift(e)
    budget = budget or 4 * tk.vertex_count(e) + 4
    for _ in range(budget):
        rules = applicable_rules(sys, e, oriented=True)
        if not rules:
            return e
        e = apply_rule(sys, e, rules[int(rng.integers(len(rules)))])
    raise BudgetExceededError("Random rewriting did not terminate", sys.format(e))


def confluence_sample(sys: PushoutSystem, e: LabeledTree, trials: int = 100, seed: int = 0) -> ConfluenceReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    e = check_decorated(sys.collection, e)
    report = ConfluenceReport(sys.format(e), trials)
    for child in np.random.SeedSequence(seed).spawn(trials):
        result = random_rewrite(sys, e, np.random.default_rng(child))
        report.outcomes[sys.code(result)] += 1
    if not report.passed:
        logger.warning("Rewriting %s reached %d distinct results", report.start, len(report.outcomes))
    return report


# ---------------------------------------------------------------- W-level pushout

def check_w_tagged(sys: PushoutSystem, e: LabeledTree) -> LabeledTree:
    """Edges between different sides come from free composition and carry length 1"""
    check_decorated(sys.collection, e)
    for address, node in tk.iter_vertices(e):
        if address:
            if node.length is None:
                raise MalformedTreeError(f"Internal edge at {address} has no length")
            if node.dec.side != tk.get_at(e, address[:-1]).dec.side and node.length != 1:
                raise MalformedTreeError(f"Edge at {address} joins two sides with length {node.length}")
    return e


def w_contract_tagged(sys: PushoutSystem, e: Node) -> Node:
    """Merge every zero-length edge (always same-side) through the side's partial composition"""

    def walk(node: Node) -> Node:
        node = replace(node, children=tuple(c if isinstance(c, Leaf) else walk(c) for c in node.children))
        for pos in range(len(node.children) - 1, -1, -1):
            child = node.children[pos]
            if isinstance(child, Node) and child.length == 0:
                node = _merge_child(sys, node, pos)
        return node

    return walk(e)


def _w_blocks(sys: PushoutSystem, e: Node) -> List[List[tk.Address]]:
    """Connected sets of image vertices joined by edges shorter than 1"""
    image = {a for a, n in tk.iter_vertices(e) if sys.image_of(n.dec) is not None}
    parent_of = {a: a[:-1] for a in image if a and a[:-1] in image and tk.get_at(e, a).length < 1}
    blocks: Dict[tk.Address, List[tk.Address]] = {}
    for a in sorted(image, key=len):
        root = a
        while root in parent_of:
            root = parent_of[root]
        blocks.setdefault(root, []).append(a)
    return list(blocks.values())


def w_normalize(sys: PushoutSystem, e: LabeledTree) -> LabeledTree:
    """Contract zero lengths, then move every detachable block of image vertices to its oriented side"""
    if e is TRIVIAL:
        return e
    e = w_contract_tagged(sys, check_w_tagged(sys, e))
    for block in _w_blocks(sys, e):
        members = set(block)
        outward = []
        for a in block:
            node = tk.get_at(e, a)
            if a and a[:-1] not in members:
                outward.append((node.length, tk.get_at(e, a[:-1])))
            for pos, c in enumerate(node.children):
                if isinstance(c, Node) and a + (pos,) not in members:
                    outward.append((c.length, c))
        if any(length < 1 for length, _ in outward):
            continue
        target = Q_SIDE if any(sys.is_genuine_q(n.dec) for _, n in outward) else P_SIDE
        for a in block:
            node = tk.get_at(e, a)
            if node.dec.side != target:
                e = tk.replace_at(e, a, replace(node, dec=sys.swapped(node.dec)))
    return e


def w_normal_form(sys: PushoutSystem, e: LabeledTree) -> CanonicalTreeCode:
    return sys.code(w_normalize(sys, e))


# ---------------------------------------------------------------- the surface diagram

def surface_pushout_system(grid: Optional[Sequence[Fraction]] = None, max_genus: int = 3) -> PushoutSystem:
    """Fr~ <- Ann~ -> NodAnn~ on the coarse models"""
    grid = tuple(grid or DEFAULT_GRID)
    A = AnnuliMonoid(grid)
    P = FramedSurfaces(max_genus, grid)
    Q = NodalAnnuli(grid)
    return PushoutSystem(P, Q, A, InclusionMorphism(A, P), InclusionMorphism(A, Q))
