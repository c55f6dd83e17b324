#!/usr/bin/env python3
"""
Operad Core - enumerable set operads, symmetric collections and the free operad

An SCollection is an arity-graded decoration domain with a right symmetric
action; an OperadInstance adds a full composition and a unit. Free operad
elements are decorated trees (tree_kernel.Node with .dec), compared through
canonical_decorated codes. counit composes a decorated tree inside an
instance, and check_axioms exhaustively tests the operad identities.
"""

import concurrent.futures
import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from tqdm import tqdm

import tree_kernel as tk
from errors import ArityMismatchError, BudgetExceededError, MalformedTreeError
from tree_kernel import TRIVIAL, CanonicalTreeCode, LabeledTree, Leaf, Node

logger = logging.getLogger(__name__)

Perm = Tuple[int, ...]


def identity(n: int) -> Perm:
    return tuple(range(1, n + 1))


def compose_perms(sigma: Perm, tau: Perm) -> Perm:
    """(sigma tau)(j) = sigma(tau(j))"""
    return tuple(sigma[t - 1] for t in tau)


def block_insert(sigma: Perm, i: int, m: int) -> Perm:
    """sigma o_i id_m: sigma with its i-th point blown up into a block of m points"""
    target = sigma[i - 1]
    out = []
    for j, s in enumerate(sigma, 1):
        if j == i:
            out.extend(range(target, target + m))
        else:
            out.append(s if s < target else s + m - 1)
    return tuple(out)


class SCollection:
    """Arity-graded decoration domain X_n with a right S_n action.

    Subclasses provide elements(n) (a finite, bounded enumeration), arity_of,
    format/parse for the text form, and act when the action is not trivial.
    format must be injective: it doubles as the total order on decorations.
    """

    tag = 'x'
    trivial_action = True

    def elements(self, n: int) -> List[Any]:
        raise NotImplementedError

    def arity_of(self, x: Any) -> int:
        raise NotImplementedError

    def accepts(self, x: Any) -> bool:
        """Membership test for values that may lie outside the enumerated range"""
        return True

    def act(self, x: Any, sigma: Perm) -> Any:
        return x

    def format(self, x: Any) -> str:
        return str(x)

    def parse(self, text: str) -> Any:
        raise ValueError(f"{type(self).__name__} has no text form")

    def key(self, x: Any) -> Hashable:
        return x

    def equal(self, x: Any, y: Any) -> bool:
        return self.key(x) == self.key(y)

    def grade(self, x: Any) -> int:
        """Size that adds up under composition (genus, vertex count); check_axioms bounds tuples by it"""
        return 0

    @property
    def act_for_canon(self):
        return None if self.trivial_action else self.act

    def __repr__(self) -> str:
        return f'{type(self).__name__}()'


class OperadInstance(SCollection):
    """An SCollection with composition gamma and a unit"""

    name = 'operad'

    def compose(self, x: Any, parts: Sequence[Any]) -> Any:
        raise NotImplementedError

    def unit(self) -> Any:
        raise NotImplementedError

    def partial(self, x: Any, i: int, y: Any) -> Any:
        k = self.arity_of(x)
        if not 1 <= i <= k:
            raise ArityMismatchError(f"Input index {i} out of range 1..{k}")
        parts = [self.unit()] * k
        parts[i - 1] = y
        return self.compose(x, parts)


# ---------------------------------------------------------------- small collections

class UnitCollection(SCollection):
    """One undecorated point in every arity; Free(UnitCollection) is the Tree operad"""

    tag = '_'

    def __init__(self, max_arity: int = 4):
        self.max_arity = max_arity

    def elements(self, n: int) -> List[Any]:
        return [None]

    def arity_of(self, x: Any) -> int:
        raise MalformedTreeError("Undecorated points do not know their arity")

    def format(self, x: Any) -> str:
        return '_'

    def parse(self, text: str) -> Any:
        if text != '_':
            raise ValueError(f"Expected '_', got {text!r}")
        return None


@dataclass(frozen=True, order=True)
class Generator:
    name: str
    arity: int


class FiniteCollection(SCollection):
    """A finite collection given by named generators and an action table.

    table maps (name, sigma) to the name of generator.sigma; missing entries
    mean the action fixes the generator.
    """

    tag = 'gen'

    def __init__(self, generators: Iterable[Generator], table: Optional[Dict[Tuple[str, Perm], str]] = None):
        self.generators = sorted(generators)
        self.by_name = {g.name: g for g in self.generators}
        self.table = dict(table or {})
        self.trivial_action = not self.table

    def elements(self, n: int) -> List[Any]:
        return [g for g in self.generators if g.arity == n]

    def arity_of(self, x: Generator) -> int:
        return x.arity

    def act(self, x: Generator, sigma: Perm) -> Generator:
        return self.by_name[self.table.get((x.name, tuple(sigma)), x.name)]

    def format(self, x: Generator) -> str:
        return f'{self.tag} {x.name}'

    def parse(self, text: str) -> Generator:
        tag, _, name = text.partition(' ')
        if tag != self.tag or name not in self.by_name:
            raise ValueError(f"Unknown generator {text!r}")
        return self.by_name[name]


def swap_pair_collection() -> FiniteCollection:
    """Two binary generators exchanged by the transposition (a free S_2 orbit)"""
    return FiniteCollection(
        [Generator('l', 2), Generator('r', 2)],
        {('l', (2, 1)): 'r', ('r', (2, 1)): 'l'})


# ---------------------------------------------------------------- decorated trees

def check_decorated(collection: SCollection, e: LabeledTree) -> LabeledTree:
    """Every decoration's arity must match its vertex valency"""
    tk.validate(e)
    if isinstance(collection, UnitCollection):
        return e
    for address, node in tk.iter_vertices(e):
        if node.dec is None or collection.arity_of(node.dec) != node.valency:
            raise MalformedTreeError(
                f"Decoration {node.dec!r} at {address} does not match valency {node.valency}")
    return e


def canonical_decorated(collection: SCollection, e: LabeledTree) -> CanonicalTreeCode:
    """Code of the class of e under non-planar isomorphisms twisting decorations"""
    canon = tk.canonical_form(e, collection.format, collection.act_for_canon)
    return CanonicalTreeCode(tk.render(canon, collection.format).encode('utf-8'))


def free_compose(base: LabeledTree, parts: Sequence[LabeledTree]) -> LabeledTree:
    """Composition in Free(X): graft the underlying trees, decorations ride along"""
    return tk.graft(base, parts)


def counit(O: OperadInstance, e: LabeledTree) -> Any:
    """Pi: Free(O) -> O, composing the tree of elements recursively"""
    if e is TRIVIAL:
        return O.unit()

    def planar(node: Node) -> Any:
        parts = [O.unit() if isinstance(c, Leaf) else planar(c) for c in node.children]
        return O.compose(node.dec, parts)

    result = planar(e)
    labels = tk.leaves(e)
    position = {label: p for p, label in enumerate(labels, 1)}
    sigma = tuple(position[j] for j in range(1, len(labels) + 1))
    return O.act(result, sigma)


class FreeOperad(OperadInstance):
    """Free(X) over a collection, enumerated on trees with at most max_vertices vertices"""

    trivial_action = False

    def __init__(self, collection: SCollection, max_vertices: int = 3, min_valency: int = 0):
        self.collection = collection
        self.max_vertices = max_vertices
        self.min_valency = min_valency
        self.name = f'free[{collection.tag}]'
        self.tag = collection.tag

    def decorations(self, shape: LabeledTree) -> Iterable[LabeledTree]:
        """All decorated trees over one shape"""
        if shape is TRIVIAL:
            yield TRIVIAL
            return
        vertices = list(tk.iter_vertices(shape))
        choices = [self.collection.elements(node.valency) for _, node in vertices]
        for combo in itertools.product(*choices):
            tree = shape
            for (address, node), dec in sorted(zip(vertices, combo), key=lambda p: -len(p[0][0])):
                current = tk.get_at(tree, address)
                tree = tk.replace_at(tree, address, Node(current.children, dec, current.length))
            yield tree

    def elements(self, n: int) -> List[Any]:
        seen = {}
        for shape in tk.enumerate_shapes(n, self.max_vertices, self.min_valency):
            for e in self.decorations(shape):
                seen.setdefault(self.key(e), e)
        return [seen[k] for k in sorted(seen)]

    def arity_of(self, x: LabeledTree) -> int:
        return tk.arity(x)

    def act(self, x: LabeledTree, sigma: Perm) -> LabeledTree:
        return tk.act(x, sigma)

    def compose(self, x: LabeledTree, parts: Sequence[LabeledTree]) -> LabeledTree:
        return free_compose(x, parts)

    def unit(self) -> LabeledTree:
        return TRIVIAL

    def key(self, x: LabeledTree) -> CanonicalTreeCode:
        return canonical_decorated(self.collection, x)

    def grade(self, x: LabeledTree) -> int:
        return tk.vertex_count(x)

    def format(self, x: LabeledTree) -> str:
        return tk.render(x, self.collection.format)

    def parse(self, text: str) -> LabeledTree:
        return check_decorated(self.collection, tk.parse_tree(text, self.collection.parse))


def tree_operad(max_vertices: int = 3) -> FreeOperad:
    op = FreeOperad(UnitCollection(), max_vertices)
    op.name = 'tree'
    return op


# ---------------------------------------------------------------- axiom checking

@dataclass(frozen=True, order=True)
class Violation:
    check: str
    tuple: Tuple[str, ...]
    status: str = 'FAIL'

    def to_record(self) -> Dict[str, Any]:
        return {'check': self.check, 'tuple': list(self.tuple), 'status': self.status}


@dataclass
class AxiomBounds:
    """max_grade bounds the summed grade of every checked tuple, None checks all of them"""
    max_arity: int = 3
    max_grade: Optional[int] = None
    budget: int = 200_000
    workers: int = 1


@dataclass
class AxiomReport:
    instance: str
    checked: int = 0
    violations: List[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_records(self) -> List[Dict[str, Any]]:
        return [v.to_record() for v in self.violations]

    def to_jsonl(self) -> str:
        return '\n'.join(json.dumps(r, separators=(',', ':'), sort_keys=True) for r in self.to_records())


class _Memo:
    """Keys and partial compositions of one instance, computed once and shared by the families"""

    def __init__(self, O: OperadInstance):
        self.O = O
        self.keys: Dict[Any, Hashable] = {}
        self.partials: Dict[Tuple[Any, int, Any], Any] = {}
        self.plain_equal = type(O).equal is SCollection.equal

    def key(self, x: Any) -> Hashable:
        try:
            return self.keys[x]
        except KeyError:
            k = self.keys[x] = self.O.key(x)
            return k
        except TypeError:
            return self.O.key(x)

    def equal(self, x: Any, y: Any) -> bool:
        if not self.plain_equal:
            return self.O.equal(x, y)
        return self.key(x) == self.key(y)

    def partial(self, x: Any, i: int, y: Any) -> Any:
        try:
            return self.partials[x, i, y]
        except KeyError:
            z = self.partials[x, i, y] = self.O.partial(x, i, y)
            return z
        except TypeError:
            return self.O.partial(x, i, y)


def _pool(O: OperadInstance, max_arity: int) -> Dict[int, List[Any]]:
    return {n: O.elements(n) for n in range(0, max_arity + 1)}


def _by_grade(O: OperadInstance, pool: Dict[int, List[Any]]) -> Dict[int, Dict[int, List[Any]]]:
    out: Dict[int, Dict[int, List[Any]]] = {}
    for n, xs in pool.items():
        graded: Dict[int, List[Any]] = {}
        for x in xs:
            graded.setdefault(O.grade(x), []).append(x)
        out[n] = graded
    return out


def _graded_tuples(graded: Dict[int, Dict[int, List[Any]]], arities: Sequence[int],
                   max_grade: Optional[int]) -> Iterable[Tuple[Any, ...]]:
    """Tuples with the given arities whose grades sum to at most max_grade"""
    levels = [sorted(graded.get(n, {}).items()) for n in arities]
    for combo in itertools.product(*levels):
        if max_grade is None or sum(g for g, _ in combo) <= max_grade:
            yield from itertools.product(*(xs for _, xs in combo))


def _adjacent_transpositions(n: int) -> List[Perm]:
    out = []
    for j in range(1, n):
        sigma = list(range(1, n + 1))
        sigma[j - 1], sigma[j] = sigma[j], sigma[j - 1]
        out.append(tuple(sigma))
    return out


def _check_family(O: OperadInstance, family: str, pool: Dict[int, List[Any]], max_arity: int,
                  max_grade: Optional[int] = None, memo: Optional[_Memo] = None) -> Tuple[int, List[Violation]]:
    memo = memo or _Memo(O)
    graded = _by_grade(O, pool)
    fmt = O.format
    eq = memo.equal
    partial = memo.partial
    checked = 0
    bad: List[Violation] = []

    def record(ok: bool, *items: str):
        nonlocal checked
        checked += 1
        if not ok:
            bad.append(Violation(family, tuple(items)))

    if family == 'unit':
        u = O.unit()
        for n, xs in pool.items():
            for x in xs:
                record(eq(O.compose(u, [x]), x), fmt(x), 'left')
                record(eq(O.compose(x, [u] * n), x), fmt(x), 'right')
    elif family == 'action':
        # adjacent transpositions generate S_n, so tau ranges over them only
        for n, xs in pool.items():
            perms = list(itertools.permutations(range(1, n + 1)))
            generators = _adjacent_transpositions(n)
            for x in xs:
                record(eq(O.act(x, identity(n)), x), fmt(x), 'id')
                for sigma in perms:
                    moved = O.act(x, sigma)
                    for tau in generators:
                        lhs = O.act(moved, tau)
                        rhs = O.act(x, compose_perms(sigma, tau))
                        record(eq(lhs, rhs), fmt(x), str(sigma), str(tau))
    elif family == 'sequential':
        # u o_i (v o_j w) = (u o_i v) o_{i-1+j} w
        for k in range(1, max_arity + 1):
            for l in range(1, max_arity + 2 - k):
                for m in range(0, max_arity + 3 - k - l):
                    for u, v, w in _graded_tuples(graded, (k, l, m), max_grade):
                        for i in range(1, k + 1):
                            for j in range(1, l + 1):
                                lhs = partial(u, i, partial(v, j, w))
                                rhs = partial(partial(u, i, v), i - 1 + j, w)
                                record(eq(lhs, rhs), fmt(u), fmt(v), fmt(w), f'i={i}', f'j={j}')
    elif family == 'parallel':
        # (u o_i v) o_{k-1+l} w = (u o_k w) o_i v  for i < k
        for n in range(2, max_arity + 1):
            for l in range(0, max_arity + 2 - n):
                for m in range(0, max_arity + 3 - n - l):
                    for u, v, w in _graded_tuples(graded, (n, l, m), max_grade):
                        for i in range(1, n + 1):
                            for k in range(i + 1, n + 1):
                                lhs = partial(partial(u, i, v), k - 1 + l, w)
                                rhs = partial(partial(u, k, w), i, v)
                                record(eq(lhs, rhs), fmt(u), fmt(v), fmt(w), f'i={i}', f'k={k}')
    elif family == 'equivariance':
        # (u.sigma) o_i v = (u o_{sigma(i)} v).(sigma o_i id)
        for n in range(1, max_arity + 1):
            perms = list(itertools.permutations(range(1, n + 1)))
            for m in range(0, max_arity + 2 - n):
                for u, v in _graded_tuples(graded, (n, m), max_grade):
                    for sigma in perms:
                        moved = O.act(u, sigma)
                        for i in range(1, n + 1):
                            lhs = partial(moved, i, v)
                            rhs = O.act(partial(u, sigma[i - 1], v), block_insert(sigma, i, m))
                            record(eq(lhs, rhs), fmt(u), fmt(v), str(sigma), f'i={i}')
    else:
        raise ValueError(f"Unknown axiom family {family!r}")
    return checked, bad


AXIOM_FAMILIES = ('unit', 'action', 'sequential', 'parallel', 'equivariance')


def _count(graded: Dict[int, Dict[int, List[Any]]], arities: Sequence[int], max_grade: Optional[int]) -> int:
    levels = [[(g, len(xs)) for g, xs in graded.get(n, {}).items()] for n in arities]
    total = 0
    for combo in itertools.product(*levels):
        if max_grade is None or sum(g for g, _ in combo) <= max_grade:
            size = 1
            for _, s in combo:
                size *= s
            total += size
    return total


def estimate_tuples(O: OperadInstance, max_arity: int, max_grade: Optional[int] = None,
                    pool: Optional[Dict[int, List[Any]]] = None) -> int:
    """Rough count of tuples check_axioms would visit, used for the budget guard"""
    graded = _by_grade(O, pool if pool is not None else _pool(O, max_arity))
    total = 0
    for k in range(1, max_arity + 1):
        for l in range(0, max_arity + 2 - k):
            for m in range(0, max_arity + 3 - k - l):
                total += _count(graded, (k, l, m), max_grade) * k * max(l, 1) * 2
    for n, by_grade in graded.items():
        s = sum(len(xs) for xs in by_grade.values())
        total += s * (len(list(itertools.permutations(range(n)))) * max(n - 1, 1) + 2)
    return total


def check_axioms(O: OperadInstance, bounds: Optional[AxiomBounds] = None,
                 progress: bool = False) -> AxiomReport:
    """Exhaustively verify unit, action, sequential, parallel and equivariance identities"""
    bounds = bounds or AxiomBounds()
    pool = _pool(O, bounds.max_arity)
    estimate = estimate_tuples(O, bounds.max_arity, bounds.max_grade, pool)
    if estimate > bounds.budget:
        raise BudgetExceededError(
            f"Axiom check for {O.name} needs about {estimate:,} tuples (budget {bounds.budget:,})")
    logger.info("Checking axioms of %s (about %d tuples)", O.name, estimate)

    report = AxiomReport(O.name)
    if bounds.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=bounds.workers) as ex:
            futures = [ex.submit(_check_family, O, f, pool, bounds.max_arity, bounds.max_grade)
                       for f in AXIOM_FAMILIES]
            results = [f.result() for f in futures]
    else:
        memo = _Memo(O)
        results = [_check_family(O, f, pool, bounds.max_arity, bounds.max_grade, memo)
                   for f in tqdm(AXIOM_FAMILIES, desc=f"Axioms {O.name}", disable=not progress, leave=False)]
    for checked, bad in results:
        report.checked += checked
        report.violations.extend(bad)
    report.violations.sort()
    if report.violations:
        logger.warning("%s: %d axiom violations", O.name, len(report.violations))
    return report
