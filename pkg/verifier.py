#!/usr/bin/env python3
"""
Verifier - bounded checks that confront the rewriting engine with independent oracles

Every check returns a VerificationReport. Work is split into cells
(per arity and genus, per instance, per sample batch) that run in a process
pool sized by worker_count(); cell results are merged in cell order so the
JSON document only depends on (check, Bounds, seed).
"""

import concurrent.futures
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from tqdm import tqdm

import rewrite_pushout as rp
import surface_instances as si
import tree_kernel as tk
from errors import BudgetExceededError, UnstableSkeletonError
from operad_core import AxiomBounds, FreeOperad, check_axioms, swap_pair_collection, tree_operad
from rewrite_pushout import P_SIDE, Q_SIDE, Decision, Tagged
from tree_kernel import TRIVIAL, LabeledTree, Leaf, Node
from w_construction import (DEFAULT_LENGTHS, WOperad, hd_normalize, is_w_protected, sample_w_elements,
                            w_code, w_contract, w_partial)

logger = logging.getLogger(__name__)

PASS = 'PASS'
FAIL = 'FAIL'
UNDECIDED = 'UNDECIDED'
SKIPPED = 'SKIPPED'


@dataclass(frozen=True)
class Bounds:
    max_arity: int = 4
    max_genus: int = 3
    max_vertices: int = 5
    modulus_grid: Tuple[Fraction, ...] = si.DEFAULT_GRID
    length_grid: Tuple[Fraction, ...] = DEFAULT_LENGTHS
    trial_count: int = 100
    seed: int = 0
    budget: int = 20000
    # secondary bounds of the heavier checks
    axiom_max_arity: int = 4
    axiom_tree_max_arity: int = 3
    axiom_max_vertices: int = 3
    axiom_budget: int = 5_000_000
    canon_max_arity: int = 3
    canon_max_vertices: int = 7
    split_max_vertices: int = 3
    w_max_arity: int = 3
    w_max_vertices: int = 3
    w_max_genus: int = 1
    max_nodes: int = 1
    word_starts: int = 1000
    hd_samples: int = 1000
    confluence_starts: int = 200

    def __post_init__(self):
        if self.max_arity < 1 or self.max_vertices < 1:
            raise ValueError("max_arity and max_vertices must be >= 1")
        if self.max_genus < 0 or self.trial_count < 1 or self.budget < 1:
            raise ValueError("max_genus must be >= 0, trial_count and budget >= 1")
        grid = tuple(sorted({Fraction(a) for a in self.modulus_grid}))
        lengths = tuple(sorted({Fraction(t) for t in self.length_grid}))
        if not grid or grid[0] < 0:
            raise ValueError("The modulus grid must be a nonempty set of rationals >= 0")
        if not lengths or lengths[0] < 0 or lengths[-1] > 1:
            raise ValueError("Edge lengths must lie in [0, 1]")
        object.__setattr__(self, 'modulus_grid', grid)
        object.__setattr__(self, 'length_grid', lengths)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d['modulus_grid'] = [str(a) for a in self.modulus_grid]
        d['length_grid'] = [str(t) for t in self.length_grid]
        return d


@dataclass
class VerificationReport:
    check: str
    bounds: Bounds
    status: str = PASS
    counts: Dict[str, int] = field(default_factory=dict)
    cells: List[Dict[str, Any]] = field(default_factory=list)
    witness: Optional[Dict[str, Any]] = None
    skipped: List[Dict[str, Any]] = field(default_factory=list)
    elapsed: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self, timing: bool = False) -> Dict[str, Any]:
        d = {'check': self.check, 'status': self.status, 'bounds': self.bounds.to_dict(),
             'counts': self.counts, 'cells': self.cells, 'witness': self.witness, 'skipped': self.skipped}
        if timing and self.elapsed is not None:
            d['elapsed'] = round(self.elapsed, 3)
        return d

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, separators=(',', ':'))

    def cells_frame(self) -> pd.DataFrame:
        rows = [{k: (json.dumps(v) if isinstance(v, (dict, list)) else v) for k, v in c.items()}
                for c in self.cells]
        return pd.DataFrame(rows)

    def export_cells(self, output_file: str) -> None:
        self.cells_frame().to_csv(output_file, index=False)
        logger.info("Cell table exported to %s (%d rows)", output_file, len(self.cells))


def worker_count() -> int:
    """OPERAD_FORGE_THREADS caps the process pool; defaults to the available cores"""
    raw = os.environ.get('OPERAD_FORGE_THREADS')
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("Ignoring OPERAD_FORGE_THREADS=%r (not an integer)", raw)
    return os.cpu_count() or 1


def _announce(row: Dict[str, Any], progress: bool) -> Dict[str, Any]:
    if progress and row['status'] in (FAIL, UNDECIDED):
        tqdm.write(f"cell {row['cell']}: {row['status']}", file=sys.stderr)
    return row


def _run_cells(worker: Callable[..., Dict[str, Any]], jobs: Sequence[tuple],
               progress: bool, desc: str) -> List[Dict[str, Any]]:
    workers = min(worker_count(), len(jobs))
    results = []
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(worker, *job) for job in jobs]
            for future in tqdm(concurrent.futures.as_completed(futures), total=len(futures),
                               desc=desc, file=sys.stderr, disable=not progress, leave=False):
                results.append(_announce(future.result(), progress))
    else:
        for job in tqdm(jobs, desc=desc, file=sys.stderr, disable=not progress, leave=False):
            results.append(_announce(worker(*job), progress))
    return sorted(results, key=lambda r: r['cell'])


def _merge(report: VerificationReport, rows: List[Dict[str, Any]]) -> VerificationReport:
    """Fold cell rows into the report: worst status wins, smallest witness is kept"""
    witnesses = []
    for row in rows:
        witness = row.pop('witness', None)
        if witness:
            witnesses.append(witness)
        if row['status'] == SKIPPED:
            report.skipped.append({'cell': row['cell'], 'reason': row.get('reason', '')})
        report.cells.append(row)
        for key, value in row.items():
            if isinstance(value, int) and not isinstance(value, bool) and key != 'cell':
                report.counts[key] = report.counts.get(key, 0) + value
    statuses = {row['status'] for row in rows}
    report.status = FAIL if FAIL in statuses else UNDECIDED if UNDECIDED in statuses else PASS
    if witnesses:
        report.witness = min(witnesses, key=lambda w: (w.get('vertices', 0), w.get('element', '')))
    return report


def _witness(reason: str, element: str = '', vertices: int = 0, **extra) -> Dict[str, Any]:
    return dict(reason=reason, element=element, vertices=vertices, **extra)


def _status(failures: List[Dict[str, Any]]) -> Tuple[str, Optional[Dict[str, Any]]]:
    if not failures:
        return PASS, None
    return FAIL, min(failures, key=lambda w: (w['vertices'], w['element']))


# ---------------------------------------------------------------- axioms

def axiom_instances(b: Bounds) -> List[Tuple[Any, int, int]]:
    """(instance, max arity, max grade); surfaces are graded by genus, trees and W by vertex count"""
    grid = b.modulus_grid
    weight = b.max_nodes + 1
    surfaces = [si.FramedSurfaces(b.max_genus, grid), si.NodalAnnuli(grid),
                si.NodalFramed(b.max_genus, weight, grid)]
    bases = [tree_operad(1), FreeOperad(swap_pair_collection(), 1), si.FramedSurfaces(b.w_max_genus, grid),
             si.NodalAnnuli(grid), si.NodalFramed(b.w_max_genus, weight, grid)]
    trees = [tree_operad(b.axiom_max_vertices), FreeOperad(swap_pair_collection(), b.axiom_max_vertices)]
    trees += [WOperad(base, b.length_grid, b.axiom_max_vertices) for base in bases]
    return ([(s, b.axiom_max_arity, b.max_genus) for s in surfaces]
            + [(t, b.axiom_tree_max_arity, b.axiom_max_vertices) for t in trees])


def _axiom_cell(index: int, instance, max_arity: int, max_grade: int, budget: int) -> Dict[str, Any]:
    row = {'cell': [index], 'instance': instance.name}
    try:
        report = check_axioms(instance, AxiomBounds(max_arity=max_arity, max_grade=max_grade, budget=budget))
    except BudgetExceededError as e:
        row.update(status=UNDECIDED, reason=str(e))
        return row
    row.update(status=PASS if report.passed else FAIL, tuples=report.checked, violations=len(report.violations))
    if report.violations:
        first = report.violations[0]
        row['witness'] = _witness(f'{first.check} identity fails', ' | '.join(first.tuple))
    return row


def verify_axioms(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(i, inst, arity, grade, b.axiom_budget)
            for i, (inst, arity, grade) in enumerate(axiom_instances(b))]
    return _merge(VerificationReport('axioms', b), _run_cells(_axiom_cell, jobs, progress, 'Axioms'))


# ---------------------------------------------------------------- canonical codes vs isomorphism search

def _nx_tree(t: LabeledTree) -> nx.DiGraph:
    g = nx.DiGraph()
    counter = itertools.count()

    def add(slot, kind: str) -> int:
        me = next(counter)
        if isinstance(slot, Leaf):
            g.add_node(me, key=f'leaf:{slot.label}')
            return me
        g.add_node(me, key=kind)
        for child in slot.children:
            g.add_edge(me, add(child, 'vertex'))
        return me

    if t is TRIVIAL:
        g.add_node(0, key='trivial')
    else:
        add(t, 'root')
    return g


def _isomorphic(g1: nx.DiGraph, g2: nx.DiGraph) -> bool:
    return nx.is_isomorphic(g1, g2, node_match=lambda x, y: x['key'] == y['key'])


def planar_orbit(t: LabeledTree) -> List[LabeledTree]:
    """Every planar presentation of t (all child orders at every vertex)"""
    if t is TRIVIAL:
        return [t]

    def orbit(slot) -> List[Any]:
        if isinstance(slot, Leaf):
            return [slot]
        child_orbits = [orbit(c) for c in slot.children]
        out = []
        for choice in itertools.product(*child_orbits):
            for perm in itertools.permutations(choice):
                out.append(Node(tuple(perm)))
        return out

    return orbit(t)


def _shuffle(t: LabeledTree, rng: np.random.Generator) -> LabeledTree:
    if t is TRIVIAL:
        return t

    def go(slot):
        if isinstance(slot, Leaf):
            return slot
        kids = [go(c) for c in slot.children]
        return Node(tuple(kids[int(j)] for j in rng.permutation(len(kids))))

    return go(t)


def _orbit_size(t: LabeledTree) -> int:
    size = 1
    for _, node in tk.iter_vertices(t):
        for k in range(2, node.valency + 1):
            size *= k
    return size


def _canon_cell(arity: int, max_vertices: int, seed: int) -> Dict[str, Any]:
    rng = np.random.default_rng([seed, arity])
    shapes = tk.enumerate_shapes(arity, max_vertices)
    codes = [tk.canonicalize(s) for s in shapes]
    failures = []
    if len(set(codes)) != len(codes):
        failures.append(_witness('two classes share a code', str(codes[0])))
    buckets: Dict[str, List[Tuple[Any, nx.DiGraph]]] = {}
    for shape, code in zip(shapes, codes):
        g = _nx_tree(shape)
        buckets.setdefault(nx.weisfeiler_lehman_graph_hash(g, node_attr='key'), []).append((code, g))
    for members in buckets.values():
        for (c1, g1), (c2, g2) in itertools.combinations(members, 2):
            if _isomorphic(g1, g2):
                failures.append(_witness('isomorphic trees enumerated twice', f'{c1} ~ {c2}'))
    presentations = 0
    for shape, code in zip(shapes, codes):
        if _orbit_size(shape) <= 120:
            variants = planar_orbit(shape)
        else:
            variants = [_shuffle(shape, rng) for _ in range(20)]
        presentations += len(variants)
        for v in variants:
            if tk.canonicalize(v) != code:
                failures.append(_witness('presentations of one class get different codes',
                                         tk.render(v), tk.vertex_count(v), expected=str(code)))
                break
    status, witness = _status(failures)
    return {'cell': [arity], 'status': status, 'classes': len(shapes), 'presentations': presentations,
            'mismatches': len(failures), 'witness': witness}


def verify_canonicalization(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(n, b.canon_max_vertices, b.seed) for n in range(0, b.canon_max_arity + 1)]
    return _merge(VerificationReport('canonicalization', b), _run_cells(_canon_cell, jobs, progress, 'Canonical codes'))


# ---------------------------------------------------------------- free operad vs split structures

def glue_split(e: LabeledTree) -> si.SplitStructure:
    """G: a tree of Fr~ pieces is glued along its internal edges, which become the seams"""
    for _, node in tk.iter_vertices(e):
        if node.dec.kind not in (si.SMOOTH, si.ANNULUS):
            raise ValueError(f"{si.format_surface(node.dec)} is not a piece of Fr~")
    return si.SplitStructure(e)


def _total_genus(e: LabeledTree) -> int:
    return sum(si.piece_of(n.dec).genus for _, n in tk.iter_vertices(e))


def _whole_surface(s: si.SplitStructure, arity: int, genus: int) -> si.DualGraph:
    pieces = [si.piece_of(n.dec) for _, n in tk.iter_vertices(s.pieces)]
    if all(p.is_annulus for p in pieces):
        return si.bare_annulus(sum(p.modulus for p in pieces))
    return si.DualGraph(si.component(genus, range(1, arity + 1)))


def _split_cell(arity: int, b: Bounds) -> Dict[str, Any]:
    """Free operad elements glued by G against split structures cut from the surface itself"""
    free = FreeOperad(si.FramedSurfaces(b.max_genus, b.modulus_grid), b.split_max_vertices, min_valency=1)
    failures = []
    glued: Dict[Any, LabeledTree] = {}
    for shape in tk.enumerate_shapes(arity, b.split_max_vertices, min_valency=1):
        if shape is TRIVIAL:
            continue
        for e in free.decorations(shape):
            if _total_genus(e) > b.max_genus:
                continue
            key = free.key(glue_split(e).pieces)
            if key in glued:
                failures.append(_witness('G is not injective', free.format(e), tk.vertex_count(e)))
            glued[key] = e

    cut: Dict[Any, si.SplitStructure] = {}
    degenerate = 0
    for genus in range(b.max_genus + 1):
        for s in si.enumerate_splittings(arity, genus, b.split_max_vertices, b.modulus_grid):
            key = free.key(s.pieces)
            text = tk.render(s.pieces, si.format_surface)
            if key in cut:
                failures.append(_witness('one split structure cut twice', text, tk.vertex_count(s.pieces)))
            cut[key] = s
            degenerate += 1 if s.coinciding else 0
            if si.erase_seams(s) != _whole_surface(s, arity, genus):
                failures.append(_witness('erasing the seams does not give back the surface', text,
                                         tk.vertex_count(s.pieces)))
    for key in sorted(set(cut) - set(glued)):
        s = cut[key]
        failures.append(_witness('split structure not reached by G', tk.render(s.pieces, si.format_surface),
                                 tk.vertex_count(s.pieces)))
    for key in sorted(set(glued) - set(cut)):
        e = glued[key]
        failures.append(_witness('G leaves the split structures', free.format(e), tk.vertex_count(e)))
    status, witness = _status(failures)
    return {'cell': [arity], 'status': status, 'free': len(glued), 'split': len(cut),
            'coinciding_seams': degenerate, 'witness': witness}


def verify_free_split_bijection(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(n, b) for n in range(1, b.max_arity + 1)]
    return _merge(VerificationReport('free-split', b), _run_cells(_split_cell, jobs, progress, 'Free vs split'))


# ---------------------------------------------------------------- geometric pushout

def pushout_trees(sys_: rp.PushoutSystem, arity: int, genus: int, max_vertices: int) -> List[Node]:
    """Trees over P + Q of exact arity and genus with no two adjacent vertices on the same side.

    Every tree contracts (~1) to such a tree with no more vertices, so these
    reach every class the full enumeration reaches.
    """
    pools = {}
    out = []
    for shape in tk.enumerate_shapes(arity, max_vertices, min_valency=1):
        if shape is TRIVIAL:
            continue
        vertices = list(tk.iter_vertices(shape))
        index = {address: k for k, (address, _) in enumerate(vertices)}
        choice: List[Tagged] = [None] * len(vertices)

        def assign(k: int, genus_left: int):
            if k == len(vertices):
                if genus_left == 0:
                    tree = shape
                    for (address, _), dec in sorted(zip(vertices, choice), key=lambda p: -len(p[0][0])):
                        current = tk.get_at(tree, address)
                        tree = tk.replace_at(tree, address, Node(current.children, dec))
                    out.append(tree)
                return
            address, node = vertices[k]
            parent_side = choice[index[address[:-1]]].side if address else None
            pool = pools.setdefault(node.valency, sys_.collection.elements(node.valency))
            for dec in pool:
                if dec.side != parent_side and dec.piece.genus <= genus_left:
                    choice[k] = dec
                    assign(k + 1, genus_left - dec.piece.genus)

        assign(0, genus)
    return out


def tree_of_graph(g: si.DualGraph) -> Node:
    """Inverse witness: smooth components become Fr~ pieces, every node a nodal annulus"""
    if g.is_bare_annulus:
        return tk.corolla(1, Tagged(P_SIDE, si.annulus(g.modulus or 0)))
    nodal = Tagged(Q_SIDE, si.NODAL_ANNULUS)

    def below(d: si.Component) -> Node:
        if si.is_cap(d, False):
            return Node((Leaf(d.inputs[0]),), nodal)
        return Node((piece(d),), nodal)

    def piece(c: si.Component) -> Node:
        children = [Leaf(l) for l in c.inputs] + [below(d) for d in c.nodes]
        return Node(tuple(children), Tagged(P_SIDE, si.smooth(c.genus, len(children))))

    if si.is_cap(g.root, True):
        return below(g.root.nodes[0])
    return piece(g.root)


def _image_vertices(sys_: rp.PushoutSystem, e: Node) -> int:
    return sum(1 for _, n in tk.iter_vertices(e) if sys_.image_of(n.dec) is not None)


def _pushout_cell(arity: int, genus: int, b: Bounds) -> Dict[str, Any]:
    sys_ = rp.surface_pushout_system(b.modulus_grid, b.max_genus)
    fmt = sys_.format
    failures = []
    normal: Dict[Any, Node] = {}
    trees = 0
    for e in pushout_trees(sys_, arity, genus, b.max_vertices):
        trees += 1
        try:
            nf, steps = rp.normalize(sys_, e)
        except BudgetExceededError as err:
            return {'cell': [arity, genus], 'status': UNDECIDED, 'reason': str(err)}
        if steps > tk.vertex_count(e) + _image_vertices(sys_, e):
            failures.append(_witness('step count exceeds the termination measure', fmt(e), tk.vertex_count(e)))
        normal.setdefault(sys_.code(nf), nf)

    images: Dict[si.DualGraph, Any] = {}
    for code, nf in sorted(normal.items()):
        g = si.erase_seams(nf)
        if g in images:
            failures.append(_witness('two normal forms erase to one dual graph', fmt(nf), tk.vertex_count(nf),
                                     other=str(images[g])))
        images[g] = code
        if (g.arity, g.genus) != (arity, genus):
            failures.append(_witness('erasing seams changed arity or genus', fmt(nf), tk.vertex_count(nf)))

    moduli = si.modulus_closure(b.modulus_grid, b.max_vertices)
    graphs = si.stable_dual_graphs(arity, genus, b.max_vertices, moduli)
    for g in graphs:
        if g not in images:
            failures.append(_witness('stable dual graph with no normal form', si.format_graph(g), si.graph_weight(g)))
            continue
        tree = tree_of_graph(g)
        if si.erase_seams(tree) != g or sys_.code(tree) != images[g]:
            failures.append(_witness('inverse map does not return the normal form', si.format_graph(g),
                                     si.graph_weight(g)))
    for g in set(images) - set(graphs):
        failures.append(_witness('normal form outside the stable dual graphs', si.format_graph(g),
                                 si.graph_weight(g)))
    status, witness = _status(failures)
    return {'cell': [arity, genus], 'status': status, 'trees': trees, 'normal_forms': len(normal),
            'dual_graphs': len(graphs), 'witness': witness,
            'pool': [fmt(normal[c]) for c in sorted(normal)]}


def _composition_failures(b: Bounds, pool: List[str]) -> Tuple[int, List[Dict[str, Any]]]:
    """erase_seams(nf(x o_i y)) must equal erase_seams(x) o_i erase_seams(y) in NodFr~"""
    sys_ = rp.surface_pushout_system(b.modulus_grid, b.max_genus)
    trees = [sys_.parse(text) for text in pool]
    rng = np.random.default_rng(b.seed)
    failures = []
    if not trees:
        return 0, failures
    for _ in range(b.trial_count):
        x = trees[int(rng.integers(len(trees)))]
        y = trees[int(rng.integers(len(trees)))]
        i = int(rng.integers(tk.arity(x))) + 1
        nf, _ = rp.normalize(sys_, tk.partial_graft(x, i, y))
        lhs = si.erase_seams(nf)
        rhs = si.nodfr_partial(si.erase_seams(x), i, si.erase_seams(y))
        if lhs != rhs:
            element = f'{sys_.format(x)} o{i} {sys_.format(y)}'
            failures.append(_witness('erase_seams does not commute with composition', element,
                                     tk.vertex_count(x) + tk.vertex_count(y)))
    return b.trial_count, failures


def verify_geometric_pushout(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(m, g, b) for m in range(1, b.max_arity + 1) for g in range(0, b.max_genus + 1)]
    rows = _run_cells(_pushout_cell, jobs, progress, 'Pushout cells')
    pool = []
    for row in rows:
        pool.extend(row.pop('pool', []))
    report = _merge(VerificationReport('geometric-pushout', b), rows)
    for row in rows:
        if row['status'] != UNDECIDED and row['normal_forms'] != row['dual_graphs']:
            report.status = FAIL
    if report.status != UNDECIDED:
        samples, failures = _composition_failures(b, pool)
        report.counts['composition_samples'] = samples
        if failures:
            report.status = FAIL
            report.witness = report.witness or min(failures, key=lambda w: (w['vertices'], w['element']))
    return report


# ---------------------------------------------------------------- W-level colimit

def _graph_text(g: si.DualGraph) -> str:
    return si.format_graph(g)


def protected_image(e: LabeledTree) -> LabeledTree:
    """Tags forgotten, every piece replaced by its NodFr~ dual graph, lengths kept"""
    if e is TRIVIAL:
        return e

    def go(slot):
        if isinstance(slot, Leaf):
            return slot
        return Node(tuple(go(c) for c in slot.children), si.graph_of_piece(si.piece_of(slot.dec)), slot.length)

    return go(e)


def _graph_w_code(e: LabeledTree):
    return tk.CanonicalTreeCode(tk.render(tk.canonical_form(e, _graph_text, si.act_graph), _graph_text).encode('utf-8'))


def _moduli_in(e: LabeledTree, grid: Sequence[Fraction]) -> bool:
    return all(n.dec.modulus is None or n.dec.modulus in grid for _, n in tk.iter_vertices(e))


def _w_decorations(shape: Node, pools: Dict[int, List[Any]], lengths: Callable, max_genus: int, max_nodes: int):
    """Decorate a shape from per-valency pools; lengths(parent_dec, dec) lists admissible edge lengths"""
    vertices = list(tk.iter_vertices(shape))
    index = {address: k for k, (address, _) in enumerate(vertices)}
    choice: List[Any] = [None] * len(vertices)
    length: List[Any] = [None] * len(vertices)

    def piece(dec):
        return si.piece_of(dec) if not isinstance(dec, si.DualGraph) else None

    def genus_of(dec) -> int:
        return dec.genus if isinstance(dec, si.DualGraph) else piece(dec).genus

    def assign(k: int, genus_left: int, nodes_left: int):
        if k == len(vertices):
            tree = shape
            for (address, _), dec, l in sorted(zip(vertices, choice, length), key=lambda p: -len(p[0][0])):
                current = tk.get_at(tree, address)
                tree = tk.replace_at(tree, address, Node(current.children, dec, l))
            yield tree
            return
        address, node = vertices[k]
        parent = choice[index[address[:-1]]] if address else None
        for dec in pools[node.valency]:
            g = genus_of(dec)
            n = 1 if si.piece_kind(dec) == si.NODAL else 0
            if g > genus_left or n > nodes_left:
                continue
            choice[k] = dec
            for l in (lengths(parent, dec) if address else [None]):
                length[k] = l
                yield from assign(k + 1, genus_left - g, nodes_left - n)

    yield from assign(0, max_genus, max_nodes)


def _w_colimit_cell(arity: int, b: Bounds) -> Dict[str, Any]:
    sys_ = rp.surface_pushout_system(b.modulus_grid, b.w_max_genus)
    grid = b.modulus_grid
    failures = []
    tagged_pools = {v: sys_.collection.elements(v) for v in range(1, arity + b.w_max_vertices + 1)}

    def tagged_lengths(parent, dec):
        return [Fraction(1)] if parent.side != dec.side else list(b.length_grid)

    normal: Dict[Any, LabeledTree] = {}
    count = 0
    for shape in tk.enumerate_shapes(arity, b.w_max_vertices, min_valency=1):
        if shape is TRIVIAL:
            continue
        for e in _w_decorations(shape, tagged_pools, tagged_lengths, b.w_max_genus, b.max_nodes):
            count += 1
            nf = rp.w_normalize(sys_, e)
            normal.setdefault(sys_.code(nf), nf)

    images: Dict[Any, Any] = {}
    for code, nf in sorted(normal.items()):
        image = protected_image(nf)
        img_code = _graph_w_code(image)
        if img_code in images:
            failures.append(_witness('two W normal forms have one image', sys_.format(nf), tk.vertex_count(nf)))
        images[img_code] = image
        if not is_w_protected(image):
            failures.append(_witness('W normal form is not protected', sys_.format(nf), tk.vertex_count(nf)))

    fr = si.FramedSurfaces(b.w_max_genus, grid)
    graph_pools = {v: [si.graph_of_piece(p) for p in fr.elements(v)] + ([si.NODE_GRAPH] if v == 1 else [])
                   for v in tagged_pools}
    positive = [t for t in b.length_grid if t > 0]
    protected = set()
    for shape in tk.enumerate_shapes(arity, b.w_max_vertices, min_valency=1):
        if shape is TRIVIAL:
            continue
        for e in _w_decorations(shape, graph_pools, lambda parent, dec: positive, b.w_max_genus, b.max_nodes):
            if is_w_protected(e):
                protected.add(_graph_w_code(e))

    in_range = {c for c, image in images.items() if _moduli_in(image, grid)}
    for c in sorted(protected - in_range):
        failures.append(_witness('protected element with no W normal form', str(c), 0))
    for c in sorted(in_range - protected):
        failures.append(_witness('W normal form outside the protected elements', str(c), 0))

    rng = np.random.default_rng([b.seed, arity])
    nfs = [normal[c] for c in sorted(normal)]
    for _ in range(min(b.trial_count, len(nfs) * len(nfs))):
        x = nfs[int(rng.integers(len(nfs)))]
        y = nfs[int(rng.integers(len(nfs)))]
        i = int(rng.integers(tk.arity(x))) + 1
        lhs = _graph_w_code(protected_image(rp.w_normalize(sys_, w_partial(x, i, y))))
        rhs = _graph_w_code(w_partial(protected_image(x), i, protected_image(y)))
        if lhs != rhs:
            failures.append(_witness('W normal forms do not commute with composition',
                                     f'{sys_.format(x)} o{i} {sys_.format(y)}', tk.vertex_count(x) + tk.vertex_count(y)))
    status, witness = _status(failures)
    return {'cell': [arity], 'status': status, 'trees': count, 'normal_forms': len(normal),
            'protected': len(protected), 'matched': len(in_range & protected), 'witness': witness}


def verify_w_colimit(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(n, b) for n in range(1, b.w_max_arity + 1)]
    return _merge(VerificationReport('w-colimit', b), _run_cells(_w_colimit_cell, jobs, progress, 'W colimit'))


# ---------------------------------------------------------------- Humpty-Dumpty

def _hd_cell(batch: int, size: int, b: Bounds) -> Dict[str, Any]:
    fr = si.FramedSurfaces(b.max_genus, b.modulus_grid)
    samples = sample_w_elements(fr, size, b.seed * 1000 + batch, b.w_max_arity, b.w_max_vertices, b.length_grid)
    failures = []
    for e in samples:
        hd = hd_normalize(e)
        if w_code(hd) != w_code(w_contract(fr, e)):
            failures.append(_witness('hd_normalize differs from w_contract',
                                     tk.render(e, si.format_surface), tk.vertex_count(e)))
        elif w_code(hd_normalize(hd)) != w_code(hd):
            failures.append(_witness('hd_normalize is not idempotent', tk.render(e, si.format_surface),
                                     tk.vertex_count(e)))
    status, witness = _status(failures)
    return {'cell': [batch], 'status': status, 'samples': len(samples), 'mismatches': len(failures),
            'witness': witness}


def _batches(total: int, size: int = 100) -> List[Tuple[int, int]]:
    return [(k, min(size, total - k * size)) for k in range((total + size - 1) // size)]


def verify_hd_identification(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(k, n, b) for k, n in _batches(b.hd_samples)]
    return _merge(VerificationReport('hd', b), _run_cells(_hd_cell, jobs, progress, 'Humpty-Dumpty'))


# ---------------------------------------------------------------- Fr / cap

def _fr_cap_cell(arity: int, genus: int, b: Bounds) -> Dict[str, Any]:
    if (arity, genus) == (1, 0):
        try:
            si.fr_map(si.DualGraph(si.Component(0, (1,)), marked=True))
        except UnstableSkeletonError as e:
            reason = str(e)
        else:
            reason = 'fr_map accepted the unstable skeleton'
        return {'cell': [arity, genus], 'status': SKIPPED, 'skeletons': 0, 'reason': reason}
    skeletons = si.stable_marked_skeletons(arity, genus, b.max_vertices)
    failures = []
    for d in skeletons:
        if si.cap_map(si.fr_map(d)) != d:
            failures.append(_witness('cap(Fr(d)) differs from d', si.format_graph(d), d.node_count + 1))
    status, witness = _status(failures)
    return {'cell': [arity, genus], 'status': status, 'skeletons': len(skeletons), 'witness': witness}


def verify_fr_cap_retract(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(m, g, b) for m in range(1, b.max_arity + 1) for g in range(0, b.max_genus + 1)]
    return _merge(VerificationReport('fr-cap', b), _run_cells(_fr_cap_cell, jobs, progress, 'Fr/cap'))


# ---------------------------------------------------------------- word problem and confluence

def sample_pushout_trees(sys_: rp.PushoutSystem, count: int, seed, b: Bounds) -> List[Node]:
    """Seeded random trees over P + Q within the bounds: uniform shape of arity <= max_arity with at
    most max_vertices vertices, then uniform decorations of genus <= max_genus"""
    rng = np.random.default_rng(seed)
    shapes = [s for n in range(1, b.max_arity + 1)
              for s in tk.enumerate_shapes(n, b.max_vertices, min_valency=1) if s is not TRIVIAL]
    pools: Dict[int, List[Tagged]] = {}
    out = []
    for _ in range(count):
        tree = shapes[int(rng.integers(len(shapes)))]
        for address, node in sorted(tk.iter_vertices(tree), key=lambda p: -len(p[0])):
            pool = pools.setdefault(node.valency, [d for d in sys_.collection.elements(node.valency)
                                                   if d.piece.genus <= b.max_genus])
            current = tk.get_at(tree, address)
            tree = tk.replace_at(tree, address, Node(current.children, pool[int(rng.integers(len(pool)))]))
        out.append(tree)
    return out


def _word_cell(batch: int, size: int, b: Bounds) -> Dict[str, Any]:
    sys_ = rp.surface_pushout_system(b.modulus_grid, b.max_genus)
    starts = sample_pushout_trees(sys_, size, [b.seed, batch], b)
    failures = []
    pairs = undecided = 0
    for k, e in enumerate(starts):
        expected = rp.normal_form(sys_, e)
        members, complete = rp.closure(sys_, e, b.budget)
        if not complete:
            undecided += 1
            continue
        for code, member in sorted(members.items()):
            pairs += 1
            if rp.normal_form(sys_, member) != expected:
                failures.append(_witness('closure member has another normal form', sys_.format(member),
                                         tk.vertex_count(member), start=sys_.format(e)))
        if k + 1 < len(starts):
            other = starts[k + 1]
            decision = rp.equal_in_pushout(sys_, e, other, b.budget)
            pairs += 1
            if decision == Decision.UNDECIDED:
                undecided += 1
            elif (decision == Decision.TRUE) != (expected == rp.normal_form(sys_, other)):
                failures.append(_witness('closure oracle and normal forms disagree',
                                         f'{sys_.format(e)} vs {sys_.format(other)}', tk.vertex_count(e)))
    status, witness = _status(failures)
    if status == PASS and undecided:
        status = UNDECIDED
    return {'cell': [batch], 'status': status, 'starts': len(starts), 'pairs': pairs,
            'undecided': undecided, 'witness': witness}


def verify_word_problem(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(k, n, b) for k, n in _batches(b.word_starts)]
    return _merge(VerificationReport('word-problem', b), _run_cells(_word_cell, jobs, progress, 'Word problem'))


def _confluence_cell(batch: int, size: int, b: Bounds) -> Dict[str, Any]:
    sys_ = rp.surface_pushout_system(b.modulus_grid, b.max_genus)
    starts = sample_pushout_trees(sys_, size, [b.seed, 7919, batch], b)
    failures = []
    for k, e in enumerate(starts):
        report = rp.confluence_sample(sys_, e, b.trial_count, b.seed * 100003 + batch * 1000 + k)
        if not report.passed:
            failures.append(_witness('random rewrite orders reach several codes', report.start,
                                     tk.vertex_count(e), outcomes=report.to_dict()['outcomes']))
    status, witness = _status(failures)
    return {'cell': [batch], 'status': status, 'starts': len(starts), 'trials': len(starts) * b.trial_count,
            'non_confluent': len(failures), 'witness': witness}


def verify_confluence(b: Bounds, progress: bool = False) -> VerificationReport:
    jobs = [(k, n, b) for k, n in _batches(b.confluence_starts, 25)]
    return _merge(VerificationReport('confluence', b), _run_cells(_confluence_cell, jobs, progress, 'Confluence'))


CHECKS: Dict[str, Callable[[Bounds, bool], VerificationReport]] = {
    'axioms': verify_axioms,
    'canonicalization': verify_canonicalization,
    'free-split': verify_free_split_bijection,
    'geometric-pushout': verify_geometric_pushout,
    'w-colimit': verify_w_colimit,
    'hd': verify_hd_identification,
    'fr-cap': verify_fr_cap_retract,
    'word-problem': verify_word_problem,
    'confluence': verify_confluence,
}


def run_check(name: str, b: Bounds, progress: bool = False) -> VerificationReport:
    if name not in CHECKS:
        raise ValueError(f"Unknown check {name!r}; choose from {', '.join(CHECKS)}")
    start = time.perf_counter()
    report = CHECKS[name](b, progress)
    report.elapsed = time.perf_counter() - start
    logger.info("%s: %s in %.1fs", name, report.status, report.elapsed)
    return report
