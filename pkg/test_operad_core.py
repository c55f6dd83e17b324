#!/usr/bin/env python3
"""
Tests for set operads: permutations, the free operad, the counit and the axiom checker
"""

import itertools
import sys
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tree_kernel as tk
from errors import ArityMismatchError, BudgetExceededError, MalformedTreeError
from operad_core import (AxiomBounds, FiniteCollection, FreeOperad, Generator, block_insert, canonical_decorated,
                         check_axioms, check_decorated, compose_perms, counit, estimate_tuples, identity,
                         swap_pair_collection, tree_operad)
from surface_instances import AnnuliMonoid, FramedSurfaces, annulus, parse_surface, smooth
from tree_kernel import Leaf, Node

SMALL_GRID = (Fraction(0), Fraction(1, 2))


class SubtractiveAnnuli(AnnuliMonoid):
    """|a - b| has a unit but is not associative"""

    name = 'subann'

    def compose(self, x, parts):
        return annulus(abs(x.modulus - parts[0].modulus))


def surface_tree(text):
    return tk.parse_tree(text, parse_surface)


def test_permutation_helpers():
    assert identity(3) == (1, 2, 3)
    assert compose_perms((2, 3, 1), (2, 3, 1)) == (3, 1, 2)
    assert block_insert((2, 1), 1, 2) == (2, 3, 1)
    assert block_insert((1, 2), 2, 0) == (1,)


def test_counit_composes_pieces():
    fr = FramedSurfaces()
    assert counit(fr, surface_tree('(fr g=1 m=2 (fr g=2 m=1 #1) #2)')) == smooth(3, 2)
    assert counit(fr, surface_tree('(ann 1/2 (ann 1/3 #1))')) == annulus(Fraction(5, 6))
    assert counit(fr, tk.TRIVIAL) == annulus(0)


def test_counit_respects_labels():
    fr = FramedSurfaces()
    assert counit(fr, surface_tree('(fr g=0 m=2 #2 (fr g=1 m=1 #1))')) == smooth(1, 2)


def test_free_operad_codes_twist_decorations():
    free = FreeOperad(swap_pair_collection(), 2)
    l_swapped = free.parse('(gen l #2 #1)')
    assert free.key(l_swapped) == free.key(free.parse('(gen r #1 #2)'))
    assert free.key(l_swapped) != free.key(free.parse('(gen l #1 #2)'))


def test_free_operad_rejects_wrong_valency():
    free = FreeOperad(swap_pair_collection(), 2)
    with pytest.raises(MalformedTreeError):
        free.parse('(gen l #1)')
    with pytest.raises(ValueError):
        free.parse('(gen m #1 #2)')
    with pytest.raises(MalformedTreeError):
        check_decorated(FramedSurfaces(), tk.corolla(2, annulus(0)))


def test_partial_index_out_of_range():
    fr = FramedSurfaces()
    with pytest.raises(ArityMismatchError):
        fr.partial(smooth(0, 2), 3, annulus(0))


def test_tree_operad_elements():
    trees = tree_operad(2)
    assert len(trees.elements(2)) == 5
    assert tk.TRIVIAL in trees.elements(1)


@pytest.mark.parametrize('instance', [
    tree_operad(2),
    FreeOperad(swap_pair_collection(), 2),
    FramedSurfaces(1, SMALL_GRID),
    AnnuliMonoid(SMALL_GRID),
], ids=lambda o: o.name)
def test_axioms_hold(instance):
    report = check_axioms(instance, AxiomBounds(max_arity=2))
    assert report.passed, report.to_jsonl()
    assert report.checked > 0


def test_axiom_checker_finds_non_associativity():
    report = check_axioms(SubtractiveAnnuli((Fraction(1, 4), Fraction(1, 2), Fraction(1))), AxiomBounds(max_arity=1))
    assert not report.passed
    assert {v.check for v in report.violations} == {'sequential'}
    record = report.to_records()[0]
    assert record['status'] == 'FAIL'


def test_max_grade_prunes_tuples():
    trees = tree_operad(2)
    full = check_axioms(trees, AxiomBounds(max_arity=2))
    # three trees of at most two vertices each
    assert check_axioms(trees, AxiomBounds(max_arity=2, max_grade=6)).checked == full.checked
    pruned = check_axioms(trees, AxiomBounds(max_arity=2, max_grade=2))
    assert pruned.passed
    assert 0 < pruned.checked < full.checked
    assert estimate_tuples(trees, 2, 2) < estimate_tuples(trees, 2)


def test_axiom_budget_guard():
    with pytest.raises(BudgetExceededError):
        check_axioms(tree_operad(3), AxiomBounds(max_arity=3, budget=10))


FREE_FR = FreeOperad(FramedSurfaces(1, SMALL_GRID), 2, min_valency=1)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(FREE_FR.elements(2)), st.sampled_from(FREE_FR.elements(1)), st.integers(1, 2))
def test_counit_is_a_morphism(u, v, i):
    fr = FREE_FR.collection
    assert counit(fr, tk.partial_graft(u, i, v)) == fr.partial(counit(fr, u), i, counit(fr, v))


# ---------------------------------------------------------------- canonical codes against orbit oracles

def planar_sequences(vertices, leaves):
    """Every ordered child list using exactly this many vertices and (unlabeled) leaves"""
    if vertices == 0 and leaves == 0:
        return [()]
    out = []
    if leaves:
        out += [(Leaf(0),) + rest for rest in planar_sequences(vertices, leaves - 1)]
    for v in range(1, vertices + 1):
        for l in range(leaves + 1):
            for head in planar_trees(v, l):
                out += [(head,) + rest for rest in planar_sequences(vertices - v, leaves - l)]
    return out


def planar_trees(vertices, leaves, arities=None):
    trees = [Node(children) for children in planar_sequences(vertices - 1, leaves)] if vertices else []
    if arities is not None:
        trees = [t for t in trees if all(n.valency in arities for _, n in tk.iter_vertices(t))]
    return trees


def labeled(tree, n):
    def label(slot, it):
        if isinstance(slot, Leaf):
            return Leaf(next(it))
        return Node(tuple(label(c, it) for c in slot.children), slot.dec)
    return [label(tree, iter(perm)) for perm in itertools.permutations(range(1, n + 1))]


def decorated(tree, collection):
    if isinstance(tree, Leaf):
        return [tree]
    options = [decorated(c, collection) for c in tree.children]
    return [Node(kids, dec) for kids in itertools.product(*options) for dec in collection.elements(tree.valency)]


def sibling_moves(t, collection=None):
    """Swap two neighbouring children of one vertex, twisting its decoration to match"""
    for address, node in tk.iter_vertices(t):
        for j in range(node.valency - 1):
            kids = list(node.children)
            kids[j], kids[j + 1] = kids[j + 1], kids[j]
            sigma = list(range(1, node.valency + 1))
            sigma[j], sigma[j + 1] = sigma[j + 1], sigma[j]
            dec = node.dec if collection is None else collection.act(node.dec, tuple(sigma))
            yield tk.replace_at(t, address, Node(tuple(kids), dec))


def orbits(trees, moves):
    parent = {t: t for t in trees}

    def find(t):
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    for t in trees:
        for u in moves(t):
            parent[find(u)] = find(t)
    classes = {}
    for t in trees:
        classes.setdefault(find(t), []).append(t)
    return list(classes.values())


@pytest.mark.parametrize('n,max_vertices', [(0, 3), (1, 3), (2, 3), (3, 3), (2, 4)])
def test_enumerate_trees_is_complete(n, max_vertices):
    planar = [t for v in range(1, max_vertices + 1) for shape in planar_trees(v, n) for t in labeled(shape, n)]
    expected = {tk.canonicalize(t) for t in planar} | ({tk.canonicalize(tk.TRIVIAL)} if n == 1 else set())
    found = tk.enumerate_trees(n, max_vertices)
    assert len(found) == len(set(found))
    assert set(found) == expected
    assert len(orbits(planar, sibling_moves)) == len(expected) - (1 if n == 1 else 0)


@pytest.mark.parametrize('collection', [
    swap_pair_collection(),
    FiniteCollection([Generator('a', 2), Generator('b', 2)]),
], ids=['twisted', 'fixed'])
@pytest.mark.parametrize('n', [2, 3, 4])
def test_decorated_codes_count_orbits(collection, n):
    planar = [d for shape in planar_trees(n - 1, n, arities={2}) for t in labeled(shape, n)
              for d in decorated(t, collection)]
    classes = orbits(planar, lambda t: sibling_moves(t, collection))
    codes = [{canonical_decorated(collection, t) for t in orbit} for orbit in classes]
    assert all(len(c) == 1 for c in codes)
    assert len(set().union(*codes)) == len(classes)


if __name__ == '__main__':
    sys.exit(pytest.main([__file__, '-v']))
