#!/usr/bin/env python3
"""
Tests for pushout rewriting over the surface diagram Fr~ <- Ann~ -> NodAnn~
"""

import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rewrite_pushout as rp
import surface_instances as si
import tree_kernel as tk
import verifier
from errors import BudgetExceededError, MalformedTreeError, ParseError
from operad_core import free_compose
from rewrite_pushout import P_SIDE, Q_SIDE, Decision, RewriteRule, Tagged
from surface_instances import NODAL_ANNULUS, AnnuliMonoid, NodalAnnuli, annulus, smooth

SYS = rp.surface_pushout_system()


def nf_text(text):
    tree, _ = rp.normalize(SYS, SYS.parse(text))
    return SYS.format(tree)


class SubtractiveAnnuli(AnnuliMonoid):
    name = 'subann'

    def compose(self, x, parts):
        return annulus(abs(x.modulus - parts[0].modulus))


# ---------------------------------------------------------------- text form

def test_tagged_text_form():
    e = SYS.parse('(fr g=0 m=2 (nann 1/2 (nod #1)) #2)')
    vertices = dict(tk.iter_vertices(e))
    assert vertices[()].dec == Tagged(P_SIDE, smooth(0, 2))
    assert vertices[(0,)].dec == Tagged(Q_SIDE, annulus(Fraction(1, 2)))
    assert vertices[(0, 0)].dec == Tagged(Q_SIDE, NODAL_ANNULUS)
    assert SYS.format(e) == '(fr g=0 m=2 (nann 1/2 (nod #1)) #2)'


def test_unknown_decoration_is_a_parse_error():
    with pytest.raises(ParseError):
        SYS.parse('(nfr g=1 m=1 #1)')


# ---------------------------------------------------------------- single steps

def test_applicable_rules():
    e = SYS.parse('(fr g=0 m=2 (ann 1/2 (nod #1)) #2)')
    rules = rp.applicable_rules(SYS, e)
    assert RewriteRule(rp.CONTRACT_SAME_SIDE, (0,)) in rules
    assert RewriteRule(rp.SWAP_SIDE, (0,)) in rules
    assert rp.applicable_rules(SYS, e, oriented=True) == [RewriteRule(rp.CONTRACT_SAME_SIDE, (0,)),
                                                          RewriteRule(rp.SWAP_SIDE, (0,))]
    assert rp.applicable_rules(SYS, tk.TRIVIAL) == []


def test_contracting_across_sides_is_refused():
    e = SYS.parse('(fr g=0 m=2 (nod #1) #2)')
    with pytest.raises(MalformedTreeError):
        rp.apply_rule(SYS, e, RewriteRule(rp.CONTRACT_SAME_SIDE, (0,)))
    with pytest.raises(MalformedTreeError):
        rp.apply_rule(SYS, e, RewriteRule(rp.SWAP_SIDE, (0,)))


def test_swap_moves_an_annulus_across():
    e = SYS.parse('(ann 1/2 #1)')
    swapped = rp.apply_rule(SYS, e, RewriteRule(rp.SWAP_SIDE, ()))
    assert SYS.format(swapped) == '(nann 1/2 #1)'


# ---------------------------------------------------------------- normal forms

def test_annulus_between_nodal_annuli_collapses():
    assert nf_text('(nod (ann 1/2 (nod #1)))') == '(nod #1)'


def test_annulus_chain_adds_moduli():
    assert nf_text('(ann 1/2 (nann 1/4 #1))') == '(ann 3/4 #1)'
    assert nf_text('(nann 1/2 #1)') == '(ann 1/2 #1)'


def test_annuli_are_absorbed_by_pieces():
    assert nf_text('(fr g=0 m=2 (ann 1/2 (fr g=1 m=1 #1)) #2)') == '(fr g=1 m=2 #1 #2)'
    assert nf_text('(fr g=0 m=2 (nann 1/2 (nod #1)) #2)') == '(fr g=0 m=2 (nod #1) #2)'


def test_trivial_tree_is_the_unit_vertex():
    assert SYS.format(rp.normalize(SYS, tk.TRIVIAL)[0]) == '(ann 0 #1)'


def test_normal_form_step_count():
    e = SYS.parse('(ann 1/2 (nann 1/4 (ann 1/4 #1)))')
    tree, steps = rp.normalize(SYS, e)
    assert SYS.format(tree) == '(ann 1 #1)'
    assert steps == 3


def test_image_blocks_swap_as_a_unit():
    e = SYS.parse('(nann 0 (ann 0 (nod (ann 0 (nann 0 #1)))))')
    tree, steps = rp.normalize(SYS, e)
    assert SYS.format(tree) == '(nod #1)'
    # two swaps, then four contractions
    assert steps == 6


SMALL = rp.surface_pushout_system((Fraction(0), Fraction(1, 2)), 1)


def step_measure(e):
    return tk.vertex_count(e) + sum(1 for _, n in tk.iter_vertices(e) if SMALL.image_of(n.dec) is not None)


@pytest.mark.parametrize('arity,genus', [(1, 0), (1, 1), (2, 0), (2, 1)])
def test_normalization_stays_within_the_step_measure(arity, genus):
    for e in verifier.pushout_trees(SMALL, arity, genus, 4):
        tree, steps = rp.normalize(SMALL, e)
        assert steps <= step_measure(e), SMALL.format(e)
        assert rp.normalize(SMALL, tree)[1] == 0


BASES = verifier.pushout_trees(SMALL, 2, 0, 3)
PARTS = verifier.pushout_trees(SMALL, 1, 1, 3)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(BASES), st.sampled_from(PARTS), st.sampled_from(PARTS))
def test_composition_descends_to_normal_forms(base, left, right):
    composed = free_compose(base, [left, right])
    normal = [rp.normalize(SMALL, t)[0] for t in (base, left, right)]
    assert rp.normal_form(SMALL, composed) == rp.normal_form(SMALL, free_compose(normal[0], normal[1:]))


@pytest.mark.parametrize('arity,genus', [(1, 0), (1, 1), (2, 1)])
def test_erase_seams_is_constant_on_rewrite_fibers(arity, genus):
    for e in verifier.pushout_trees(SMALL, arity, genus, 3):
        graph = si.erase_seams(e)
        # alternating trees only admit swaps; contractions show up one step later
        for first in rp.applicable_rules(SMALL, e):
            e1 = rp.apply_rule(SMALL, e, first)
            assert si.erase_seams(e1) == graph
            for second in rp.applicable_rules(SMALL, e1):
                assert si.erase_seams(rp.apply_rule(SMALL, e1, second)) == graph, f'{SMALL.format(e1)} {second}'


def test_normalization_budget():
    with pytest.raises(BudgetExceededError):
        rp.normalize(SYS, SYS.parse('(nod (ann 1/2 (nod #1)))'), budget=0)


def test_normal_form_codes_ignore_planar_order():
    a = SYS.parse('(fr g=0 m=2 (nod #1) #2)')
    b = SYS.parse('(fr g=0 m=2 #2 (nod #1))')
    assert rp.normal_form(SYS, a) == rp.normal_form(SYS, b)


# ---------------------------------------------------------------- closure oracle

def test_equality_decisions():
    assert rp.equal_in_pushout(SYS, SYS.parse('(nann 1/2 #1)'), SYS.parse('(ann 1/2 #1)')) == Decision.TRUE
    assert rp.equal_in_pushout(SYS, tk.TRIVIAL, SYS.parse('(nann 0 #1)')) == Decision.TRUE
    assert rp.equal_in_pushout(SYS, SYS.parse('(nod #1)'), SYS.parse('(ann 1/2 #1)')) == Decision.FALSE
    assert rp.equal_in_pushout(SYS, SYS.parse('(nod (ann 1/2 (nod #1)))'), SYS.parse('(nod #1)')) == Decision.TRUE


def test_equality_undecided_when_budget_runs_out():
    e1 = SYS.parse('(fr g=0 m=2 (ann 1/2 (nod #1)) (nann 1/4 #2))')
    e2 = SYS.parse('(fr g=1 m=2 #1 #2)')
    assert rp.equal_in_pushout(SYS, e1, e2, budget=1) == Decision.UNDECIDED


def test_closure_contains_every_rewrite():
    e = SYS.parse('(ann 1/2 (nann 1/4 #1))')
    members, complete = rp.closure(SYS, e, 1000)
    assert complete
    texts = {SYS.format(t) for t in members.values()}
    assert {'(ann 1/2 (nann 1/4 #1))', '(ann 3/4 #1)', '(nann 3/4 #1)'} <= texts
    assert {rp.normal_form(SYS, t) for t in members.values()} == {rp.normal_form(SYS, e)}


# ---------------------------------------------------------------- confluence

def test_surface_rewriting_is_confluent():
    e = SYS.parse('(fr g=0 m=2 (ann 1/2 (nod (nann 1/4 #1))) (nann 1/2 #2))')
    report = rp.confluence_sample(SYS, e, trials=40, seed=3)
    assert report.passed
    assert sum(report.outcomes.values()) == 40
    assert report.to_dict()['status'] == 'PASS'


def test_non_associative_composition_breaks_confluence():
    grid = (Fraction(0),)
    sub = SubtractiveAnnuli((Fraction(1, 4), Fraction(1, 2), Fraction(1)))
    A = AnnuliMonoid(grid)
    broken = rp.PushoutSystem(sub, NodalAnnuli(grid), A, rp.InclusionMorphism(A, sub),
                              rp.InclusionMorphism(A, NodalAnnuli(grid)))
    e = broken.parse('(ann 1 (ann 1/2 (ann 1/4 #1)))')
    report = rp.confluence_sample(broken, e, trials=40, seed=0)
    assert not report.passed
    assert report.to_dict()['status'] == 'FAIL'


def test_morphisms_are_checked():
    A = AnnuliMonoid((Fraction(1, 2),))
    sub = SubtractiveAnnuli()
    with pytest.raises(MalformedTreeError):
        rp.PushoutSystem(sub, NodalAnnuli(), A, rp.InclusionMorphism(A, sub), rp.InclusionMorphism(A, NodalAnnuli()))


NF_SAMPLES = [
    '(fr g=0 m=2 (ann 1/2 (nod #1)) #2)',
    '(nod (fr g=1 m=2 (nann 1/4 #2) (ann 0 #1)))',
    '(ann 1/4 (nann 1/4 (nod (ann 1 #1))))',
    '(fr g=0 m=3 #3 (nod (nann 1/2 #1)) (fr g=1 m=1 #2))',
]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(NF_SAMPLES), st.integers(0, 10_000))
def test_random_rewrites_reach_the_normal_form(text, seed):
    e = SYS.parse(text)
    result = rp.random_rewrite(SYS, e, np.random.default_rng(seed))
    assert SYS.code(result) == rp.normal_form(SYS, e)


@pytest.mark.parametrize('text', NF_SAMPLES)
def test_normalization_is_idempotent(text):
    tree, _ = rp.normalize(SYS, SYS.parse(text))
    again, steps = rp.normalize(SYS, tree)
    assert steps == 0
    assert again == tree


# ---------------------------------------------------------------- W-level pushout

def test_cross_side_edges_have_length_one():
    with pytest.raises(MalformedTreeError):
        rp.check_w_tagged(SYS, SYS.parse('(fr g=0 m=2 (nod @1/2 #1) #2)'))
    with pytest.raises(MalformedTreeError):
        rp.check_w_tagged(SYS, SYS.parse('(fr g=0 m=2 (nod #1) #2)'))


def test_w_normalize_contracts_zero_lengths():
    e = SYS.parse('(ann 1/2 (ann 1/4 @0 #1))')
    assert SYS.format(rp.w_normalize(SYS, e)) == '(ann 3/4 #1)'


def test_w_normalize_reorients_detached_blocks():
    e = SYS.parse('(nod (ann 1/2 @1 (nod @1 #1)))')
    assert SYS.format(rp.w_normalize(SYS, e)) == '(nod (nann 1/2 @1 (nod @1 #1)))'


def test_w_normalize_keeps_attached_blocks():
    text = '(nod (ann 1/2 @1 (ann 1/4 @1/2 (fr g=1 m=1 @1/2 #1))))'
    assert SYS.format(rp.w_normalize(SYS, SYS.parse(text))) == text


def test_w_normal_forms_identify_tags():
    a = SYS.parse('(nann 1/2 (nod @1 #1))')
    b = SYS.parse('(ann 1/2 (nod @1 #1))')
    assert rp.w_normal_form(SYS, a) == rp.w_normal_form(SYS, b)


if __name__ == '__main__':
    sys.exit(pytest.main([__file__, '-v']))
