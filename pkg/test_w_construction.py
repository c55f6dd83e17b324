#!/usr/bin/env python3
"""
Tests for the W-construction: length bookkeeping, contraction, the counit and Humpty-Dumpty gluing
"""

import sys
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import surface_instances as si
import tree_kernel as tk
from errors import MalformedTreeError, ParseError
from surface_instances import smooth
from w_construction import (WOperad, check_lengths, hd_normalize, is_w_protected, sample_w_elements, w_code,
                            w_compose, w_contract, w_counit, w_partial)

FR = si.FramedSurfaces(2, (Fraction(0), Fraction(1, 4), Fraction(1, 2)))
W_FR = WOperad(FR)


def test_composition_uses_full_length_edges():
    u = W_FR.parse('(fr g=0 m=2 #1 #2)')
    v = W_FR.parse('(ann 1/2 #1)')
    assert W_FR.format(w_partial(u, 2, v)) == '(fr g=0 m=2 #1 (ann 1/2 @1 #2))'
    assert W_FR.format(w_compose(u, [v, v])) == '(fr g=0 m=2 (ann 1/2 @1 #1) (ann 1/2 @1 #2))'


def test_zero_lengths_contract():
    e = W_FR.parse('(ann 1/2 (ann 1/4 @0 #1))')
    assert W_FR.format(w_contract(FR, e)) == '(ann 3/4 #1)'
    kept = W_FR.parse('(ann 1/2 (ann 1/4 @1/2 #1))')
    assert w_contract(FR, kept) == kept


def test_contraction_keeps_planar_order():
    e = W_FR.parse('(fr g=0 m=2 (fr g=1 m=2 @0 #3 #1) #2)')
    assert W_FR.format(w_contract(FR, e)) == '(fr g=1 m=3 #3 #1 #2)'


def test_counit_forgets_lengths():
    e = W_FR.parse('(fr g=1 m=2 (fr g=2 m=1 @1/2 #1) #2)')
    assert w_counit(FR, e) == smooth(3, 2)


def test_keys_identify_contracted_elements():
    assert W_FR.key(W_FR.parse('(ann 1/2 (ann 1/4 @0 #1))')) == W_FR.key(W_FR.parse('(ann 3/4 #1)'))
    assert W_FR.key(W_FR.parse('(ann 1/2 (ann 1/4 @1 #1))')) != W_FR.key(W_FR.parse('(ann 3/4 #1)'))
    assert W_FR.unit() is tk.TRIVIAL


@pytest.mark.parametrize('text', [
    '(ann 1/2 (ann 1/4 #1))',          # missing length
    '(ann 1/2 (ann 1/4 @3/2 #1))',     # longer than 1
])
def test_lengths_are_checked(text):
    with pytest.raises(MalformedTreeError):
        W_FR.parse(text)


def test_bad_length_token():
    with pytest.raises(ParseError):
        W_FR.parse('(ann 1/2 (ann 1/4 @x #1))')


def test_check_lengths_accepts_the_trivial_tree():
    assert check_lengths(tk.TRIVIAL) is tk.TRIVIAL


def test_w_elements_on_single_vertices():
    w = WOperad(FR, max_vertices=1)
    # the trivial tree plus one corolla per element of FR
    assert len(w.elements(1)) == 1 + len(FR.elements(1))
    assert tk.TRIVIAL in w.elements(1)
    assert len(w.elements(2)) == len(FR.elements(2))


def test_hd_gluing():
    e = tk.parse_tree('(fr g=1 m=2 (fr g=1 m=1 @0 #1) #2)', si.parse_surface)
    assert tk.render(hd_normalize(e), si.format_surface) == '(fr g=2 m=2 #1 #2)'
    nodal = tk.parse_tree('(nod (ann 1/2 @0 #1))', si.parse_surface)
    assert tk.render(hd_normalize(nodal), si.format_surface) == '(nod #1)'
    unprotected = tk.parse_tree('(nod (fr g=1 m=1 @0 #1))', si.parse_surface)
    assert tk.render(hd_normalize(unprotected), si.format_surface) == '(nfr g=1 m=1 #1)'


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hd_gluing_matches_contraction(seed):
    for e in sample_w_elements(FR, 20, seed):
        assert w_code(hd_normalize(e)) == w_code(w_contract(FR, e))


def test_samples_are_reproducible():
    assert sample_w_elements(FR, 10, 7) == sample_w_elements(FR, 10, 7)


@pytest.mark.parametrize('text, expected', [
    ('(fr g=0 m=2 (nod @1 #1) #2)', True),
    ('(fr g=0 m=2 (ann 1/2 @1/2 (nod @1 #1)) #2)', True),
    ('(fr g=0 m=2 (ann 1/2 @1/2 (nod @1/2 #1)) #2)', False),
    ('(fr g=0 m=2 (nod @0 #1) #2)', False),
    ('(nfr g=0 m=2 #1 #2)', False),
    ('(nod (ann 1/2 @1/2 #1))', True),
])
def test_protected_w_elements(text, expected):
    assert is_w_protected(tk.parse_tree(text, si.parse_surface)) is expected


def test_graph_decorated_elements_are_classified():
    e = tk.Node((tk.Node((tk.Leaf(1),), si.NODE_GRAPH, Fraction(1, 2)),), si.bare_annulus(0))
    assert is_w_protected(e)


if __name__ == '__main__':
    sys.exit(pytest.main([__file__, '-v']))
