#!/usr/bin/env python3
"""
End-to-end tests of the operad_forge command line
"""

import io
import json
import sys

import pandas as pd
import pytest

import rewrite_pushout as rp
from operad_forge import EXIT_FAIL, EXIT_OK, EXIT_UNDECIDED, EXIT_USAGE, main

SYS = rp.surface_pushout_system()


@pytest.fixture(autouse=True)
def sequential(monkeypatch):
    monkeypatch.setenv('OPERAD_FORGE_THREADS', '1')


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return str(path)
    return _write


def test_parse_prints_the_tree(write, capsys):
    path = write('e.tree', '(fr g=0 m=2\n  (nann 1/2 (nod #1))\n  #2)\n')
    assert main(['parse', path]) == EXIT_OK
    assert capsys.readouterr().out == '(fr g=0 m=2 (nann 1/2 (nod #1)) #2)\n'


def test_parse_json_record(write, capsys):
    path = write('e.tree', '(fr g=1 m=2 #2 #1)')
    assert main(['parse', path, '--format', 'json']) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {'arity': 2, 'tree': '(fr g=1 m=2 #2 #1)', 'vertices': 1}


def test_parse_reads_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, 'stdin', io.StringIO('(_ #1 (_ #2 #3))'))
    assert main(['parse', '-', '--instance', 'tree']) == EXIT_OK
    assert capsys.readouterr().out == '(_ #1 (_ #2 #3))\n'


def test_parse_stdin_with_the_pushout_instance(monkeypatch, capsys):
    monkeypatch.setattr(sys, 'stdin', io.StringIO('(fr g=1 m=1 #1)'))
    assert main(['parse', '-']) == EXIT_OK
    assert capsys.readouterr().out == '(fr g=1 m=1 #1)\n'


def test_parse_graph_block(write, capsys):
    path = write('g.dg', 'dg\ncomp 0 g=1 (in 2) (out)\ncomp 1 g=0 (in 1 3) (node 0)\n')
    assert main(['parse', path, '--format', 'json']) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {'graph': 'dg g1[2]{g0[1,3]}'}


def test_parse_errors_are_usage_errors(write, capsys):
    path = write('bad.tree', '(fr g=0 m=2 #1')
    assert main(['parse', path]) == EXIT_USAGE
    captured = capsys.readouterr()
    assert captured.out == ''
    assert 'Parse error' in captured.err


@pytest.mark.parametrize('argv', [
    [],
    ['explode'],
    ['enum-trees', '--arity', '2'],
    ['enum-graphs', '--arity', '1', '--genus', '0', '--max-vertices', '1', '--grid', '1/x'],
    ['parse', 'no-such-file.tree'],
    ['parse', 'x', '--verbose', '--quiet'],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_canon_ignores_planar_order(write, capsys):
    a = write('a.tree', '(fr g=0 m=2 (nod #1) #2)')
    b = write('b.tree', '(fr g=0 m=2 #2 (nod #1))')
    assert main(['canon', a, b]) == EXIT_OK
    first, second = capsys.readouterr().out.splitlines()
    assert first == second


def test_compose_grafts_in_order(write, capsys):
    base = write('base.tree', '(fr g=0 m=2 #1 #2)')
    nod = write('nod.tree', '(nod #1)')
    ann = write('ann.tree', '(ann 1/2 #1)')
    assert main(['compose', base, nod, ann]) == EXIT_OK
    assert capsys.readouterr().out == '(fr g=0 m=2 (nod #1) (ann 1/2 #2))\n'


def test_enum_trees(capsys):
    assert main(['enum-trees', '--arity', '2', '--max-vertices', '2']) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 5


def test_enum_trees_stream(capsys):
    assert main(['enum-trees', '--arity', '2', '--max-vertices', '2', '--format', 'json', '--stream']) == EXIT_OK
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert len(records) == 5
    assert all(set(r) == {'code'} for r in records)


def test_enum_graphs(capsys):
    argv = ['enum-graphs', '--arity', '1', '--genus', '0', '--max-vertices', '1', '--grid', '0,1/2']
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ['dg g0[1]~0', 'dg g0[1]~1/2', 'dg g0[]{g0[1]}']


def test_pushout_normal_form(write, capsys):
    path = write('e.tree', '(nod (ann 1/2 (nod #1)))')
    assert main(['pushout', 'nf', path, '--format', 'json']) == EXIT_OK
    record = json.loads(capsys.readouterr().out)
    assert record['normal_form'] == '(nod #1)'
    assert record['code'] == str(SYS.code(SYS.parse('(nod #1)')))


def test_pushout_equality_exit_codes(write, capsys):
    p = write('p.tree', '(ann 1/2 #1)')
    q = write('q.tree', '(nann 1/2 #1)')
    n = write('n.tree', '(nod #1)')
    assert main(['pushout', 'eq', p, q]) == EXIT_OK
    assert main(['pushout', 'eq', p, n]) == EXIT_FAIL
    assert capsys.readouterr().out.splitlines() == ['TRUE', 'FALSE']
    assert main(['pushout', 'eq', p]) == EXIT_USAGE


def test_pushout_equality_out_of_budget(write, capsys):
    e1 = write('e1.tree', '(fr g=0 m=2 (ann 1/2 (nod #1)) (nann 1/4 #2))')
    e2 = write('e2.tree', '(fr g=1 m=2 #1 #2)')
    assert main(['pushout', 'eq', e1, e2, '--budget', '1']) == EXIT_UNDECIDED
    assert capsys.readouterr().out == 'UNDECIDED\n'


def test_pushout_confluence(write, capsys):
    path = write('e.tree', '(fr g=0 m=2 (ann 1/2 (nod (nann 1/4 #1))) (nann 1/2 #2))')
    assert main(['pushout', 'confluence', path, '--trials', '20', '--seed', '5', '--format', 'json']) == EXIT_OK
    assert json.loads(capsys.readouterr().out)['status'] == 'PASS'


def test_w_contract_and_counit(write, capsys):
    zero = write('zero.tree', '(ann 1/2 (ann 1/4 @0 #1))')
    assert main(['w', 'contract', zero]) == EXIT_OK
    assert capsys.readouterr().out == '(ann 3/4 #1)\n'
    nested = write('nested.tree', '(fr g=1 m=2 (fr g=2 m=1 @1/2 #1) #2)')
    assert main(['w', 'counit', nested]) == EXIT_OK
    assert capsys.readouterr().out == 'fr g=3 m=2\n'


def test_w_rejects_missing_lengths(write):
    path = write('e.tree', '(ann 1/2 (ann 1/4 #1))')
    assert main(['w', 'contract', path]) == EXIT_USAGE


def test_verify_writes_report_and_cells(tmp_path, capsys):
    out = tmp_path / 'report.json'
    cells = tmp_path / 'cells.csv'
    argv = ['verify', 'fr-cap', '--max-arity', '2', '--max-genus', '1', '--max-vertices', '3',
            '--grid', '0,1/2', '--no-progress', '--out', str(out), '--csv', str(cells)]
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == ''
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['check'] == 'fr-cap'
    assert report['status'] == 'PASS'
    assert report['skipped'][0]['cell'] == [1, 0]
    assert len(pd.read_csv(cells)) == 4


def test_verify_is_byte_reproducible(capsys):
    argv = ['verify', 'fr-cap', '--max-arity', '1', '--max-genus', '1', '--max-vertices', '3',
            '--grid', '0,1/2', '--no-progress']
    assert main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == first


if __name__ == '__main__':
    sys.exit(pytest.main([__file__, '-v']))
