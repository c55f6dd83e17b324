#!/usr/bin/env python3
"""
Operad Forge - command-line entry point

Parse, canonicalize, compose and enumerate trees; normalize and compare
elements of the surface pushout; contract W-elements; run the verification
suite. stdout carries data only, diagnostics and progress go to stderr.

Exit codes: 0 decided success, 1 decided failure, 2 undecided or over
budget, 64 usage or input error.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import rewrite_pushout as rp
import surface_instances as si
import tree_kernel as tk
import verifier
from errors import BudgetExceededError, OperadForgeError, ParseError
from operad_core import FreeOperad, OperadInstance, swap_pair_collection, tree_operad
from w_construction import DEFAULT_LENGTHS, WOperad, w_contract, w_counit

logger = logging.getLogger('operad_forge')

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_UNDECIDED = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class ForgeArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for undecided results"""

    def error(self, message):
        raise UsageError(message)


def _instances(args) -> Dict[str, Any]:
    grid = args.grid
    return {
        'tree': tree_operad(3),
        'swap': FreeOperad(swap_pair_collection(), 3),
        'ann': si.AnnuliMonoid(grid),
        'fr': si.FramedSurfaces(3, grid),
        'nodann': si.NodalAnnuli(grid),
        'nodfr': si.NodalFramed(3, 3, grid),
    }


INSTANCE_NAMES = ('pushout', 'tree', 'swap', 'ann', 'fr', 'nodann', 'nodfr')
W_INSTANCES = ('ann', 'fr', 'nodann', 'nodfr')


class Session:
    """Everything a command needs: output format, the chosen decoration domain and the pushout system"""

    def __init__(self, args):
        self.args = args
        self.system = rp.surface_pushout_system(args.grid)
        name = getattr(args, 'instance', 'pushout')
        self.operad: Optional[OperadInstance] = None
        if name == 'pushout':
            self.trees = self.system
        else:
            self.operad = _instances(args)[name]
            self.trees = (self.operad if isinstance(self.operad, FreeOperad)
                          else FreeOperad(self.operad, 3))

    def read(self, path: str) -> str:
        if path == '-':
            return sys.stdin.read()
        with open(path, encoding='utf-8') as f:
            return f.read()

    def parse(self, path: str) -> tk.LabeledTree:
        return self.trees.parse(self.read(path))

    def render(self, t) -> str:
        return self.trees.format(t)

    def code(self, t) -> tk.CanonicalTreeCode:
        return self.trees.code(t) if self.trees is self.system else self.trees.key(t)

    def emit(self, records: Sequence[Dict[str, Any]], text: Sequence[str]) -> None:
        if self.args.format == 'json':
            if self.args.stream:
                for r in records:
                    sys.stdout.write(json.dumps(r, sort_keys=True, separators=(',', ':')) + '\n')
            else:
                doc = records[0] if len(records) == 1 else list(records)
                sys.stdout.write(json.dumps(doc, sort_keys=True, separators=(',', ':')))
        else:
            for line in text:
                sys.stdout.write(line + '\n')


# ---------------------------------------------------------------- commands

def cmd_parse(s: Session) -> int:
    text = s.read(s.args.file)
    if text.lstrip().startswith(('dg', 'dm')):
        g = si.parse_graph_block(text)
        s.emit([{'graph': si.format_graph(g)}], [si.format_graph_block(g).rstrip('\n')])
        return EXIT_OK
    t = s.trees.parse(text)
    s.emit([{'tree': s.render(t), 'arity': tk.arity(t), 'vertices': tk.vertex_count(t)}], [s.render(t)])
    return EXIT_OK


def cmd_canon(s: Session) -> int:
    records, lines = [], []
    for path in s.args.files:
        code = str(s.code(s.parse(path)))
        records.append({'file': path, 'code': code})
        lines.append(code)
    s.emit(records, lines)
    return EXIT_OK


def cmd_compose(s: Session) -> int:
    base = s.parse(s.args.base)
    parts = [s.parse(p) for p in s.args.parts]
    result = tk.graft(base, parts)
    s.emit([{'tree': s.render(result), 'code': str(s.code(result))}], [s.render(result)])
    return EXIT_OK


def cmd_enum_trees(s: Session) -> int:
    codes = [str(c) for c in tk.enumerate_trees(s.args.arity, s.args.max_vertices)]
    records = [{'code': c} for c in codes] if s.args.stream else [{'arity': s.args.arity, 'codes': codes}]
    s.emit(records, codes)
    return EXIT_OK


def cmd_enum_graphs(s: Session) -> int:
    if s.args.marked:
        graphs = si.stable_marked_skeletons(s.args.arity, s.args.genus, s.args.max_vertices)
    else:
        moduli = si.modulus_closure(s.args.grid, s.args.max_vertices)
        graphs = si.stable_dual_graphs(s.args.arity, s.args.genus, s.args.max_vertices, moduli)
    texts = [si.format_graph(g) for g in graphs]
    records = ([{'graph': t} for t in texts] if s.args.stream
               else [{'arity': s.args.arity, 'genus': s.args.genus, 'graphs': texts}])
    s.emit(records, texts)
    return EXIT_OK


def cmd_pushout(s: Session) -> int:
    sys_ = s.system
    action = s.args.action
    if action == 'nf':
        tree, steps = rp.normalize(sys_, s.parse(s.args.files[0]))
        s.emit([{'normal_form': sys_.format(tree), 'code': str(sys_.code(tree)), 'steps': steps}],
               [str(sys_.code(tree))])
        return EXIT_OK
    if action == 'eq':
        if len(s.args.files) != 2:
            raise UsageError("pushout eq takes exactly two files")
        e1, e2 = (s.parse(p) for p in s.args.files)
        decision = rp.equal_in_pushout(sys_, e1, e2, s.args.budget)
        s.emit([{'decision': decision.value}], [decision.value])
        return {rp.Decision.TRUE: EXIT_OK, rp.Decision.FALSE: EXIT_FAIL}.get(decision, EXIT_UNDECIDED)
    report = rp.confluence_sample(sys_, s.parse(s.args.files[0]), s.args.trials, s.args.seed)
    d = report.to_dict()
    s.emit([d], [f"{d['status']} {code} x{n}" for code, n in d['outcomes'].items()])
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_w(s: Session) -> int:
    w = WOperad(s.operad)
    e = w.parse(s.read(s.args.file))
    if s.args.action == 'contract':
        result = w_contract(s.operad, e)
        s.emit([{'tree': w.format(result), 'code': str(w.key(e))}], [w.format(result)])
    else:
        value = w_counit(s.operad, e)
        text = s.operad.format(value)
        s.emit([{'value': text}], [text])
    return EXIT_OK


def cmd_verify(s: Session) -> int:
    a = s.args
    bounds = verifier.Bounds(max_arity=a.max_arity, max_genus=a.max_genus, max_vertices=a.max_vertices,
                             modulus_grid=a.grid, length_grid=a.lengths, trial_count=a.trials,
                             seed=a.seed, budget=a.budget)
    report = verifier.run_check(a.check, bounds, progress=not a.no_progress)
    if a.csv:
        report.export_cells(a.csv)
    if a.stream:
        for cell in report.cells:
            sys.stdout.write(json.dumps(cell, sort_keys=True, separators=(',', ':')) + '\n')
    document = report.to_json(timing=a.timing)
    if a.out:
        with open(a.out, 'w', encoding='utf-8') as f:
            f.write(document)
        logger.info("Report written to %s", a.out)
    else:
        sys.stdout.write(document + ('\n' if a.stream else ''))
    return {verifier.PASS: EXIT_OK, verifier.FAIL: EXIT_FAIL}.get(report.status, EXIT_UNDECIDED)


# ---------------------------------------------------------------- argument parsing

def _grid(text: str):
    try:
        return si.parse_grid(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> ForgeArgumentParser:
    shared = ForgeArgumentParser(add_help=False)
    shared.add_argument('--format', choices=('sexp', 'json'), default='sexp', help='Output format')
    shared.add_argument('--seed', type=int, default=0, help='Seed for every randomized step')
    shared.add_argument('--stream', action='store_true', help='Line-delimited JSON records')
    shared.add_argument('--grid', type=_grid, default=si.DEFAULT_GRID,
                        help='Modulus grid of exact rationals, e.g. 0,1/4,1/2,1')
    shared.add_argument('--no-progress', action='store_true', help='Hide progress bars')
    noise = shared.add_mutually_exclusive_group()
    noise.add_argument('--verbose', '-v', action='store_true')
    noise.add_argument('--quiet', '-q', action='store_true')

    parser = ForgeArgumentParser(prog='operad_forge', description='Combinatorial operads, pushouts and W-constructions')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ForgeArgumentParser)

    def instance_flag(p):
        p.add_argument('--instance', choices=INSTANCE_NAMES, default='pushout',
                       help='Decoration domain of the input trees')

    p = sub.add_parser('parse', parents=[shared], help='Parse and print a tree or dual graph file')
    p.add_argument('file')
    instance_flag(p)
    p.set_defaults(run=cmd_parse)

    p = sub.add_parser('canon', parents=[shared], help='Canonical code of each file')
    p.add_argument('files', nargs='+')
    instance_flag(p)
    p.set_defaults(run=cmd_canon)

    p = sub.add_parser('compose', parents=[shared], help='Free composition gamma(BASE; PART...)')
    p.add_argument('base')
    p.add_argument('parts', nargs='*')
    instance_flag(p)
    p.set_defaults(run=cmd_compose)

    p = sub.add_parser('enum-trees', parents=[shared], help='One code per labeled tree class')
    p.add_argument('--arity', type=int, required=True)
    p.add_argument('--max-vertices', type=int, required=True)
    p.set_defaults(run=cmd_enum_trees)

    p = sub.add_parser('enum-graphs', parents=[shared], help='Stable tree-like dual graphs')
    p.add_argument('--arity', type=int, required=True)
    p.add_argument('--genus', type=int, required=True)
    p.add_argument('--max-vertices', type=int, required=True)
    p.add_argument('--marked', action='store_true', help='Marked (Deligne-Mumford) skeletons instead')
    p.set_defaults(run=cmd_enum_graphs)

    p = sub.add_parser('pushout', parents=[shared], help='Normal forms and equality in the surface pushout')
    p.add_argument('action', choices=('nf', 'eq', 'confluence'))
    p.add_argument('files', nargs='+')
    p.add_argument('--budget', type=int, default=20000)
    p.add_argument('--trials', type=int, default=100)
    p.set_defaults(run=cmd_pushout, instance='pushout')

    p = sub.add_parser('w', parents=[shared], help='W-construction: contract zero lengths or apply the counit')
    p.add_argument('action', choices=('contract', 'counit'))
    p.add_argument('file')
    p.add_argument('--instance', choices=W_INSTANCES, default='fr')
    p.set_defaults(run=cmd_w)

    p = sub.add_parser('verify', parents=[shared], help='Run one verification check')
    p.add_argument('check', choices=sorted(verifier.CHECKS))
    p.add_argument('--max-arity', type=int, default=4)
    p.add_argument('--max-genus', type=int, default=3)
    p.add_argument('--max-vertices', type=int, default=5)
    p.add_argument('--lengths', type=_grid, default=DEFAULT_LENGTHS)
    p.add_argument('--trials', type=int, default=100)
    p.add_argument('--budget', type=int, default=20000)
    p.add_argument('--out', help='Write the JSON report here instead of stdout')
    p.add_argument('--csv', help='Also export the per-cell table as CSV')
    p.add_argument('--timing', action='store_true', help='Include elapsed seconds (breaks byte reproducibility)')
    p.set_defaults(run=cmd_verify)
    return parser


def setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.ERROR if quiet else logging.WARNING
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"usage error: {e}\n")
        return EXIT_USAGE
    setup_logging(args.verbose, args.quiet)
    try:
        return args.run(Session(args))
    except UsageError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except ParseError as e:
        logger.error("Parse error: %s", e)
        return EXIT_USAGE
    except BudgetExceededError as e:
        logger.error("Budget exceeded: %s", e)
        return EXIT_UNDECIDED
    except (OperadForgeError, OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
