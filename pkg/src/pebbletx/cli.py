"""Command line interface: validate, run, render, behavior, bounded, pump,
growth, minimize, power and difftest, all emitting deterministic JSON
reports (render emits the canonical text format)."""

from __future__ import annotations

import argparse
import sys
import time

from . import analysis, growth, power, ptx, reporting
from .automata import StateCapExceeded
from .behavior import DIVERGENT, BehaviorMonoid
from .core import (CallSym, InputError, Letter, NestedTransducer,
                   PebbleError, parse_word, validate)
from .difftest import difftest
from .labelling import BoundViolation, Pipeline, eval_pipeline, render_pipeline
from .ptx import ParseError
from .reporting import dump, report, word_tokens
from .semantics import run1, run_nested

EXIT_OK = 0
EXIT_REFUSAL = 1
EXIT_USAGE = 2


def _load(path):
    try:
        return ptx.load(path)
    except FileNotFoundError:
        raise Usage(f"no such file: {path}")
    except ParseError as exc:
        raise Usage(f"{path}: {exc}")


class Usage(PebbleError):
    pass


def _delta_set(text):
    out = set()
    for tok in text.split():
        if tok.startswith("call(") and tok.endswith(")"):
            out.add(CallSym(int(tok[5:-1])))
        else:
            out.add(tok)
    return out


def _machine(doc) -> NestedTransducer:
    return doc.machine if isinstance(doc, Pipeline) else doc


def _element_rows(element):
    rows = []
    for (q, d), val in element.table:
        if val == DIVERGENT:
            rows.append({"entry": [q, d], "exit": "divergent"})
        else:
            rows.append({"entry": [q, d], "exit": [val[0], val[1], val[2]]})
    return rows


def _family_json(parts):
    return {"parts": [word_tokens(p) for p in parts]}


def cmd_validate(args):
    doc = _load(args.file)
    violations = validate(_machine(doc))
    result = {"valid": not violations,
              "violations": [str(v) for v in violations]}
    return result, (EXIT_OK if not violations else EXIT_REFUSAL)


def cmd_run(args):
    doc = _load(args.file)
    w = parse_word(args.input)
    r = eval_pipeline(doc, w) if isinstance(doc, Pipeline) else run_nested(
        doc, w, trace=args.trace)
    result = {"status": r.status}
    if r.accepted:
        result["output"] = [str(x) for x in r.output]
        result["output_text"] = "".join(str(x) for x in r.output)
        result["call_count"] = {c.token(): n for c, n in sorted(
            r.call_count.items(), key=lambda kv: kv[0].target)}
    if args.trace and r.trace is not None:
        result["trace_length"] = len(r.trace)
        result["trace"] = [{"head": c.head, "state": c.state} for c in r.trace]
    return result, EXIT_OK


def cmd_render(args):
    doc = _load(args.file)
    text = render_pipeline(doc) if isinstance(doc, Pipeline) else ptx.render(doc)
    sys.stdout.write(text)
    return None, EXIT_OK


def cmd_behavior(args):
    doc = _load(args.file)
    t = _machine(doc).top
    delta = _delta_set(args.delta)
    monoid = BehaviorMonoid(t, delta)
    letters = {}
    for letter in t.domain_letters():
        letters[letter.token()] = _element_rows(monoid.letter(letter))
    result = {"delta": sorted(str(x) for x in delta), "letters": letters}
    if args.input is not None:
        w = parse_word(args.input)
        result["word"] = word_tokens(w)
        result["word_table"] = _element_rows(monoid.word(w))
    interior, left, right = monoid.reachable_sets()
    result["reachable"] = {
        zone: [{"witness": word_tokens(x.witness),
                "table": _element_rows(x.element)} for x in elts]
        for zone, elts in (("interior", interior), ("left_closed", left),
                           ("right_closed", right))}
    return result, EXIT_OK


def _measure_counts(t, parts, delta, ns):
    samples = []
    for n in ns:
        w = analysis.pump_family(parts, n)
        r = run1(t, w)
        count = analysis.count_in(r.output, delta) if r.accepted else None
        samples.append({"n": n, "word": word_tokens(w), "count": count})
    return samples


def cmd_bounded(args):
    doc = _load(args.file)
    t = _machine(doc).top
    delta = _delta_set(args.delta)
    verdict = analysis.bounded_in(t, delta)
    result = {"delta": sorted(str(x) for x in delta), "bounded": verdict.bounded}
    if not verdict.bounded:
        tr = verdict.triple
        result["triple"] = {
            "x_witness": word_tokens(tr.x.witness),
            "e_witness": word_tokens(tr.e.witness),
            "y_witness": word_tokens(tr.y.witness),
            "producing_index": tr.producing_index,
        }
        result["family"] = _family_json(verdict.family)
        result["samples"] = _measure_counts(t, verdict.family, delta,
                                            range(1, 7))
    return result, EXIT_OK


def cmd_pump(args):
    doc = _load(args.file)
    t = _machine(doc).top
    delta = _delta_set(args.delta)
    verdict = analysis.bounded_in(t, delta)
    if verdict.bounded:
        return {"bounded": True,
                "note": "nothing to pump: output is bounded"}, EXIT_REFUSAL
    result = {"bounded": False, "family": _family_json(verdict.family),
              "samples": _measure_counts(t, verdict.family, delta,
                                         range(0, args.n + 1))}
    return result, EXIT_OK


def cmd_growth(args):
    doc = _load(args.file)
    rep = growth.decide_degree(doc, s=args.s, copies=args.r,
                               state_cap=args.state_cap)
    result = {
        "decided_degree": rep.decided_degree,
        "empirical_degree": rep.empirical_degree,
        "agreement": rep.agreement,
        "level_sizes": list(rep.level_sizes),
        "collapse_chain": list(rep.collapse_chain),
    }
    if rep.witness_family is not None:
        result["witness_family"] = _family_json(rep.witness_family)
    return result, EXIT_OK


def cmd_minimize(args):
    doc = _load(args.file)
    res = growth.minimize(doc, s=args.s, copies=args.r,
                          state_cap=args.state_cap)
    result = {
        "decided_degree": res.report.decided_degree,
        "layers": res.pipeline.machine.depth,
        "collapse_chain": list(res.report.collapse_chain),
    }
    if res.finite_output_certificate is not None:
        result["finite_outputs"] = ["".join(o) for o in
                                    res.finite_output_certificate]
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(render_pipeline(res.pipeline))
        result["emitted"] = args.emit
    if args.difftest_len:
        diff = difftest(res.pipeline, doc, args.difftest_len)
        result["difftest"] = _diff_json(diff)
        if not diff.equivalent:
            return result, EXIT_REFUSAL
    return result, EXIT_OK


def _diff_json(diff):
    out = {"equivalent": diff.equivalent, "checked": diff.checked}
    if not diff.equivalent:
        out["counterexample"] = word_tokens(diff.counterexample)
        out["left"] = {"accepted": diff.left[0],
                       "output": list(diff.left[1] or ())}
        out["right"] = {"accepted": diff.right[0],
                        "output": list(diff.right[1] or ())}
    return out


def cmd_power(args):
    if args.post or args.against:
        if not (args.post and args.against):
            raise Usage("power difftest mode needs both --post and --against")
        post = _machine(_load(args.post)).top
        against = _load(args.against)
        bases = sorted(_machine(against).base_input)
        import itertools
        checked = 0
        for n in range(args.max_len + 1):
            for combo in itertools.product(bases, repeat=n):
                w = tuple(Letter(b) for b in combo)
                r1 = power.reg_power_eval(post, args.k, w,
                                          index_from_zero=args.index_base == 0)
                r2 = eval_pipeline(against, w) if isinstance(against, Pipeline) \
                    else run_nested(against, w)
                o1 = tuple(map(str, r1.output)) if r1.accepted else None
                o2 = tuple(map(str, r2.output)) if r2.accepted else None
                checked += 1
                if o1 != o2:
                    return {"equivalent": False, "checked": checked,
                            "counterexample": word_tokens(w),
                            "post_output": list(o1 or ()),
                            "against_output": list(o2 or ())}, EXIT_REFUSAL
        return {"equivalent": True, "checked": checked}, EXIT_OK
    w = parse_word(args.input or "")
    marked = power.power_k(w, args.k, index_from_zero=args.index_base == 0)
    return {"k": args.k, "length": len(marked),
            "word": word_tokens(marked),
            "text": " ".join(word_tokens(marked))}, EXIT_OK


def cmd_difftest(args):
    a = _load(args.a)
    b = _load(args.b)
    alphabet = args.alphabet.split() if args.alphabet else None
    diff = difftest(a, b, args.max_len, alphabet)
    return _diff_json(diff), EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="pebbletx",
        description="Pebble transducer toolkit: run, analyze and minimize.")
    p.add_argument("--json-schema", action="store_true",
                   help="print the report schema and exit")
    p.add_argument("--no-timings", action="store_true",
                   help="omit timings for byte-stable output")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--no-timings", action="store_true",
                        help="omit timings for byte-stable output")
    sub = p.add_subparsers(dest="command")

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, parents=[common], **kwargs)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("validate", cmd_validate, help="check structural invariants")
    sp.add_argument("file")

    sp = add("run", cmd_run, help="run a machine or pipeline on a word")
    sp.add_argument("file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--trace", action="store_true")

    sp = add("render", cmd_render, help="canonical text form")
    sp.add_argument("file")

    sp = add("behavior", cmd_behavior, help="transition behavior tables")
    sp.add_argument("file")
    sp.add_argument("--delta", required=True,
                    help="watched output symbols, space separated")
    sp.add_argument("--input")

    sp = add("bounded", cmd_bounded, help="decide boundedness in a symbol set")
    sp.add_argument("file")
    sp.add_argument("--delta", required=True)

    sp = add("pump", cmd_pump, help="emit a pumping family with counts")
    sp.add_argument("file")
    sp.add_argument("--delta", required=True)
    sp.add_argument("--n", type=int, default=6)

    sp = add("growth", cmd_growth, help="decide the growth degree")
    sp.add_argument("file")
    sp.add_argument("--s", type=int, default=3)
    sp.add_argument("--r", type=int, default=3)
    sp.add_argument("--state-cap", type=int, default=10 ** 6)

    sp = add("minimize", cmd_minimize, help="minimize the number of layers")
    sp.add_argument("file")
    sp.add_argument("--s", type=int, default=3)
    sp.add_argument("--r", type=int, default=3)
    sp.add_argument("--state-cap", type=int, default=10 ** 6)
    sp.add_argument("--emit")
    sp.add_argument("--difftest-len", type=int, default=0)

    sp = add("power", cmd_power, help="marked block copies; difftest a "
                                      "regular post-processor")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--input")
    sp.add_argument("--index-base", type=int, choices=(0, 1), default=0)
    sp.add_argument("--post")
    sp.add_argument("--against")
    sp.add_argument("--max-len", type=int, default=5)

    sp = add("difftest", cmd_difftest, help="bounded-length equivalence")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--max-len", type=int, default=6)
    sp.add_argument("--alphabet")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.json_schema:
        print(dump(reporting.REPORT_SCHEMA))
        return EXIT_OK
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    started = time.perf_counter()
    try:
        result, code = args.fn(args)
    except Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (growth.AnalysisRefusal, StateCapExceeded, BoundViolation) as exc:
        payload = {"refusal": str(exc)}
        evidence = getattr(exc, "evidence", None)
        if evidence is not None:
            payload["evidence"] = {
                "x_witness": word_tokens(evidence.x.witness),
                "e_witness": word_tokens(evidence.e.witness),
                "y_witness": word_tokens(evidence.y.witness),
            }
        print(dump(report(args.command, _inputs(args), payload,
                          started=started, timings=not args.no_timings)))
        return EXIT_REFUSAL
    except (InputError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if result is None:
        return code
    config = {k: v for k, v in vars(args).items()
              if k in ("s", "r", "max_len", "n", "k", "index_base",
                       "difftest_len", "state_cap") and v is not None}
    print(dump(report(args.command, _inputs(args), result, config=config,
                      started=started, timings=not args.no_timings)))
    return code


def _inputs(args):
    out = {}
    for key in ("file", "a", "b", "input", "delta", "post", "against", "emit"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


if __name__ == "__main__":
    sys.exit(main())
