"""Command-line entry point: ``syndec encode|transmit|decode|sweep|selftest``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
failures while running.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .channel import ChannelSpec, read_traces, transmit_multi, write_traces
from .code import CodeError, encode, load_code_config
from .lattice import UndecodableTraceError
from .metric import JointModel
from .stack import StackParams

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _bits(text: str) -> np.ndarray:
    text = text.strip().replace(" ", "").replace(",", "")
    if not text or set(text) - {"0", "1"}:
        raise UsageError(f"expected a 0/1 string, got {text!r}")
    return np.array([int(c) for c in text], dtype=np.uint8)


def _bitstr(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def _read_arg(value: str) -> str:
    return sys.stdin.read() if value == "-" else value


def _trellis(args):
    try:
        return load_code_config(args.config, args.N).trellis()
    except FileNotFoundError:
        raise UsageError(f"no code config {args.config!r}") from None
    except (CodeError, ValueError, KeyError) as e:
        raise UsageError(f"code config {args.config!r}: {e}") from None


def _spec(args) -> ChannelSpec:
    try:
        return ChannelSpec(args.pi, args.pd, args.ps)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_encode(args) -> int:
    T = _trellis(args)
    if args.info is not None:
        u = _bits(_read_arg(args.info))
    else:
        u = np.random.default_rng(args.seed).integers(0, 2, size=T.K, dtype=np.uint8)
    if len(u) != T.K:
        raise UsageError(f"need {T.K} information bits, got {len(u)}")
    x = encode(T, u).bits
    if args.format == "json":
        print(json.dumps({"info": _bitstr(u), "codeword": _bitstr(x)}))
    else:
        print(_bitstr(x))
    return EXIT_OK


def cmd_transmit(args) -> int:
    x = _bits(_read_arg(args.codeword))
    spec = _spec(args)
    if args.M < 1:
        raise UsageError("-M must be >= 1")
    traces = transmit_multi(x, spec, args.M, args.seed)
    records = [(0, j, t.bits) for j, t in enumerate(traces)]
    if args.out:
        write_traces(args.out, records)
    else:
        for _, j, bits in records:
            print(f"0, {j}, {len(bits)}, {np.packbits(bits).tobytes().hex()}")
    return EXIT_OK


def cmd_decode(args) -> int:
    T = _trellis(args)
    spec = _spec(args)
    try:
        records = read_traces(args.traces)
    except FileNotFoundError:
        raise UsageError(f"no trace file {args.traces!r}") from None
    except ValueError as e:
        raise UsageError(str(e)) from None
    by_trial: dict[int, list] = {}
    for trial, j, bits in records:
        by_trial.setdefault(trial, []).append((j, bits))
    params = StackParams(capacity=args.capacity, max_expansions=args.max_expansions)
    out = []
    for trial in sorted(by_trial):
        traces = [b for _, b in sorted(by_trial[trial], key=lambda r: r[0])]
        model = JointModel.build(T, traces, spec, slack=args.slack)
        r = harness.run_decoder(args.decoder, model, params, np.random.default_rng(args.seed))
        out.append({
            "trial": trial,
            "decoder": args.decoder,
            "erasure": bool(r.erasure),
            "codeword": _bitstr(r.codeword),
            "info": _bitstr(r.info_bits),
            "is_codeword": bool(T.path_states(r.codeword) is not None),
            "expansions": int(r.expansions),
            "metric_evals": int(r.metric_evals),
        })
    if args.format == "json":
        text = json.dumps(out, indent=2) + "\n"
    else:
        cols = ["trial", "decoder", "erasure", "codeword", "info", "is_codeword", "expansions", "metric_evals"]
        text = ",".join(cols) + "\n" + "".join(",".join(str(o[c]) for c in cols) + "\n" for o in out)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = harness.load_experiment(args.config)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.decoder:
            over["decoders"] = tuple(d for part in args.decoder for d in part.split(","))
        if args.trials is not None:
            over["trials"] = args.trials
        if args.out is not None:
            over["out"] = args.out
        if args.format is not None:
            over["format"] = args.format
        cfg = replace(cfg, **over) if over else cfg
        cfg.code_config()
    except harness.ConfigError as e:
        raise UsageError(str(e)) from None
    threads = args.threads if args.threads is not None else harness.default_threads()
    if threads < 1:
        raise UsageError("--threads must be >= 1")

    def progress(rows):
        if args.verbose:
            for r in rows:
                print(f"{r.decoder} pi={r.pi} pd={r.pd} ps={r.ps} M={r.M}: ber={r.ber_info:.3g} "
                      f"erasures={r.erasure_rate:.3g} nu={r.nu:.3g}", file=sys.stderr)

    rows = harness.run_experiment(cfg, threads=threads, timing=not args.no_timing, progress=progress)
    text = harness.emit_results(rows, cfg.out, cfg.format)
    if cfg.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    failures = run_selftest(verbose=not args.quiet)
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def _add_code_args(p):
    p.add_argument("--config", default="cc2", help="code config path or bundled name (example1, cc1, cc2)")
    p.add_argument("--N", type=int, default=None, help="override the codeword length")


def _add_channel_args(p):
    p.add_argument("--pi", type=float, default=0.0)
    p.add_argument("--pd", type=float, default=0.0)
    p.add_argument("--ps", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="syndec", description="Multi-trace decoding of convolutional codes over IDS channels.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode information bits")
    _add_code_args(p)
    p.add_argument("--info", help="information bits as a 0/1 string, or - for stdin")
    p.add_argument("--seed", type=int, default=0, help="seed for random information bits when --info is absent")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("transmit", help="send a codeword through the channel")
    p.add_argument("--codeword", required=True, help="0/1 string, or - for stdin")
    _add_channel_args(p)
    p.add_argument("-M", type=int, default=1, help="number of traces")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="trace file (default stdout)")
    p.set_defaults(func=cmd_transmit)

    p = sub.add_parser("decode", help="decode traces from a trace file")
    _add_code_args(p)
    _add_channel_args(p)
    p.add_argument("--traces", required=True, help="trace file written by transmit")
    p.add_argument("--decoder", choices=harness.DECODERS, default="bistack")
    p.add_argument("--slack", type=int, default=None)
    p.add_argument("--capacity", type=int, default=StackParams.capacity)
    p.add_argument("--max-expansions", type=int, default=StackParams.max_expansions)
    p.add_argument("--seed", type=int, default=0, help="seed for erasure guessing")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="run a Monte Carlo experiment")
    p.add_argument("--config", required=True, help="experiment TOML")
    p.add_argument("--seed", type=int)
    p.add_argument("--decoder", action="append", help="decoder(s) to run; repeat or comma-separate")
    p.add_argument("--trials", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int, help="worker threads (default: all cores); results do not depend on it")
    p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    except (UndecodableTraceError, RuntimeError, OSError, ValueError) as e:
        print(f"syndec: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
