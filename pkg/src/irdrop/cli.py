"""``irdrop`` command line.

Subcommands: extract, solve, predict, eval, adjust, inspect.  Exit status is
0 on success, 1 on usage errors and 2 on data errors (bad netlist, singular
system, shape or file-format problems).  ``--json`` prints a machine-readable
summary on stdout.  ``IRDROP_THREADS`` caps BLAS threads.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .augment import METHODS, AdjustMethod, adjust, adjust_offsets, make_rng, pick_method
from .errors import IrdropError
from .features import extract_all
from .graph import DEFAULT_VDD, build_graph, validate
from .grid import DEFAULT_CELL_NM, MapStack
from .irfm import read_irfm, write_csv, write_irfm
from .metrics import evaluate
from .model import DIVISOR, ModelConfig, build_model, forward, load
from .solver import ir_drop_map, solve_ir_drop
from .spice import read_netlist

log = logging.getLogger("irdrop")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _graph(args):
    return build_graph(read_netlist(args.netlist), vdd=args.vdd)


def _emit(args, payload, text):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def cmd_extract(args):
    graph = _graph(args)
    stack = extract_all(graph, truth_solver=args.with_truth, cell_nm=args.cell_nm, tol=args.tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, name in enumerate(stack.names):
        path = out / f"{name}.irfm"
        write_irfm(path, stack.channel(i))
        files.append(str(path))
        if args.csv:
            write_csv(out / f"{name}.csv", stack.data[i])
    write_irfm(out / "stack.irfm", stack)
    files.append(str(out / "stack.irfm"))
    _emit(args, {"channels": list(stack.names), "shape": [stack.c, stack.h, stack.w],
                 "cell_nm": stack.cell_nm, "files": files},
          f"wrote {stack.c} channels of {stack.h}x{stack.w} to {out}")


def cmd_solve(args):
    graph = _graph(args)
    volts = solve_ir_drop(graph, tol=args.tol)
    fmap = ir_drop_map(graph, volts, cell_nm=args.cell_nm)
    write_irfm(args.out, fmap)
    if args.csv:
        write_csv(Path(args.out).with_suffix(".csv"), fmap.data)
    worst = float(volts.ir_drop.max()) * 1e3
    _emit(args, {"iterations": volts.iterations, "residual": volts.residual,
                 "worst_node_drop_mV": worst, "shape": [fmap.h, fmap.w], "file": args.out},
          f"solved in {volts.iterations} CG iterations (residual {volts.residual:.2e}); "
          f"worst node drop {worst:.4f} mV -> {args.out}")


def cmd_predict(args):
    stack = read_irfm(args.input)
    model = load(args.weights) if args.weights else build_model(ModelConfig(), seed=args.seed)
    cin = model.config.in_channels
    if stack.c < cin:
        raise IrdropError(f"model needs {cin} input channels, {args.input} has {stack.c}")
    x = stack.data[:cin]
    h, w = stack.h, stack.w
    # zero pad bottom/right (top-left corner alignment) up to the next multiple of 16
    ph, pw = -h % DIVISOR, -w % DIVISOR
    x = np.pad(x, ((0, 0), (0, ph), (0, pw)))
    y = forward(model, x)[:, :h, :w]
    write_irfm(args.out, MapStack(y, ("V",), stack.cell_nm))
    _emit(args, {"shape": [1, h, w], "padded": [h + ph, w + pw], "file": args.out,
                 "parameter_count": model.parameter_count},
          f"predicted {h}x{w} map -> {args.out}")


def cmd_eval(args):
    pred, truth = read_irfm(args.pred), read_irfm(args.truth)
    # multi-channel files contribute their last channel (the IR drop map)
    report = evaluate(pred.channel(pred.c - 1), truth.channel(truth.c - 1))
    d = report.to_dict()
    _emit(args, d, "\n".join(f"{k:16s} {v}" for k, v in d.items()))


def cmd_adjust(args):
    stack = read_irfm(args.input)
    rng = make_rng(args.seed)
    method = AdjustMethod.from_name(args.method) if args.method else pick_method(rng)
    # offsets come from a copy of the stream so they can be reported
    state = rng.bit_generator.state
    offsets = adjust_offsets(stack.h, stack.w, args.size, method, rng)
    rng.bit_generator.state = state
    out = adjust(stack, args.size, method, rng)
    write_irfm(args.out, out)
    _emit(args, {"method": method.name, "size": args.size, "offsets": list(offsets),
                 "input_shape": [stack.c, stack.h, stack.w], "file": args.out},
          f"{method.name}: {stack.h}x{stack.w} -> {args.size}x{args.size} "
          f"(offsets {offsets}) -> {args.out}")


def cmd_inspect(args):
    diag = validate(_graph(args))
    _emit(args, diag.to_dict(), "\n".join(f"{k:20s} {v}" for k, v in diag.to_dict().items()))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="irdrop", description="Static IR drop feature extraction, solving and prediction.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, netlist=True):
        sp.add_argument("--json", action="store_true", help="print a JSON summary")
        if netlist:
            sp.add_argument("--netlist", required=True, help="SPICE netlist (.sp)")
            sp.add_argument("--vdd", type=float, default=DEFAULT_VDD, help="supply voltage (V)")

    sp = sub.add_parser("extract", help="write the seven feature maps (and optionally the truth)")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--cell-nm", type=int, default=DEFAULT_CELL_NM)
    sp.add_argument("--with-truth", action="store_true", help="also solve and add the IR drop map")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--csv", action="store_true", help="also write one CSV per channel")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("solve", help="golden IR drop map from the conductance solve")
    common(sp)
    sp.add_argument("--out", required=True, help="output .irfm")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--cell-nm", type=int, default=DEFAULT_CELL_NM)
    sp.add_argument("--csv", action="store_true")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("predict", help="run the model on a feature stack")
    common(sp, netlist=False)
    sp.add_argument("--in", dest="input", required=True, help="feature stack .irfm")
    sp.add_argument("--out", required=True)
    sp.add_argument("--weights", help="IRWT weights file; random weights from --seed if omitted")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("eval", help="score a predicted IR drop map against the truth (mV)")
    common(sp, netlist=False)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("adjust", help="pad/crop a stack to size x size")
    common(sp, netlist=False)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--size", type=int, required=True)
    sp.add_argument("--method", choices=[m.name for m in METHODS],
                    help="adjustment method; drawn from --seed when omitted")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_adjust)

    sp = sub.add_parser("inspect", help="graph diagnostics")
    common(sp)
    sp.set_defaults(func=cmd_inspect)
    return p


def _limit_threads():
    n = os.environ.get("IRDROP_THREADS")
    if not n:
        return None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(n))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "adjust" and args.size < 1:
        print("irdrop: error: --size must be >= 1", file=sys.stderr)
        return 1
    limiter = _limit_threads()
    try:
        args.func(args)
    except (IrdropError, OSError, ValueError) as exc:
        print(f"irdrop: {exc}", file=sys.stderr)
        return 2
    finally:
        if limiter is not None:
            limiter.unregister()
    return 0


def main() -> None:
    sys.exit(run())
