"""Command line entry point: keygen, compile, run, verify, cost, selftest."""
from __future__ import annotations

import argparse
import json
import sys

from .compiler import (
    BrickworkEmulation,
    CompileError,
    compile_direct,
    compile_indirect,
    cost_report,
    load_circuit,
    parse_traps,
    pairs_a,
    pairs_b,
)
from .crypto import CryptoError, SchemeParams, keygen


def _params(args) -> SchemeParams:
    return SchemeParams(args.k, args.mc, args.seed)


def cmd_keygen(args) -> int:
    pk, sk = keygen(_params(args))
    print(json.dumps({"public": pk.to_dict(), "secret": sk.to_dict()}, indent=2))
    return 0


def _compile(args):
    circuit = load_circuit(args.circuit)
    if args.scheme == "direct":
        return circuit, compile_direct(circuit)
    return circuit, compile_indirect(circuit, args.steps)


def cmd_compile(args) -> int:
    circuit, program = _compile(args)
    if args.scheme == "direct":
        n = program.n
        print(f"direct program: {n} qubits, {len(program.units)} units, {program.slots_per_unit} slots per unit")
        for u, unit in enumerate(program.units):
            print(f"unit {u}: H={''.join(map(str, unit.h))} phase={unit.phase} "
                  f"cZ{pairs_a(n)}={unit.cz_a} cZ{pairs_b(n)}={unit.cz_b} X={unit.paulis}")
    else:
        print(f"indirect program: {program.n} qubits, {program.m} steps")
        for l, step in enumerate(program.steps):
            print(f"step {l} ({program.layer_kind(l)}): {''.join(map(str, step))}")
    return 0


def cmd_run(args) -> int:
    from .protocol import TcpTransport, run_session
    from .protocol.transport import parse_address

    circuit = load_circuit(args.circuit)
    traps = []
    if args.traps:
        with open(args.traps) as fh:
            traps = parse_traps(fh.read())
    transport = None
    if args.tcp:
        host, port = parse_address(args.tcp)
        transport = TcpTransport(host, port)
    rec = run_session(circuit, _params(args), traps, transport, args.seed, args.scheme, args.steps,
                      transcript_path=args.transcript)
    print(f"session {rec.session} ({rec.scheme}, {len(rec.transcript)} records, {rec.restarts} restarts)")
    print("answer " + "".join(map(str, rec.answer)))
    print("traps " + ("pass" if rec.passed else "FAIL"))
    return 0 if rec.passed else 2


def cmd_verify(args) -> int:
    from .protocol import verify

    rep = verify(args.transcript)
    for err in rep.errors:
        print("error: " + err)
    print(f"{'ok' if rep.ok else 'INVALID'}: {rep.sessions} session(s), {rep.rounds} rounds, "
          f"traps {'pass' if rep.passed else 'FAIL' if rep.passed is not None else 'n/a'}")
    return 0 if rep.ok else 1


def cmd_cost(args) -> int:
    if args.brickwork:
        rep = cost_report(BrickworkEmulation(), args.k, args.mc)
    else:
        _, program = _compile(args)
        rep = cost_report(program, args.k, args.mc)
    print(f"scheme {rep.scheme}: U_f applications {rep.uf_count}, encrypted bits {rep.encrypted_bits}, "
          f"units {rep.layer_units}, server qubits {rep.server_qubits}")
    if rep.per_qubit_per_unit is not None:
        print(f"per qubit per unit: {rep.per_qubit_per_unit}")
    if rep.reference_bits is not None:
        print(f"reference (measurement-based): {rep.reference_bits} bits")
    for gate, count in rep.breakdown.items():
        print(f"  {gate}: {count}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all

    ok = True
    for res in run_all(SchemeParams(args.k, args.mc, args.seed)):
        ok &= res.passed
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.branches} branches, "
              f"worst fidelity {res.worst_fidelity:.12f}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blindqc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def crypto_opts(sp, k=3, mc=4):
        sp.add_argument("--k", type=int, default=k)
        sp.add_argument("--mc", type=int, default=mc)
        sp.add_argument("--seed", type=int, default=0)

    def scheme_opts(sp):
        sp.add_argument("--scheme", choices=("direct", "indirect"), default="direct")
        sp.add_argument("--steps", type=int, default=None, help="layer count for the indirect scheme")

    sp = sub.add_parser("keygen", help="sample a key pair")
    crypto_opts(sp)
    sp.set_defaults(fn=cmd_keygen)

    sp = sub.add_parser("compile", help="compile a circuit file")
    sp.add_argument("circuit")
    scheme_opts(sp)
    sp.set_defaults(fn=cmd_compile)

    sp = sub.add_parser("run", help="run a client/server session")
    sp.add_argument("circuit")
    sp.add_argument("--tcp", metavar="HOST:PORT")
    sp.add_argument("--traps", metavar="FILE")
    sp.add_argument("--transcript", metavar="FILE", help="append the session records here")
    scheme_opts(sp)
    crypto_opts(sp, k=2, mc=3)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("verify", help="check a recorded transcript")
    sp.add_argument("transcript")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("cost", help="resource count of a compiled circuit")
    sp.add_argument("circuit", nargs="?")
    sp.add_argument("--brickwork", action="store_true", help="cost of the two-row brickwork emulation unit")
    scheme_opts(sp)
    crypto_opts(sp)
    sp.set_defaults(fn=cmd_cost)

    sp = sub.add_parser("selftest", help="exhaustive gadget checks")
    crypto_opts(sp, k=2, mc=3)
    sp.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "cost" and not args.brickwork and not args.circuit:
        print("cost: need a circuit file or --brickwork", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (CompileError, CryptoError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
