"""Protocol messages and their newline-delimited wire encoding.

Each record is a JSON object ``{"type", "session", "unit", "payload"}``; unit
is the round index and every bit vector inside the payload is hex, first bit
most significant. Decoding needs the scheme widths (k, m_c), which the setup
record carries in its public key.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Union

from ..crypto import Ciphertext, PublicKey, bits_to_hex, hex_to_bits
from ..gadgets import GadgetOutcome


class MessageError(ValueError):
    pass


# field names no message may ever carry
FORBIDDEN_FIELDS = frozenset({"sk", "t", "secret", "secret_key", "d_hat", "dhat", "x", "z",
                              "frame", "pad", "pads", "selection", "program_plain", "claw"})


@dataclass(frozen=True)
class SetupMessage:
    session: str
    pk: PublicKey
    basis: tuple[int, ...]
    n: int
    units: int
    scheme: str
    y_hats: tuple[Ciphertext, ...]
    program: tuple[int, ...] = ()
    steps: int = 0


@dataclass(frozen=True)
class EncryptedStep:
    session: str
    round: int
    y_hats: tuple[Ciphertext, ...]


@dataclass(frozen=True)
class OutcomeReport:
    session: str
    round: int
    outcomes: tuple[GadgetOutcome, ...]


@dataclass(frozen=True)
class FinalRequest:
    session: str
    round: int


@dataclass(frozen=True)
class FinalResult:
    session: str
    bits: tuple[int, ...]


@dataclass(frozen=True)
class Verdict:
    """Client-side closing record of a transcript (never sent to the server)."""

    session: str
    answer: tuple[int, ...]
    passed: bool
    restarts: int = 0


Message = Union[SetupMessage, EncryptedStep, OutcomeReport, FinalRequest, FinalResult, Verdict]
MESSAGE_TYPES = (SetupMessage, EncryptedStep, OutcomeReport, FinalRequest, FinalResult, Verdict)


def schema_fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _bits_hex(bits) -> str:
    return bits_to_hex(bits)


def _outcome_payload(o: GadgetOutcome) -> list:
    return [_bits_hex(o.Y), _bits_hex(o.R), o.A]


def encode(msg: Message) -> str:
    """One JSON line (without the trailing newline)."""
    if isinstance(msg, SetupMessage):
        unit = 0
        payload = {"pk": msg.pk.to_dict(), "basis": _bits_hex(msg.basis), "n": msg.n,
                   "units": msg.units, "scheme": msg.scheme, "steps": msg.steps,
                   "y_hats": [c.hex() for c in msg.y_hats],
                   "program": _bits_hex(msg.program), "program_len": len(msg.program)}
    elif isinstance(msg, EncryptedStep):
        unit, payload = msg.round, {"y_hats": [c.hex() for c in msg.y_hats]}
    elif isinstance(msg, OutcomeReport):
        unit, payload = msg.round, {"outcomes": [_outcome_payload(o) for o in msg.outcomes]}
    elif isinstance(msg, FinalRequest):
        unit, payload = msg.round, {}
    elif isinstance(msg, FinalResult):
        unit, payload = -1, {"bits": _bits_hex(msg.bits), "len": len(msg.bits)}
    elif isinstance(msg, Verdict):
        unit, payload = -1, {"answer": _bits_hex(msg.answer), "len": len(msg.answer),
                             "passed": bool(msg.passed), "restarts": msg.restarts}
    else:
        raise MessageError(f"cannot encode {type(msg).__name__}")
    record = {"type": type(msg).__name__, "session": msg.session, "unit": unit, "payload": payload}
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class Codec:
    """Stateful decoder: learns (k, m_c) from the setup record."""

    def __init__(self, k: int | None = None, m_c: int | None = None):
        self.k, self.m_c = k, m_c

    def decode(self, line: str) -> Message:
        try:
            rec = json.loads(line)
            kind, session, unit, p = rec["type"], rec["session"], rec["unit"], rec["payload"]
        except (ValueError, KeyError, TypeError) as exc:
            raise MessageError(f"malformed record: {line[:80]!r}") from exc
        try:
            return self._decode(kind, session, unit, p)
        except (KeyError, TypeError, ValueError) as exc:
            raise MessageError(f"bad {kind} payload: {exc}") from exc

    def _need_widths(self):
        if self.k is None:
            raise MessageError("setup record must come first")

    def _decode(self, kind, session, unit, p) -> Message:
        if kind == "SetupMessage":
            pk = PublicKey.from_dict(p["pk"])
            self.k, self.m_c = pk.k, pk.m_c
            n = int(p["n"])
            return SetupMessage(session, pk, hex_to_bits(p["basis"], n), n, int(p["units"]), p["scheme"],
                                tuple(Ciphertext.from_hex(h, pk.m_c) for h in p["y_hats"]),
                                hex_to_bits(p["program"], int(p["program_len"])), int(p["steps"]))
        if kind == "EncryptedStep":
            self._need_widths()
            return EncryptedStep(session, int(unit), tuple(Ciphertext.from_hex(h, self.m_c) for h in p["y_hats"]))
        if kind == "OutcomeReport":
            self._need_widths()
            outs = tuple(GadgetOutcome(hex_to_bits(y, self.m_c), hex_to_bits(r, self.k + 1),
                                       None if a is None else int(a)) for y, r, a in p["outcomes"])
            return OutcomeReport(session, int(unit), outs)
        if kind == "FinalRequest":
            return FinalRequest(session, int(unit))
        if kind == "FinalResult":
            return FinalResult(session, hex_to_bits(p["bits"], int(p["len"])))
        if kind == "Verdict":
            return Verdict(session, hex_to_bits(p["answer"], int(p["len"])), bool(p["passed"]),
                           int(p.get("restarts", 0)))
        raise MessageError(f"unknown record type {kind!r}")


def payload_keys(line: str) -> set[str]:
    """Every key appearing anywhere in a record, for schema-level secrecy checks."""
    keys: set[str] = set()

    def walk(v):
        if isinstance(v, dict):
            for k, sub in v.items():
                keys.add(k)
                walk(sub)
        elif isinstance(v, list):
            for sub in v:
                walk(sub)

    walk(json.loads(line))
    return keys
