"""
Line-oriented experiment description.

One directive per line, ``#`` starts a comment, blank lines are ignored::

    bs BS1 t=0.5773502691896257
    mirror A freq_hz=1100 amp_phase=1e-3 amp_deflect=0
    phase inner=0.22 outer=0.11
    convention experiment_matched
    detector intensity_sum
    sim rate_hz=50000 duration_s=1 window=hann

``t`` is the amplitude transmissivity. Phases are radians. The ``phase``
line is optional (default 0, 0) and so is ``convention`` (default
experiment_matched). Parsing stops at the first error.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

from .optics import MIRRORS, NmziConfig, SignConvention, SplitRatio
from .signalsim import (
    MAX_VIBRATION,
    DetectorModel,
    MirrorVibration,
    SimParams,
    VibrationSpec,
    Window,
)

__all__ = ["ErrorKind", "ParseError", "ExperimentFile", "parse", "serialize"]

BEAM_SPLITTERS = ("BS1", "BS2", "BS3", "BS4")
_FLOAT = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
_TOKEN = re.compile(r"\S+")


class ErrorKind(enum.Enum):
    UnknownKeyword = "UnknownKeyword"
    DuplicateElement = "DuplicateElement"
    MissingElement = "MissingElement"
    ValueOutOfRange = "ValueOutOfRange"
    MalformedNumber = "MalformedNumber"


class ParseError(Exception):
    def __init__(self, line: int, column: int, kind: ErrorKind, message: str):
        super().__init__(f"{line}:{column} {kind.value} {message}")
        self.line = line
        self.column = column
        self.kind = kind
        self.message = message


@dataclass(frozen=True)
class ExperimentFile:
    config: NmziConfig
    vibrations: VibrationSpec
    detector: DetectorModel
    sim: SimParams
    source_map: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass
class _Token:
    text: str
    line: int
    column: int


class _Line:
    def __init__(self, number: int, raw: str):
        self.number = number
        body = raw.split("#", 1)[0]
        self.tokens = [_Token(m.group(), number, m.start() + 1) for m in _TOKEN.finditer(body)]

    def error(self, token: _Token | None, kind: ErrorKind, message: str) -> ParseError:
        column = token.column if token is not None else 1
        return ParseError(self.number, column, kind, message)


def _number(line: _Line, token: _Token, text: str, offset: int) -> float:
    if not _FLOAT.match(text):
        raise ParseError(line.number, token.column + offset, ErrorKind.MalformedNumber,
                         f"not a number: {text!r}")
    return float(text)


def _keyvalues(line: _Line, anchor: _Token, tokens: list[_Token], spec: dict) -> dict:
    """Parse key=value tokens; spec maps key -> 'float' or a set of words."""
    values, seen = {}, {}
    for tok in tokens:
        key, eq, text = tok.text.partition("=")
        if not eq or key not in spec:
            raise line.error(tok, ErrorKind.UnknownKeyword, f"unexpected {tok.text!r}")
        if key in seen:
            raise line.error(tok, ErrorKind.DuplicateElement, f"{key} given twice")
        seen[key] = tok
        offset = len(key) + 1
        if spec[key] == "float":
            value = _number(line, tok, text, offset)
            if not math.isfinite(value):
                raise ParseError(line.number, tok.column + offset,
                                 ErrorKind.ValueOutOfRange, "value must be finite")
            values[key] = (value, tok, offset)
        else:
            if text not in spec[key]:
                raise ParseError(line.number, tok.column + offset, ErrorKind.UnknownKeyword,
                                 f"{key} must be one of {sorted(spec[key])}")
            values[key] = (text, tok, offset)
    for key in spec:
        if key not in values:
            raise line.error(anchor, ErrorKind.MissingElement, f"missing {key}=")
    return values


def _check(line: _Line, item, ok: bool, message: str) -> None:
    value, tok, offset = item
    if not ok:
        raise ParseError(line.number, tok.column + offset, ErrorKind.ValueOutOfRange, message)


def parse(text: str) -> ExperimentFile:
    """Parse an experiment description; raises ParseError on the first problem."""
    lines = text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    bs: dict = {}
    mirrors: dict = {}
    singles: dict = {}
    source: dict = {}

    for number, raw in enumerate(lines, start=1):
        line = _Line(number, raw)
        if not line.tokens:
            continue
        head, rest = line.tokens[0], line.tokens[1:]
        keyword = head.text

        if keyword in ("bs", "mirror"):
            names = BEAM_SPLITTERS if keyword == "bs" else MIRRORS
            if not rest:
                raise line.error(head, ErrorKind.MissingElement, f"{keyword} needs a name")
            name_tok = rest[0]
            if name_tok.text not in names:
                raise line.error(name_tok, ErrorKind.UnknownKeyword,
                                 f"unknown {keyword} {name_tok.text!r}")
            table = bs if keyword == "bs" else mirrors
            if name_tok.text in table:
                raise line.error(name_tok, ErrorKind.DuplicateElement,
                                 f"{name_tok.text} already defined on line "
                                 f"{source[name_tok.text]}")
            if keyword == "bs":
                kv = _keyvalues(line, head, rest[1:], {"t": "float"})
                _check(line, kv["t"], 0.0 <= kv["t"][0] <= 1.0, "t must lie in [0, 1]")
                table[name_tok.text] = SplitRatio(kv["t"][0])
            else:
                kv = _keyvalues(line, head, rest[1:], {
                    "freq_hz": "float", "amp_phase": "float", "amp_deflect": "float"})
                _check(line, kv["freq_hz"], kv["freq_hz"][0] > 0, "freq_hz must be positive")
                for key in ("amp_phase", "amp_deflect"):
                    _check(line, kv[key], 0.0 <= kv[key][0] <= MAX_VIBRATION,
                           f"{key} must lie in [0, {MAX_VIBRATION}]")
                table[name_tok.text] = MirrorVibration(
                    kv["freq_hz"][0], kv["amp_phase"][0], kv["amp_deflect"][0])
            source[name_tok.text] = number
            continue

        if keyword not in ("phase", "convention", "detector", "sim"):
            raise line.error(head, ErrorKind.UnknownKeyword, f"unknown directive {keyword!r}")
        if keyword in singles:
            raise line.error(head, ErrorKind.DuplicateElement,
                             f"{keyword} already given on line {source[keyword]}")
        source[keyword] = number

        if keyword == "phase":
            kv = _keyvalues(line, head, rest, {"inner": "float", "outer": "float"})
            singles[keyword] = (kv["inner"][0], kv["outer"][0])
        elif keyword in ("convention", "detector"):
            enum_type = SignConvention if keyword == "convention" else DetectorModel
            words = {e.value for e in enum_type}
            if not rest:
                raise line.error(head, ErrorKind.MissingElement, f"{keyword} needs a value")
            if rest[0].text not in words:
                raise line.error(rest[0], ErrorKind.UnknownKeyword,
                                 f"{keyword} must be one of {sorted(words)}")
            if len(rest) > 1:
                raise line.error(rest[1], ErrorKind.UnknownKeyword,
                                 f"unexpected {rest[1].text!r}")
            singles[keyword] = enum_type(rest[0].text)
        else:
            kv = _keyvalues(line, head, rest, {
                "rate_hz": "float", "duration_s": "float",
                "window": {w.value for w in Window}})
            _check(line, kv["rate_hz"], kv["rate_hz"][0] > 0, "rate_hz must be positive")
            _check(line, kv["duration_s"], kv["duration_s"][0] > 0,
                   "duration_s must be positive")
            singles[keyword] = SimParams(
                kv["rate_hz"][0], kv["duration_s"][0], Window(kv["window"][0]))

    end = len(lines) + 1
    for name in BEAM_SPLITTERS:
        if name not in bs:
            raise ParseError(end, 1, ErrorKind.MissingElement, f"beam splitter {name} missing")
    for name in MIRRORS:
        if name not in mirrors:
            raise ParseError(end, 1, ErrorKind.MissingElement, f"mirror {name} missing")
    for name in ("detector", "sim"):
        if name not in singles:
            raise ParseError(end, 1, ErrorKind.MissingElement, f"{name} line missing")

    phi, chi = singles.get("phase", (0.0, 0.0))
    convention = singles.get("convention", SignConvention.EXPERIMENT_MATCHED)
    config = NmziConfig(*(bs[n] for n in BEAM_SPLITTERS), phi=phi, chi=chi,
                        convention=convention)
    return ExperimentFile(config, VibrationSpec(mirrors), singles["detector"],
                          singles["sim"], source)


def serialize(exp: ExperimentFile) -> str:
    """Canonical text; floats use the shortest round-trip repr."""
    cfg = exp.config
    out = [f"bs {name} t={split.t!r}" for name, split in zip(BEAM_SPLITTERS, cfg.ratios)]
    for m in MIRRORS:
        v = exp.vibrations[m]
        out.append(f"mirror {m} freq_hz={v.freq!r} amp_phase={v.amp_phase!r} "
                   f"amp_deflect={v.amp_deflect!r}")
    out.append(f"phase inner={cfg.phi!r} outer={cfg.chi!r}")
    out.append(f"convention {cfg.convention.value}")
    out.append(f"detector {exp.detector.value}")
    s = exp.sim
    out.append(f"sim rate_hz={s.sample_rate!r} duration_s={s.duration!r} "
               f"window={s.window.value}")
    return "\n".join(out) + "\n"
