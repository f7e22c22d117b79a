"""ABC notation parsing, canonical serialization, and tune validation.

Supported subset (see docs/wire.md for the full table): headers X T M L Q K,
note letters A-G/a-g with ' and , octave marks, accidentals ^ _ =, length
multipliers (2, /2, 3/2, /), rests z/x, chords [..], single broken-rhythm
markers > and <, and plain barlines. Decorations, slurs, grace notes, chord
symbols, and unknown header fields are ignored. Ties, tuplets, repeats,
voices, lyrics, and non-major keys are rejected with diagnostics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from ..errors import WeaveError
from .model import (
    DEFAULT_QPM,
    DEFAULT_UNIT,
    KNOWN_TONICS,
    AbcTune,
    Chord,
    Key,
    Note,
    Rest,
    key_signature,
    note_midi,
)


@dataclass(frozen=True)
class Diagnostic:
    line: int  # 1-based
    column: int  # 1-based
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class AbcParseError(WeaveError):
    """Raised when a tune cannot be parsed; carries positioned diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


_KEY_RE = re.compile(r"^([A-Ga-g])\s*(#|b)?\s*(maj(?:or)?)?\s*$", re.IGNORECASE)
_METER_RE = re.compile(r"^(\d+)\s*/\s*(\d+)$")
_TEMPO_RE = re.compile(r"^(?:(\d+)\s*/\s*(\d+)\s*=\s*)?(\d+)$")


class _Scanner:
    def __init__(self, text: str, line: int, col: int = 1):
        self.text = text
        self.pos = 0
        self.line = line
        self.col0 = col

    @property
    def column(self) -> int:
        return self.col0 + self.pos

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    def done(self) -> bool:
        return self.pos >= len(self.text)


def _parse_length(scan: _Scanner, diags: list[Diagnostic]) -> Fraction:
    num = 0
    while scan.peek().isdigit():
        num = num * 10 + int(scan.take())
    num = num or 1
    den = 1
    while scan.peek() == "/":
        scan.take()
        if scan.peek().isdigit():
            d = 0
            while scan.peek().isdigit():
                d = d * 10 + int(scan.take())
            if d == 0:
                diags.append(Diagnostic(scan.line, scan.column, "malformed length: /0"))
                d = 1
            den *= d
        else:
            den *= 2
    return Fraction(num, den)


def _parse_note(scan: _Scanner, diags: list[Diagnostic], with_length: bool = True) -> Note | None:
    accidental = "none"
    ch = scan.peek()
    if ch in "^_=":
        scan.take()
        if ch == "^" and scan.peek() == "^" or ch == "_" and scan.peek() == "_":
            diags.append(Diagnostic(scan.line, scan.column, "unsupported double accidental"))
            scan.take()
        accidental = {"^": "sharp", "_": "flat", "=": "natural"}[ch]
    letter_ch = scan.peek()
    if not letter_ch or letter_ch not in "ABCDEFGabcdefg":
        diags.append(Diagnostic(scan.line, scan.column, f"expected note letter, got {letter_ch!r}"))
        if letter_ch:
            scan.take()
        return None
    scan.take()
    octave = 1 if letter_ch.islower() else 0
    while scan.peek() in ("'", ","):
        octave += 1 if scan.take() == "'" else -1
    length = _parse_length(scan, diags) if with_length else Fraction(1)
    return Note(letter=letter_ch.upper(), octave_shift=octave, accidental=accidental, length=length)


def _parse_chord(scan: _Scanner, diags: list[Diagnostic]):
    start_col = scan.column
    scan.take()  # consume [
    notes: list[Note] = []
    inner_lengths: set[Fraction] = set()
    while not scan.done() and scan.peek() != "]":
        if scan.peek().isspace():
            scan.take()
            continue
        note = _parse_note(scan, diags)
        if note is None:
            return None
        inner_lengths.add(note.length)
        notes.append(Note(note.letter, note.octave_shift, note.accidental, Fraction(1)))
    if scan.done():
        diags.append(Diagnostic(scan.line, start_col, "unterminated chord"))
        return None
    scan.take()  # consume ]
    outer = _parse_length(scan, diags)
    if not notes:
        diags.append(Diagnostic(scan.line, start_col, "empty chord"))
        return None
    if len(inner_lengths) > 1:
        diags.append(Diagnostic(scan.line, start_col, "chord notes must share one length"))
        return None
    # Fold the (shared) inner length into the chord multiplier so [C2E2G2]
    # and [CEG]2 normalize to the same structure.
    return Chord(notes=tuple(notes), length=inner_lengths.pop() * outer)


def _apply_broken(prev, cur, marker: str):
    grow, shrink = (Fraction(3, 2), Fraction(1, 2))
    if marker == "<":
        grow, shrink = shrink, grow
    scale_prev, scale_cur = grow, shrink

    def rescale(el, factor):
        if isinstance(el, Note):
            return Note(el.letter, el.octave_shift, el.accidental, el.length * factor)
        if isinstance(el, Rest):
            return Rest(el.length * factor)
        return Chord(el.notes, el.length * factor)

    return rescale(prev, scale_prev), rescale(cur, scale_cur)


def _parse_headers(lines: list[tuple[int, str]], diags: list[Diagnostic]) -> tuple[AbcTune, int]:
    tune = AbcTune()
    saw_meter = saw_key = False
    saw_unit = saw_tempo = False
    body_start = len(lines)
    for idx, (line_no, line) in enumerate(lines):
        match = re.match(r"^([A-Za-z]):(.*)$", line)
        if not match:
            diags.append(Diagnostic(line_no, 1, f"expected header field, got {line[:20]!r}"))
            continue
        field_name, value = match.group(1), match.group(2).strip()
        if field_name == "X":
            try:
                tune.index = int(value)
            except ValueError:
                diags.append(Diagnostic(line_no, 3, f"malformed tune index {value!r}"))
        elif field_name == "T":
            tune.title = value
        elif field_name == "M":
            saw_meter = True
            if value == "C":
                tune.meter = (4, 4)
            elif value == "C|":
                tune.meter = (2, 2)
            else:
                m = _METER_RE.match(value)
                if m and int(m.group(1)) > 0 and int(m.group(2)) > 0:
                    tune.meter = (int(m.group(1)), int(m.group(2)))
                else:
                    diags.append(Diagnostic(line_no, 3, f"malformed meter {value!r}"))
        elif field_name == "L":
            saw_unit = True
            m = _METER_RE.match(value)
            if m and int(m.group(1)) > 0 and int(m.group(2)) > 0:
                tune.unit_length = Fraction(int(m.group(1)), int(m.group(2)))
            else:
                diags.append(Diagnostic(line_no, 3, f"malformed unit length {value!r}"))
        elif field_name == "Q":
            saw_tempo = True
            m = _TEMPO_RE.match(value)
            if not m:
                diags.append(Diagnostic(line_no, 3, f"malformed tempo {value!r}"))
            else:
                beats = int(m.group(3))
                if m.group(1):
                    qpm = round(beats * Fraction(int(m.group(1)), int(m.group(2))) * 4)
                else:
                    qpm = beats
                if qpm < 1:
                    diags.append(Diagnostic(line_no, 3, f"tempo {value!r} is not positive"))
                else:
                    tune.tempo_qpm = qpm
        elif field_name == "K":
            saw_key = True
            m = _KEY_RE.match(value)
            if not m:
                diags.append(Diagnostic(line_no, 3, f"unsupported key {value!r} (major keys only)"))
            else:
                tonic = m.group(1).upper() + ({"#": "#", "b": "b"}.get(m.group(2) or "", ""))
                if tonic not in KNOWN_TONICS:
                    diags.append(Diagnostic(line_no, 3, f"unknown major key tonic {tonic!r}"))
                else:
                    tune.key = Key(tonic=tonic)
            body_start = idx + 1
            break
        elif field_name == "V":
            diags.append(Diagnostic(line_no, 1, "unsupported multiple voices"))
        # other header fields (C:, O:, R:, ...) carry no musical meaning here
    if not saw_meter:
        diags.append(Diagnostic(lines[0][0] if lines else 1, 1, "missing meter (M:) header"))
    if not saw_key:
        diags.append(Diagnostic(lines[-1][0] if lines else 1, 1, "missing key (K:) header"))
    if not saw_unit:
        tune.unit_length = DEFAULT_UNIT
    if not saw_tempo:
        tune.tempo_qpm = DEFAULT_QPM
    return tune, body_start


def _parse_body(tune: AbcTune, lines: list[tuple[int, str]], diags: list[Diagnostic]) -> None:
    bars: list[tuple] = []
    current: list = []
    pending_broken: str | None = None

    def flush_bar():
        nonlocal pending_broken
        if pending_broken is not None:
            diags.append(Diagnostic(line_no, scan.column, "broken rhythm marker at bar end"))
            pending_broken = None
        if current:
            bars.append(tuple(current))
            current.clear()

    def push(element):
        nonlocal pending_broken
        if pending_broken is not None:
            if not current:
                diags.append(Diagnostic(line_no, scan.column, "broken rhythm needs a preceding note"))
            else:
                current[-1], element = _apply_broken(current[-1], element, pending_broken)
            pending_broken = None
        current.append(element)

    for line_no, raw in lines:
        line = raw.split("%", 1)[0].rstrip("\\").rstrip()
        if not line:
            continue
        header = re.match(r"^([A-Za-z]):", line)
        if header:
            field_name = header.group(1)
            if field_name == "V":
                diags.append(Diagnostic(line_no, 1, "unsupported multiple voices"))
            elif field_name == "w":
                diags.append(Diagnostic(line_no, 1, "unsupported lyrics"))
            else:
                diags.append(Diagnostic(line_no, 1, f"unsupported mid-tune field {field_name}:"))
            continue
        scan = _Scanner(line, line_no)
        while not scan.done():
            ch = scan.peek()
            if ch.isspace():
                scan.take()
            elif ch == "|":
                scan.take()
                if scan.peek() == ":":
                    diags.append(Diagnostic(line_no, scan.column, "unsupported repeat"))
                    scan.take()
                elif scan.peek() in ("]", "|"):
                    scan.take()
                elif scan.peek().isdigit():
                    diags.append(Diagnostic(line_no, scan.column, "unsupported variant ending"))
                    scan.take()
                flush_bar()
            elif ch == ":":
                diags.append(Diagnostic(line_no, scan.column, "unsupported repeat"))
                scan.take()
                while scan.peek() in (":", "|"):
                    scan.take()
                flush_bar()
            elif ch == "[":
                nxt, nxt2 = scan.peek(1), scan.peek(2)
                if nxt.isdigit():
                    diags.append(Diagnostic(line_no, scan.column, "unsupported variant ending"))
                    scan.take()
                    scan.take()
                elif nxt == "|":
                    scan.take()
                    scan.take()
                    flush_bar()
                elif nxt.isalpha() and nxt2 == ":":
                    diags.append(Diagnostic(line_no, scan.column, "unsupported inline field"))
                    while not scan.done() and scan.take() != "]":
                        pass
                else:
                    chord = _parse_chord(scan, diags)
                    if chord is not None:
                        push(chord)
            elif ch in "zx":
                scan.take()
                push(Rest(length=_parse_length(scan, diags)))
            elif ch == "Z":
                diags.append(Diagnostic(line_no, scan.column, "unsupported multi-measure rest"))
                scan.take()
                _parse_length(scan, diags)
            elif ch in "^_=" or ch in "ABCDEFGabcdefg":
                note = _parse_note(scan, diags)
                if note is not None:
                    push(note)
            elif ch == "-":
                diags.append(Diagnostic(line_no, scan.column, "unsupported tie"))
                scan.take()
            elif ch == "(":
                scan.take()
                if scan.peek().isdigit():
                    diags.append(Diagnostic(line_no, scan.column, "unsupported tuplet"))
                    scan.take()
                # else: slur open, ignored
            elif ch in "><":
                scan.take()
                if scan.peek() == ch:
                    diags.append(Diagnostic(line_no, scan.column, "unsupported double broken rhythm"))
                    while scan.peek() == ch:
                        scan.take()
                else:
                    pending_broken = ch
            elif ch == '"':
                scan.take()
                while not scan.done() and scan.take() != '"':
                    pass
            elif ch == "{":
                while not scan.done() and scan.take() != "}":
                    pass
            elif ch == "!":
                scan.take()
                while not scan.done() and scan.peek() not in "!":
                    scan.take()
                if scan.peek() == "!":
                    scan.take()
            elif ch in ").~HLMOPSTuv":
                scan.take()  # slur close / decoration shorthands
            else:
                diags.append(Diagnostic(line_no, scan.column, f"unexpected character {ch!r}"))
                scan.take()
        if pending_broken is not None:
            diags.append(Diagnostic(line_no, scan.column, "broken rhythm marker at line end"))
            pending_broken = None
    if current:
        bars.append(tuple(current))
    tune.bars = bars


def parse_abc(text: str) -> AbcTune:
    """Parse one tune; raises AbcParseError with line/column diagnostics."""
    diags: list[Diagnostic] = []
    lines: list[tuple[int, str]] = []
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("%", 1)[0].strip()
        if stripped:
            lines.append((i, stripped))
    if not lines:
        raise AbcParseError([Diagnostic(1, 1, "empty tune")])
    tune, body_start = _parse_headers(lines, diags)
    if not any(d.message.startswith(("missing", "unsupported key", "unknown major")) for d in diags):
        _parse_body(tune, lines[body_start:], diags)
    if diags:
        raise AbcParseError(diags)
    return tune


def _length_suffix(length: Fraction) -> str:
    if length == 1:
        return ""
    if length.numerator == 1:
        return "/" if length.denominator == 2 else f"/{length.denominator}"
    if length.denominator == 1:
        return str(length.numerator)
    return f"{length.numerator}/{length.denominator}"


def _serialize_note(note: Note, with_length: bool = True) -> str:
    out = {"sharp": "^", "flat": "_", "natural": "="}.get(note.accidental, "")
    if note.octave_shift >= 1:
        out += note.letter.lower() + "'" * (note.octave_shift - 1)
    else:
        out += note.letter + "," * (-note.octave_shift)
    if with_length:
        out += _length_suffix(note.length)
    return out


def serialize_abc(tune: AbcTune) -> str:
    """Canonical text form: explicit X T M L Q K headers, one bar per '|'.

    parse_abc(serialize_abc(t)) is structurally equal to t for valid tunes.
    """
    lines = [
        f"X:{tune.index}",
        f"T:{tune.title}",
        f"M:{tune.meter[0]}/{tune.meter[1]}",
        f"L:{tune.unit_length.numerator}/{tune.unit_length.denominator}",
        f"Q:1/4={tune.tempo_qpm}",
        f"K:{tune.key.tonic}",
    ]
    body_parts = []
    for bar in tune.bars:
        chunk = ""
        for element in bar:
            if isinstance(element, Note):
                chunk += _serialize_note(element)
            elif isinstance(element, Rest):
                chunk += "z" + _length_suffix(element.length)
            else:
                inner = "".join(_serialize_note(n, with_length=False) for n in element.notes)
                chunk += f"[{inner}]" + _length_suffix(element.length)
        body_parts.append(chunk)
    if body_parts:
        lines.append("|".join(body_parts) + "|")
    return "\n".join(lines) + "\n"


def iter_bar_pitches(tune: AbcTune):
    """Yield (bar_index, element, [midi numbers]) applying key signature and
    per-bar accidental persistence. Rests yield an empty pitch list."""
    sig = key_signature(tune.key.tonic)
    for bar_index, bar in enumerate(tune.bars):
        bar_accidentals: dict[str, int] = {}
        for element in bar:
            if isinstance(element, Note):
                yield bar_index, element, [note_midi(element, sig, bar_accidentals)]
            elif isinstance(element, Chord):
                yield bar_index, element, [note_midi(n, sig, bar_accidentals) for n in element.notes]
            else:
                yield bar_index, element, []


def validate_tune(tune: AbcTune) -> list[str]:
    """Check bar durations against the meter and pitches against MIDI range.

    The first bar may be short (anacrusis) and so may the last; every other
    bar must sum exactly to the meter. Returns human-readable diagnostics.
    """
    diags: list[str] = []
    expected = tune.meter_fraction
    n_bars = len(tune.bars)
    for i, bar in enumerate(tune.bars):
        total = sum((el.length * tune.unit_length for el in bar), Fraction(0))
        if total == expected:
            continue
        if total < expected and (i == 0 or i == n_bars - 1):
            continue  # anacrusis or trailing partial bar
        diags.append(f"bar {i + 1} sums {total}, expected {expected}")
    for bar_index, element, pitches in iter_bar_pitches(tune):
        for midi in pitches:
            if not 0 <= midi <= 127:
                diags.append(f"bar {bar_index + 1}: pitch {midi} outside MIDI range 0-127")
        if element.length <= 0:
            diags.append(f"bar {bar_index + 1}: non-positive element length")
        elif 96 % element.length.denominator != 0:
            diags.append(
                f"bar {bar_index + 1}: length {element.length} denominator does not divide 96"
            )
    return diags
