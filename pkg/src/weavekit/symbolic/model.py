"""Score data model: tunes, bars, notes, MIDI event sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

PPQ = 480  # ticks per quarter note, fixed
DEFAULT_UNIT = Fraction(1, 8)
DEFAULT_QPM = 120
VELOCITY = 80

# Semitone offsets of the natural letters within an octave.
BASE_SEMITONE = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
LETTERS = "CDEFGAB"

# Major key signatures by circle of fifths: tonic -> set of sharped or
# flatted letters. Sharps accumulate F C G D A E B; flats B E A D G C F.
_SHARP_ORDER = "FCGDAEB"
_FLAT_ORDER = "BEADGCF"
_SHARP_COUNT = {"C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5, "F#": 6, "C#": 7}
_FLAT_COUNT = {"F": 1, "Bb": 2, "Eb": 3, "Ab": 4, "Db": 5, "Gb": 6, "Cb": 7}


def key_signature(tonic: str) -> dict[str, int]:
    """Letter -> +1/-1 alteration map for a major key, e.g. 'G' -> {'F': 1}."""
    if tonic in _SHARP_COUNT:
        return {letter: 1 for letter in _SHARP_ORDER[: _SHARP_COUNT[tonic]]}
    if tonic in _FLAT_COUNT:
        return {letter: -1 for letter in _FLAT_ORDER[: _FLAT_COUNT[tonic]]}
    raise ValueError(f"unknown major key tonic {tonic!r}")


KNOWN_TONICS = tuple(sorted(set(_SHARP_COUNT) | set(_FLAT_COUNT)))

ACCIDENTALS = ("none", "sharp", "flat", "natural")
_ACCIDENTAL_SHIFT = {"sharp": 1, "flat": -1, "natural": 0}


@dataclass(frozen=True)
class Note:
    letter: str  # A-G, uppercase
    octave_shift: int  # 0 = octave of uppercase C (MIDI 60); lowercase c = +1
    accidental: str = "none"
    length: Fraction = Fraction(1)  # multiplier on the tune's unit length


@dataclass(frozen=True)
class Rest:
    length: Fraction = Fraction(1)


@dataclass(frozen=True)
class Chord:
    notes: tuple[Note, ...]
    length: Fraction = Fraction(1)  # effective multiplier shared by all members


Element = "Note | Rest | Chord"
Bar = tuple


@dataclass(frozen=True)
class Key:
    tonic: str  # "C".."B" with optional accidental, e.g. "Bb", "F#"
    mode: str = "major"


@dataclass
class AbcTune:
    index: int = 1
    title: str = ""
    meter: tuple[int, int] = (4, 4)
    unit_length: Fraction = DEFAULT_UNIT
    tempo_qpm: int = DEFAULT_QPM
    key: Key = field(default_factory=lambda: Key("C"))
    bars: list[tuple] = field(default_factory=list)

    @property
    def meter_fraction(self) -> Fraction:
        return Fraction(self.meter[0], self.meter[1])


def element_length(element) -> Fraction:
    return element.length


def note_midi(note: Note, sig: dict[str, int], bar_accidentals: dict[str, int]) -> int:
    """MIDI number under a key signature and the bar's accidental state.

    An explicit accidental overrides the signature and persists for that
    letter until the end of the bar (callers update bar_accidentals).
    """
    if note.accidental != "none":
        alter = _ACCIDENTAL_SHIFT[note.accidental]
        bar_accidentals[note.letter] = alter
    elif note.letter in bar_accidentals:
        alter = bar_accidentals[note.letter]
    else:
        alter = sig.get(note.letter, 0)
    return 60 + BASE_SEMITONE[note.letter] + 12 * note.octave_shift + alter


@dataclass(frozen=True)
class MidiEvent:
    tick: int
    kind: str  # "on" | "off"
    note: int  # 0..127
    velocity: int  # 0..127


@dataclass
class MidiSequence:
    tempo_qpm: int
    events: list[MidiEvent] = field(default_factory=list)
    ppq: int = PPQ


@dataclass(frozen=True)
class AnalysisReport:
    note_count: int
    bar_count: int
    pitch_min: int
    pitch_max: int
    total_duration_s: float
    key: str
    meter: str
