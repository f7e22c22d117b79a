"""Self-contained symbolic pipeline: ABC in, MIDI/WAV/SVG/stats out."""

from .analysis import analyze_tune
from .audio import read_wav_header, synthesize_wav
from .midi import abc_to_midi, encode_vlq, write_smf
from .model import (
    AbcTune,
    AnalysisReport,
    Chord,
    Key,
    MidiEvent,
    MidiSequence,
    Note,
    Rest,
    key_signature,
)
from .notation import AbcParseError, Diagnostic, parse_abc, serialize_abc, validate_tune
from .sketch import render_svg

__all__ = [
    "AbcParseError",
    "AbcTune",
    "AnalysisReport",
    "Chord",
    "Diagnostic",
    "Key",
    "MidiEvent",
    "MidiSequence",
    "Note",
    "Rest",
    "abc_to_midi",
    "analyze_tune",
    "encode_vlq",
    "key_signature",
    "parse_abc",
    "read_wav_header",
    "render_svg",
    "serialize_abc",
    "synthesize_wav",
    "validate_tune",
    "write_smf",
]
