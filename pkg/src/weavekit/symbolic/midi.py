"""ABC tune -> timed note events -> Standard MIDI File bytes."""

from __future__ import annotations

import struct
from fractions import Fraction

from ..errors import ValidationError
from .model import (
    PPQ,
    VELOCITY,
    AbcTune,
    Chord,
    MidiEvent,
    MidiSequence,
    Note,
    Rest,
    key_signature,
    note_midi,
)


def abc_to_midi(tune: AbcTune) -> MidiSequence:
    """Compile a tune to note on/off events at 480 ticks per quarter.

    A whole note spans 4 * 480 ticks; an element lasting `length` units of
    the tune's unit_length therefore spans length * unit * 1920 ticks, which
    must come out integral.
    """
    sig = key_signature(tune.key.tonic)
    events: list[MidiEvent] = []
    onset = Fraction(0)  # in whole notes
    for bar_index, bar in enumerate(tune.bars):
        bar_accidentals: dict[str, int] = {}
        for element in bar:
            duration = element.length * tune.unit_length
            if isinstance(element, (Note, Chord)):
                notes = element.notes if isinstance(element, Chord) else (element,)
                pitches = [note_midi(n, sig, bar_accidentals) for n in notes]
                start = onset * 4 * PPQ
                end = (onset + duration) * 4 * PPQ
                if start.denominator != 1 or end.denominator != 1:
                    raise ValidationError(
                        f"bar {bar_index + 1}: duration {duration} does not map to whole ticks"
                    )
                for midi in pitches:
                    if not 0 <= midi <= 127:
                        raise ValidationError(
                            f"bar {bar_index + 1}: pitch {midi} outside MIDI range"
                        )
                    events.append(MidiEvent(int(start), "on", midi, VELOCITY))
                    events.append(MidiEvent(int(end), "off", midi, 0))
            onset += duration
    events.sort(key=lambda e: (e.tick, 0 if e.kind == "off" else 1, e.note))
    return MidiSequence(tempo_qpm=tune.tempo_qpm, events=events, ppq=PPQ)


def encode_vlq(value: int) -> bytes:
    """MIDI variable-length quantity: 7 bits per byte, high bit = continue."""
    if value < 0:
        raise ValidationError("VLQ value must be non-negative")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(chunks))


def write_smf(seq: MidiSequence) -> bytes:
    """Serialize as SMF format 0: one track, set-tempo meta, then the notes."""
    track = bytearray()
    tempo_us = round(60_000_000 / seq.tempo_qpm)
    track += b"\x00\xff\x51\x03" + tempo_us.to_bytes(3, "big")
    last_tick = 0
    for event in sorted(seq.events, key=lambda e: (e.tick, 0 if e.kind == "off" else 1, e.note)):
        if event.tick < last_tick:
            raise ValidationError("events out of order")
        track += encode_vlq(event.tick - last_tick)
        status = 0x90 if event.kind == "on" else 0x80
        track += struct.pack(">BBB", status, event.note, event.velocity)
        last_tick = event.tick
    track += b"\x00\xff\x2f\x00"  # end of track
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, seq.ppq)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


def decode_vlq(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    while True:
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos


def read_smf(data: bytes) -> MidiSequence:
    """Parse the single-track subset write_smf emits (format 0, PPQ ticks).

    Tolerates other channel-0 events being absent but not running status or
    multi-track files.
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise ValidationError("not a standard MIDI file")
    hlen, fmt, ntracks, division = struct.unpack(">IHHH", data[4:14])
    if hlen != 6 or fmt != 0 or ntracks != 1:
        raise ValidationError("only format-0 single-track files are supported")
    if data[14:18] != b"MTrk":
        raise ValidationError("missing track chunk")
    (tlen,) = struct.unpack(">I", data[18:22])
    track = data[22 : 22 + tlen]
    pos = 0
    tick = 0
    tempo_qpm = 120
    events: list[MidiEvent] = []
    while pos < len(track):
        delta, pos = decode_vlq(track, pos)
        tick += delta
        status = track[pos]
        pos += 1
        if status == 0xFF:
            meta = track[pos]
            pos += 1
            length, pos = decode_vlq(track, pos)
            payload = track[pos : pos + length]
            pos += length
            if meta == 0x51 and length == 3:
                tempo_qpm = round(60_000_000 / int.from_bytes(payload, "big"))
            if meta == 0x2F:
                break
        elif status & 0xF0 in (0x90, 0x80):
            note, velocity = track[pos], track[pos + 1]
            pos += 2
            kind = "on" if status & 0xF0 == 0x90 and velocity > 0 else "off"
            events.append(MidiEvent(tick, kind, note, velocity if kind == "on" else 0))
        else:
            raise ValidationError(f"unsupported MIDI status byte 0x{status:02x}")
    seq = MidiSequence(tempo_qpm=tempo_qpm, events=events, ppq=division)
    return seq
