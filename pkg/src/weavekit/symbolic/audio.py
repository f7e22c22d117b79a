"""Deterministic sine-voice synthesis to 44.1 kHz stereo 16-bit WAV.

Not a musical instrument model: the point is byte-identical output for
identical input so cached audio can be verified exactly.
"""

from __future__ import annotations

import io
import math
import wave

import numpy as np

from ..errors import ValidationError
from .model import MidiSequence

SAMPLE_RATE = 44100
CHANNELS = 2
AMPLITUDE = 0.2
ATTACK_S = 0.010
RELEASE_S = 0.050


def _note_spans(seq: MidiSequence) -> list[tuple[int, int, int]]:
    """Pair each `on` with the earliest later `off` of the same note."""
    pending: dict[int, list[int]] = {}
    spans: list[tuple[int, int, int]] = []
    for event in seq.events:
        if event.kind == "on":
            pending.setdefault(event.note, []).append(event.tick)
        elif event.kind == "off":
            stack = pending.get(event.note)
            if not stack:
                raise ValidationError(f"off without matching on for note {event.note}")
            spans.append((stack.pop(0), event.tick, event.note))
        else:
            raise ValidationError(f"unknown event kind {event.kind!r}")
    leftover = [n for n, ticks in pending.items() if ticks]
    if leftover:
        raise ValidationError(f"notes without off events: {leftover}")
    return spans


def synthesize_wav(seq: MidiSequence) -> bytes:
    """Render each note as an enveloped sine at 440 * 2^((n-69)/12) Hz."""
    spans = _note_spans(seq)
    release_n = round(RELEASE_S * SAMPLE_RATE)
    seconds_per_tick = 60.0 / (seq.tempo_qpm * seq.ppq)
    if spans:
        last_off = max(end for _, end, _ in spans)
        total = math.ceil(last_off * seconds_per_tick * SAMPLE_RATE) + release_n
    else:
        total = 0
    mix = np.zeros(total, dtype=np.float64)
    attack_n = round(ATTACK_S * SAMPLE_RATE)
    for start_tick, end_tick, note in spans:
        start = round(start_tick * seconds_per_tick * SAMPLE_RATE)
        end = round(end_tick * seconds_per_tick * SAMPLE_RATE)
        n = end - start
        if n <= 0:
            continue
        freq = 440.0 * 2.0 ** ((note - 69) / 12.0)
        t = np.arange(n, dtype=np.float64) / SAMPLE_RATE
        tone = AMPLITUDE * np.sin(2.0 * math.pi * freq * t)
        env = np.ones(n, dtype=np.float64)
        a = min(attack_n, n)
        if a > 0:
            env[:a] *= np.arange(a, dtype=np.float64) / a
        r = min(release_n, n)
        if r > 0:
            env[n - r :] *= np.arange(r, 0, -1, dtype=np.float64) / r
        mix[start:end] += tone * env
    np.clip(mix, -1.0, 1.0, out=mix)
    pcm = np.round(mix * 32767.0).astype("<i2")
    stereo = np.repeat(pcm, CHANNELS)

    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(CHANNELS)
        wav.setsampwidth(2)
        wav.setframerate(SAMPLE_RATE)
        wav.writeframes(stereo.tobytes())
    return buf.getvalue()


def read_wav_header(data: bytes) -> dict:
    """Decode rate/channels/width/frames from WAV bytes (for checks)."""
    with wave.open(io.BytesIO(data), "rb") as wav:
        return {
            "sample_rate": wav.getframerate(),
            "channels": wav.getnchannels(),
            "sample_width": wav.getsampwidth(),
            "frames": wav.getnframes(),
        }
