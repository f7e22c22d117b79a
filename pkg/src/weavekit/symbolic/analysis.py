"""Deterministic tune statistics: counts, pitch bounds, duration."""

from __future__ import annotations

from fractions import Fraction

from .model import PPQ, AbcTune, AnalysisReport
from .notation import iter_bar_pitches


def analyze_tune(tune: AbcTune) -> AnalysisReport:
    pitches: list[int] = []
    for _, _, element_pitches in iter_bar_pitches(tune):
        pitches.extend(element_pitches)
    # Total span includes trailing rests: ticks = Σ length * unit * 4 * PPQ.
    total_whole = sum(
        (el.length * tune.unit_length for bar in tune.bars for el in bar), Fraction(0)
    )
    total_ticks = total_whole * 4 * PPQ
    duration_s = (float(total_ticks) / PPQ) * 60.0 / tune.tempo_qpm
    return AnalysisReport(
        note_count=len(pitches),
        bar_count=len(tune.bars),
        pitch_min=min(pitches) if pitches else 0,
        pitch_max=max(pitches) if pitches else 0,
        total_duration_s=duration_s,
        key=tune.key.tonic,
        meter=f"{tune.meter[0]}/{tune.meter[1]}",
    )
