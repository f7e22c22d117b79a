"""Minimal deterministic score sketch as SVG: staff, note heads, barlines.

A reading aid, not engraving — noteheads are placed proportionally to time
with no beams, stems, or collision handling.
"""

from __future__ import annotations

from fractions import Fraction

from .model import AbcTune, Chord, Note

MARGIN_X = 40.0
PX_PER_QUARTER = 80.0
STEP_PX = 2.5  # one diatonic step
MIDDLE_Y = 50.0  # middle staff line = B4
STAFF_TOP = MIDDLE_Y - 4 * STEP_PX
STAFF_BOTTOM = MIDDLE_Y + 4 * STEP_PX

_DIATONIC = {"C": 0, "D": 1, "E": 2, "F": 3, "G": 4, "A": 5, "B": 6}
_B4_INDEX = _DIATONIC["B"]  # octave_shift 0


def _note_y(note: Note) -> float:
    steps_above_middle = _DIATONIC[note.letter] + 7 * note.octave_shift - _B4_INDEX
    return MIDDLE_Y - STEP_PX * steps_above_middle


def render_svg(tune: AbcTune) -> bytes:
    """Five staff lines, one ellipse per note, a stroke per bar boundary."""
    quarters = Fraction(0)
    ellipses: list[str] = []
    barlines: list[float] = []
    if tune.bars:
        barlines.append(MARGIN_X)
    for bar in tune.bars:
        for element in bar:
            x = MARGIN_X + float(quarters) * PX_PER_QUARTER
            if isinstance(element, Note):
                ellipses.append(_ellipse(x, _note_y(element)))
            elif isinstance(element, Chord):
                ellipses.extend(_ellipse(x, _note_y(n)) for n in element.notes)
            quarters += element.length * tune.unit_length * 4
        barlines.append(MARGIN_X + float(quarters) * PX_PER_QUARTER)
    width = max(200.0, MARGIN_X * 2 + float(quarters) * PX_PER_QUARTER)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="100" '
        f'viewBox="0 0 {width:g} 100">'
    ]
    for i in range(5):
        y = STAFF_TOP + i * 2 * STEP_PX
        parts.append(
            f'<line class="staff" x1="0" y1="{y:g}" x2="{width:g}" y2="{y:g}" '
            'stroke="black" stroke-width="0.5"/>'
        )
    for x in barlines:
        parts.append(
            f'<line class="barline" x1="{x:g}" y1="{STAFF_TOP:g}" x2="{x:g}" '
            f'y2="{STAFF_BOTTOM:g}" stroke="black" stroke-width="1"/>'
        )
    parts.extend(ellipses)
    parts.append("</svg>")
    return "\n".join(parts).encode("utf-8")


def _ellipse(x: float, y: float) -> str:
    return f'<ellipse cx="{x:g}" cy="{y:g}" rx="4" ry="3" fill="black"/>'
