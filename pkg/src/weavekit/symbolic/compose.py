"""Template melody generator behind the compose tool's mock backend.

Eight bars of stepwise diatonic movement in the requested key and meter,
seeded by the invocation digest: distinct prompts give distinct tunes,
identical invocations give byte-identical ABC.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .model import LETTERS, AbcTune, Key, Note
from .notation import serialize_abc

BAR_COUNT = 8
_DEGREE_MIN, _DEGREE_MAX = 0, 9  # tonic .. a tenth above


def _degree_note(tonic_letter: str, degree: int, length: Fraction) -> Note:
    base = LETTERS.index(tonic_letter)
    return Note(
        letter=LETTERS[(base + degree) % 7],
        octave_shift=(base + degree) // 7,
        accidental="none",
        length=length,
    )


def compose_template(seed: int, params: dict) -> str:
    """Generate canonical ABC text for the given constraints."""
    tonic = str(params.get("key_signature", "C"))
    meter_text = str(params.get("meter", "4/4"))
    num, den = (int(p) for p in meter_text.split("/"))
    tempo = int(params.get("tempo_qpm", 120))

    if (num * 8) % den == 0:
        unit = Fraction(1, 8)
    else:
        unit = Fraction(1, den)
    units_per_bar = int(Fraction(num, den) / unit)

    rng = random.Random(seed)
    tune = AbcTune(
        index=1,
        title=f"Woven Air {seed % 10000:04d}",
        meter=(num, den),
        unit_length=unit,
        tempo_qpm=tempo,
        key=Key(tonic=tonic),
    )
    tonic_letter = tonic[0]
    degree = 0
    bars = []
    for bar_index in range(BAR_COUNT):
        bar = []
        for pos in range(units_per_bar):
            final_note = bar_index == BAR_COUNT - 1 and pos == units_per_bar - 1
            if final_note:
                degree = 0 if degree < 4 else 7
            else:
                step = rng.choice((-2, -1, -1, 0, 1, 1, 2, 3))
                degree = min(_DEGREE_MAX, max(_DEGREE_MIN, degree + step))
            bar.append(_degree_note(tonic_letter, degree, Fraction(1)))
        bars.append(tuple(bar))
    tune.bars = bars
    return serialize_abc(tune)
