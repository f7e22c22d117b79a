from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from weavekit.symbolic import (
    AbcParseError,
    AbcTune,
    Chord,
    Key,
    Note,
    Rest,
    parse_abc,
    serialize_abc,
    validate_tune,
)

BASIC = "X:1\nT:T\nM:4/4\nL:1/4\nK:C\nCDEF|"


class TestParse:
    def test_basic_bar(self):
        tune = parse_abc(BASIC)
        assert len(tune.bars) == 1
        bar = tune.bars[0]
        assert [n.letter for n in bar] == ["C", "D", "E", "F"]
        assert all(n.length == 1 for n in bar)
        assert tune.meter == (4, 4)
        assert tune.unit_length == Fraction(1, 4)

    def test_rest_with_multiplier(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/8\nK:C\nz2C2C2C2|")
        rest = tune.bars[0][0]
        assert isinstance(rest, Rest)
        assert rest.length == 2  # two eighths = one quarter

    def test_missing_key_header(self):
        with pytest.raises(AbcParseError, match="missing key"):
            parse_abc("X:1\nM:4/4\nCDEF|")

    def test_missing_meter_header(self):
        with pytest.raises(AbcParseError, match="missing meter"):
            parse_abc("X:1\nK:C\nCDEF|")

    def test_defaults_applied(self):
        tune = parse_abc("X:1\nM:4/4\nK:C\nC8|")
        assert tune.unit_length == Fraction(1, 8)
        assert tune.tempo_qpm == 120

    def test_tempo_forms(self):
        assert parse_abc("X:1\nM:4/4\nQ:1/4=96\nK:C\nC8|").tempo_qpm == 96
        assert parse_abc("X:1\nM:4/4\nQ:1/8=240\nK:C\nC8|").tempo_qpm == 120
        assert parse_abc("X:1\nM:4/4\nQ:140\nK:C\nC8|").tempo_qpm == 140

    def test_octave_marks_and_accidentals(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\n^Cc'_B,=F|")
        notes = tune.bars[0]
        assert (notes[0].letter, notes[0].accidental, notes[0].octave_shift) == ("C", "sharp", 0)
        assert (notes[1].letter, notes[1].octave_shift) == ("C", 2)
        assert (notes[2].letter, notes[2].accidental, notes[2].octave_shift) == ("B", "flat", -1)
        assert notes[3].accidental == "natural"

    def test_length_forms(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/8\nK:C\nC2C3/2C/2C/|C//C//C/C3|")
        lengths = [e.length for e in tune.bars[0]]
        assert lengths == [2, Fraction(3, 2), Fraction(1, 2), Fraction(1, 2)]
        lengths2 = [e.length for e in tune.bars[1]]
        assert lengths2 == [Fraction(1, 4), Fraction(1, 4), Fraction(1, 2), 3]

    def test_malformed_length(self):
        with pytest.raises(AbcParseError, match="malformed length"):
            parse_abc("X:1\nM:4/4\nK:C\nC/0|")

    def test_chord_normalization(self):
        outer = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\n[CEG]2[CEG]2|")
        inner = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\n[C2E2G2][C2E2G2]|")
        assert outer.bars == inner.bars
        chord = outer.bars[0][0]
        assert isinstance(chord, Chord)
        assert chord.length == 2
        assert all(n.length == 1 for n in chord.notes)

    def test_chord_mismatched_lengths(self):
        with pytest.raises(AbcParseError, match="share one length"):
            parse_abc("X:1\nM:4/4\nK:C\n[C2E4]|")

    def test_broken_rhythm(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/8\nK:C\nA>Bc<d A>Bc<d|")
        lengths = [e.length for e in tune.bars[0]]
        assert lengths == [Fraction(3, 2), Fraction(1, 2), Fraction(1, 2), Fraction(3, 2)] * 2

    def test_decorations_ignored(self):
        tune = parse_abc('X:1\nM:4/4\nL:1/4\nK:C\n.C~D"Gmaj"E{ab}F|')
        assert len(tune.bars[0]) == 4

    def test_slurs_ignored_tuplets_rejected(self):
        assert len(parse_abc("X:1\nM:4/4\nL:1/4\nK:C\n(CD)(EF)|").bars[0]) == 4
        with pytest.raises(AbcParseError, match="tuplet"):
            parse_abc("X:1\nM:4/4\nL:1/4\nK:C\n(3CDE F2|")

    def test_ties_rejected(self):
        with pytest.raises(AbcParseError, match="tie"):
            parse_abc("X:1\nM:4/4\nL:1/4\nK:C\nC2-C2|")

    def test_repeats_rejected(self):
        with pytest.raises(AbcParseError, match="repeat"):
            parse_abc("X:1\nM:4/4\nL:1/4\nK:C\n|:CDEF:|")

    def test_voices_rejected(self):
        with pytest.raises(AbcParseError, match="voices"):
            parse_abc("X:1\nM:4/4\nK:C\nV:2\nCDEF|")

    def test_minor_key_rejected(self):
        with pytest.raises(AbcParseError, match="major keys only"):
            parse_abc("X:1\nM:4/4\nK:Am\nABCD|")

    def test_double_accidental_rejected(self):
        with pytest.raises(AbcParseError, match="double accidental"):
            parse_abc("X:1\nM:4/4\nK:C\n^^CDEF|")

    def test_diagnostics_carry_position(self):
        try:
            parse_abc("X:1\nM:4/4\nL:1/4\nK:C\nCD-EF|")
        except AbcParseError as exc:
            diag = exc.diagnostics[0]
            assert diag.line == 5
            assert diag.column == 3
        else:
            pytest.fail("expected diagnostics")

    def test_empty_text(self):
        with pytest.raises(AbcParseError, match="empty"):
            parse_abc("   \n  \n")

    def test_comments_stripped(self):
        tune = parse_abc("X:1\n% header comment\nM:4/4\nL:1/4\nK:C\nCDEF| % melody\n")
        assert len(tune.bars) == 1


class TestSerialize:
    def test_round_trip_basic(self):
        tune = parse_abc(BASIC)
        assert parse_abc(serialize_abc(tune)) == tune

    def test_defaults_emitted_explicitly(self):
        tune = parse_abc("X:1\nM:4/4\nK:C\nC8|")
        text = serialize_abc(tune)
        assert "L:1/8\n" in text
        assert "Q:1/4=120\n" in text
        assert text.splitlines()[:6] == ["X:1", "T:", "M:4/4", "L:1/8", "Q:1/4=120", "K:C"]

    def test_chord_survives_round_trip(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\n[CEG]2[CEG]2|")
        assert parse_abc(serialize_abc(tune)) == tune

    def test_corpus_round_trip(self, corpus_texts):
        assert len(corpus_texts) >= 50
        for text in corpus_texts:
            tune = parse_abc(text)
            assert parse_abc(serialize_abc(tune)) == tune


class TestValidate:
    def test_exact_bar(self):
        assert validate_tune(parse_abc(BASIC)) == []

    def test_short_middle_bar_diagnosed(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\nCDEF|CDE|CDEF|")
        diags = validate_tune(tune)
        assert diags == ["bar 2 sums 3/4, expected 1"]

    def test_short_single_bar_is_fine(self):
        # a lone bar is both first and last, so anacrusis rules apply
        assert validate_tune(parse_abc("X:1\nM:4/4\nL:1/4\nK:C\nCDE|")) == []

    def test_anacrusis_and_trailing_allowed(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\nC|CDEF|GABc|FE|")
        assert validate_tune(tune) == []

    def test_overfull_bar_diagnosed(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\nCDEFG|")
        assert any("bar 1 sums 5/4" in d for d in validate_tune(tune))

    def test_empty_body_valid(self):
        assert validate_tune(parse_abc("X:1\nM:4/4\nK:C\n")) == []

    def test_pitch_range(self):
        tune = parse_abc("X:1\nM:4/4\nL:1/4\nK:C\nC,,,,,, D,,,,,, E,,,,,, F,,,,,,|")
        assert any("outside MIDI range" in d for d in validate_tune(tune))


note_strategy = st.builds(
    Note,
    letter=st.sampled_from("CDEFGAB"),
    octave_shift=st.integers(min_value=-1, max_value=2),
    accidental=st.sampled_from(["none", "sharp", "flat", "natural"]),
    length=st.sampled_from([Fraction(1), Fraction(2), Fraction(3), Fraction(1, 2), Fraction(3, 2), Fraction(4)]),
)
element_strategy = st.one_of(
    note_strategy,
    st.builds(Rest, length=st.sampled_from([Fraction(1), Fraction(2), Fraction(1, 2)])),
    st.builds(
        Chord,
        notes=st.lists(
            st.builds(
                Note,
                letter=st.sampled_from("CDEFGAB"),
                octave_shift=st.integers(min_value=0, max_value=1),
                accidental=st.sampled_from(["none", "sharp", "flat"]),
                length=st.just(Fraction(1)),
            ),
            min_size=1,
            max_size=3,
        ).map(tuple),
        length=st.sampled_from([Fraction(1), Fraction(2)]),
    ),
)
tune_strategy = st.builds(
    AbcTune,
    index=st.integers(min_value=1, max_value=999),
    title=st.text(alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters=" "), max_size=20),
    meter=st.sampled_from([(4, 4), (3, 4), (6, 8), (2, 4), (9, 8)]),
    unit_length=st.sampled_from([Fraction(1, 8), Fraction(1, 4), Fraction(1, 16)]),
    tempo_qpm=st.integers(min_value=30, max_value=260),
    key=st.builds(Key, tonic=st.sampled_from(["C", "G", "D", "A", "F", "Bb", "Eb", "F#", "Cb"])),
    bars=st.lists(st.lists(element_strategy, min_size=1, max_size=6).map(tuple), max_size=5),
)


class TestRoundTripProperty:
    @given(tune_strategy)
    @settings(max_examples=200, deadline=None)
    def test_parse_serialize_parse_identity(self, tune):
        # parse normalizes (e.g. strips header whitespace); on its image,
        # serialize/parse is the identity and the text form is a fixpoint
        normalized = parse_abc(serialize_abc(tune))
        text = serialize_abc(normalized)
        assert parse_abc(text) == normalized
        assert serialize_abc(parse_abc(text)) == text

    @given(tune_strategy.filter(lambda t: t.title == t.title.strip()))
    @settings(max_examples=100, deadline=None)
    def test_direct_equality_for_canonical_titles(self, tune):
        assert parse_abc(serialize_abc(tune)) == tune
