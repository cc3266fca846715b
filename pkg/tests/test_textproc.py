import unicodedata
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diarkit.textproc import (

    DedupParams,
    NormalizationProfile,
    clean_transcript,
    dedup_chars,
    dedup_phrases,
    dedup_words,
    graphemes,
    normalize,
)

KA_AA = "কা"  # ka + vowel sign aa: one grapheme cluster, two code points

class TestNormalize:
    def test_bengali_punctuation_and_whitespace(self):
        assert normalize("  ক,  খ । ") == "ক খ"

    def test_idempotent_on_fixture(self):
        text = normalize("  ক,  খ । ")
        assert normalize(text) == text

    def test_nfc_unifies_decomposed_vowel_sign(self):
        # vowel sign O has a canonical decomposition: e + aa
        precomposed = "কো"
        decomposed = "কো"
        assert precomposed != decomposed
        assert normalize(precomposed) == normalize(decomposed) == "কো"

    def test_unicode_form_none_preserves_decomposition(self):
        profile = NormalizationProfile(unicode_form="none")
        assert normalize("কো", profile) == "কো"

    def test_keep_punctuation(self):
        profile = NormalizationProfile(strip_punctuation=False)
        assert normalize("ক, খ", profile) == "ক, খ"

    def test_profile_requires_punctuation_set(self):
        with pytest.raises(ValueError):
            NormalizationProfile(strip_punctuation=True, punctuation_set=frozenset())

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=80))
    def test_idempotent(self, text):
        once = normalize(text)
        assert normalize(once) == once

class TestDedupChars:
    def test_long_run_collapses_to_one(self):
        assert dedup_chars(KA_AA * 5, 2) == KA_AA

    def test_run_at_threshold_preserved(self):
        assert dedup_chars(KA_AA * 2, 2) == KA_AA * 2

    def test_distinct_graphemes_unchanged(self):
        token = "কাখি"  # ka-aa kha-i
        assert dedup_chars(token, 2) == token

    def test_vowel_sign_never_detaches(self):
        # code-point runs would see aa+aa across cluster boundaries; grapheme
        # runs must not
        token = KA_AA + KA_AA + KA_AA + "খ"
        out = dedup_chars(token, 1)
        assert out == KA_AA + "খ"
        assert not unicodedata.combining(out[0])

    def test_ascii_stutter(self):
        assert dedup_chars("aaaaab", 2) == "ab"

class TestDedupWords:
    def test_long_run_collapses(self):
        assert dedup_words(["w", "w", "w", "w"], 2) == ["w"]

    def test_natural_doubling_preserved(self):
        assert dedup_words(["w", "w"], 2) == ["w", "w"]

    def test_non_adjacent_untouched(self):
        assert dedup_words(["u", "w", "u"], 2) == ["u", "w", "u"]

class TestDedupPhrases:
    def test_bigram_loop_collapses(self):
        params = DedupParams(max_phrase_repeat=1)
        assert dedup_phrases(["a", "b", "a", "b", "a", "b"], params) == ["a", "b"]

    def test_trigram_needs_long_enough_window(self):
        tokens = ["a", "b", "c", "a", "b", "c"]
        short = DedupParams(max_phrase_len=2, max_phrase_repeat=1)
        assert dedup_phrases(tokens, short) == tokens
        longer = DedupParams(max_phrase_len=3, max_phrase_repeat=1)
        assert dedup_phrases(tokens, longer) == ["a", "b", "c"]

    def test_no_repeats_fixed_point(self):
        tokens = ["p", "q", "r", "s"]
        assert dedup_phrases(tokens, DedupParams()) == tokens

    def test_repeat_threshold_preserves_runs_at_limit(self):
        params = DedupParams(max_phrase_repeat=2)
        tokens = ["a", "b", "a", "b"]
        assert dedup_phrases(tokens, params) == tokens
        assert dedup_phrases(["a", "b"] * 3, params) == ["a", "b"]

class TestCleanTranscript:
    def test_non_repetitive_unchanged(self):
        text = "আমি ভাত খাই"
        assert clean_transcript(text) == text

    def test_phrase_loop_with_word_run_inside(self):
        # a 4-token phrase looped 3x, then one word stuttered 5x: one phrase
        # copy and one word copy survive
        phrase = "p q r s"
        text = " ".join([phrase] * 3 + ["w"] * 5)
        assert clean_transcript(text) == "p q r s w"

    def test_single_spaces_in_output(self):
        assert clean_transcript("a   b\t c") == "a b c"

    def test_letter_dedup_can_cascade_into_word_dedup(self):
        # letter dedup makes the tokens equal; the word pass must then fire
        text = "aaab aab ab"
        assert clean_transcript(text, DedupParams(max_char_repeat=1)) == "ab"

tokens_st = st.lists(st.sampled_from(["a", "b", "c", "aa", "ab", "কা"]), max_size=24)
params_st = st.builds(
    DedupParams,
    max_word_repeat=st.sampled_from([1, 2, 3]),
    max_phrase_len=st.sampled_from([2, 3, 5]),
    max_phrase_repeat=st.sampled_from([1, 2]),
    max_char_repeat=st.sampled_from([1, 2, 3]),
)

class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(tokens_st, params_st)
    def test_clean_transcript_idempotent(self, tokens, params):
        text = " ".join(tokens)
        once = clean_transcript(text, params)
        assert clean_transcript(once, params) == once

    @settings(max_examples=200, deadline=None)
    @given(tokens_st, params_st)
    def test_dedup_words_and_phrases_only_delete(self, tokens, params):
        for out in (dedup_words(tokens, params.max_word_repeat), dedup_phrases(tokens, params)):
            counts_in = Counter(tokens)
            counts_out = Counter(out)
            assert all(counts_out[t] <= counts_in[t] for t in counts_out)
            assert len(out) <= len(tokens)

    @settings(max_examples=200, deadline=None)
    @given(tokens_st, params_st)
    def test_no_orphaned_combining_mark(self, tokens, params):
        out = clean_transcript(" ".join(tokens), params)
        for token in out.split():
            assert not unicodedata.combining(token[0])

    @settings(max_examples=200, deadline=None)
    @given(st.text(alphabet="ab কাখ", max_size=40), params_st)
    def test_dedup_chars_only_shortens(self, text, params):
        for token in text.split():
            out = dedup_chars(token, params.max_char_repeat)
            assert len(out) <= len(token)
            assert set(graphemes(out)) <= set(graphemes(token))
