"""Cleaning ASR hallucination loops while keeping natural reduplication.

Long-form ASR on noisy audio loops: a word stutters five times, a whole
phrase repeats until the window ends, a grapheme gets typed out ten times.
Bengali also *naturally* doubles words for emphasis, so the cleanup keeps
runs at or under the thresholds. Run with:

    python demos/04_repetition_cleanup.py
"""

from diarkit import DedupParams, clean_transcript
from diarkit.textproc import dedup_chars

# A phrase loop with a word stutter inside, in Bengali.
looped = (
    "আমি ভাত খাই "
    "আমি ভাত খাই "
    "আমি ভাত খাই "
    "ভালো ভালো ভালো ভালো"
)
print("raw :", looped)
print("clean:", clean_transcript(looped))

# Natural doubling (an intensifier) survives the default threshold of 2.
natural = "ভালো ভালো আছি"
assert clean_transcript(natural) == natural
print("\nnatural doubling preserved:", natural)

# Letter-level dedup works on grapheme clusters, not code points: the
# consonant and its combining vowel sign move as one unit, so no vowel sign
# is ever orphaned.
stutter = "কা" * 6  # ka+aa six times
print("\ngrapheme stutter:", stutter, "->", dedup_chars(stutter, max_char_repeat=2))

# Thresholds are yours to tune.
strict = DedupParams(max_word_repeat=1, max_phrase_len=3, max_phrase_repeat=1, max_char_repeat=1)
print("strict params  :", clean_transcript(natural, strict))
