"""Hand-built candidate/reference sentence pairs for metric cross-checks.

Kept short (the METEOR reference oracle enumerates alignments) but varied:
identical, disjoint, reordered, repeated words, punctuation, containment,
single tokens, and near-paraphrases.
"""

ORACLE_PAIRS = [
    # identical
    ("the cat sat on the mat", "the cat sat on the mat"),
    ("i moved to the coast", "i moved to the coast"),
    ("one", "one"),
    ("hello world", "hello world"),
    # classic brevity-penalty case
    ("the cat sat", "the cat sat on the mat"),
    ("a b", "a b c d e f"),
    ("so tired today", "so tired today honestly just done"),
    # candidate longer than reference
    ("the cat sat on the mat", "the cat sat"),
    ("we went home early that night", "we went home"),
    # disjoint vocabularies
    ("alpha beta gamma", "delta epsilon zeta"),
    ("x", "y"),
    ("red green blue", "one two three"),
    # reordering
    ("sat cat the", "the cat sat"),
    ("home went we", "we went home"),
    ("b a", "a b"),
    ("d c b a", "a b c d"),
    # partial overlap
    ("a x b", "a b"),
    ("a b", "a x b"),
    ("the dog barked loudly", "the dog slept quietly"),
    ("my cat is fat", "my dog is fat"),
    ("i love my job", "i hate my job"),
    # repeated tokens
    ("a a b", "a b"),
    ("a b", "a a b"),
    ("a a a", "a a"),
    ("the the the cat", "the cat"),
    ("buffalo buffalo buffalo", "buffalo buffalo"),
    ("a b a b", "b a b a"),
    ("do it do it now", "do it now"),
    # containment / prefix / suffix
    ("the quick brown fox", "the quick brown fox jumps over"),
    ("jumps over", "the quick brown fox jumps over"),
    ("brown fox jumps", "the quick brown fox jumps over"),
    # punctuation and casing collapse under the tokenizer
    ("Hello, world!", "hello world"),
    ("I'm fine.", "i'm fine"),
    ("Stop!!!", "stop"),
    ("wait... what?", "wait what"),
    # near-paraphrase
    ("i am twenty years old", "i am nineteen years old"),
    ("my sister lives in town", "my brother lives in town"),
    ("we adopted a small dog", "we adopted a small cat yesterday"),
    ("feeling great after the run", "feeling awful after the run"),
    ("she plays guitar every evening", "she plays piano every morning"),
    # single-token overlaps
    ("cat", "the cat"),
    ("the cat", "cat"),
    ("yes", "yes yes"),
    # interleaved repeats
    ("a b c a b", "a b a b c"),
    ("one two one", "one one two"),
    ("x y x y", "y x y x"),
    # longer mixed cases
    ("today i walked to the old market", "yesterday i walked to the new market"),
    ("this is a very long reference sentence", "this is a very long candidate sentence"),
    ("nobody knows the trouble i have seen", "nobody knows the trouble"),
    ("good night everyone see you tomorrow", "good morning everyone see you later"),
]

assert len(ORACLE_PAIRS) == 50
