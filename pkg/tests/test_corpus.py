import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dforge.corpus import (
    CorpusFormatError,
    FilterConfig,
    Post,
    augment_with_subreddit,
    filter_first_person,
    filter_min_length,
    filter_nsfw,
    load_posts,
    run_filter_pipeline,
    sample_fraction,
    save_posts,
)


def make_post(i, subreddit="lgbt", text="I went home", author=None, over_18=None):
    return Post(
        id=f"p{i}",
        author=author or f"user{i}",
        subreddit=subreddit,
        text=text,
        over_18=over_18,
    )


class TestLoadPosts:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        path.write_text("", encoding="utf-8")
        posts, skipped = load_posts(path)
        assert posts == [] and skipped == []

    def test_three_line_round_trip(self, tmp_path):
        original = [make_post(i) for i in range(3)]
        path = tmp_path / "posts.jsonl"
        save_posts(original, path)
        posts, skipped = load_posts(path)
        assert posts == original
        assert skipped == []

    def test_missing_text_field_names_the_line(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        lines = [
            json.dumps({"id": "a", "author": "u", "subreddit": "s", "text": "ok"}),
            json.dumps({"id": "b", "author": "u", "subreddit": "s"}),
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="line 2"):
            load_posts(path)

    def test_lenient_mode_skips_and_counts(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        lines = [
            json.dumps({"id": "a", "author": "u", "subreddit": "s", "text": "ok"}),
            "{ not json",
            json.dumps({"id": "c", "author": "u", "subreddit": "s", "text": "fine"}),
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        posts, skipped = load_posts(path, strict=False)
        assert [p.id for p in posts] == ["a", "c"]
        assert len(skipped) == 1 and skipped[0][0] == 2

    def test_duplicate_id_is_malformed(self, tmp_path):
        path = tmp_path / "posts.jsonl"
        row = json.dumps({"id": "a", "author": "u", "subreddit": "s", "text": "ok"})
        path.write_text(row + "\n" + row + "\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="duplicate"):
            load_posts(path)


class TestFilterNsfw:
    def test_empty_blocklist_is_identity(self):
        posts = [make_post(i) for i in range(4)]
        config = FilterConfig()
        assert filter_nsfw(posts, config) == posts

    def test_set_difference(self):
        posts = [make_post(0, "a"), make_post(1, "b"), make_post(2, "c")]
        config = FilterConfig(nsfw_subreddits=frozenset({"b"}))
        assert [p.subreddit for p in filter_nsfw(posts, config)] == ["a", "c"]

    def test_case_insensitive_match(self):
        posts = [make_post(0, "GoneWild"), make_post(1, "books")]
        config = FilterConfig(nsfw_subreddits=frozenset({"gonewild"}))
        assert [p.subreddit for p in filter_nsfw(posts, config)] == ["books"]

    def test_over_18_flag_honored(self):
        posts = [make_post(0, over_18=True), make_post(1, over_18=False), make_post(2)]
        config = FilterConfig()
        assert [p.id for p in filter_nsfw(posts, config)] == ["p1", "p2"]


class TestFilterFirstPerson:
    def config(self, lexicon=None):
        return FilterConfig(pronoun_lexicon=lexicon or FilterConfig().pronoun_lexicon)

    def test_explicit_pronoun_retained(self):
        posts = [make_post(0, text="I went home")]
        assert filter_first_person(posts, self.config()) == posts

    def test_no_lexicon_token_removed(self):
        posts = [make_post(0, text="The committee decided")]
        assert filter_first_person(posts, self.config()) == []

    def test_substring_must_not_count(self):
        posts = [make_post(0, text="determine the cause")]
        assert filter_first_person(posts, self.config(("mine",))) == []

    def test_word_inside_punctuation_counts(self):
        posts = [make_post(0, text="well, my dog...")]
        assert filter_first_person(posts, self.config()) == posts

    def test_examined_does_not_contain_mine(self):
        posts = [make_post(0, text="they examined it")]
        assert filter_first_person(posts, self.config(("mine",))) == []


class TestFilterMinLength:
    def test_one_word_removed_at_min_three(self):
        posts = [make_post(0, text="ok")]
        assert filter_min_length(posts, FilterConfig(min_words=3)) == []

    def test_boundary_is_inclusive(self):
        posts = [make_post(0, text="a b c")]
        assert filter_min_length(posts, FilterConfig(min_words=3)) == posts

    def test_min_one_removes_only_empty(self):
        posts = [make_post(0, text=""), make_post(1, text="   "), make_post(2, text="hi")]
        kept = filter_min_length(posts, FilterConfig(min_words=1))
        assert [p.id for p in kept] == ["p2"]


class TestSampleFraction:
    def test_fraction_one_is_identity(self):
        posts = [make_post(i) for i in range(10)]
        config = FilterConfig(sample_fraction=1.0, sample_seed=1)
        assert sample_fraction(posts, config) == posts

    def test_paper_scale_count(self):
        posts = [make_post(i) for i in range(65282)]
        config = FilterConfig(sample_fraction=0.05, sample_seed=42)
        assert len(sample_fraction(posts, config)) == 3264

    def test_deterministic_for_fixed_seed(self):
        posts = [make_post(i) for i in range(1000)]
        config = FilterConfig(sample_fraction=0.1, sample_seed=7)
        first = sample_fraction(posts, config)
        second = sample_fraction(posts, config)
        assert first == second

    def test_different_seeds_differ(self):
        posts = [make_post(i) for i in range(1000)]
        a = sample_fraction(posts, FilterConfig(sample_fraction=0.1, sample_seed=1))
        b = sample_fraction(posts, FilterConfig(sample_fraction=0.1, sample_seed=2))
        assert a != b

    def test_preserves_input_order(self):
        posts = [make_post(i) for i in range(100)]
        sampled = sample_fraction(posts, FilterConfig(sample_fraction=0.3, sample_seed=5))
        indices = [int(p.id[1:]) for p in sampled]
        assert indices == sorted(indices)


class TestAugment:
    def test_format(self):
        post = make_post(0, subreddit="lgbt", text="hello")
        assert augment_with_subreddit(post) == "Subreddit: r/lgbt\nhello"

    def test_empty_text(self):
        post = make_post(0, subreddit="adhd", text="")
        assert augment_with_subreddit(post) == "Subreddit: r/adhd\n"

    def test_empty_subreddit_rejected(self):
        with pytest.raises(ValueError):
            augment_with_subreddit(make_post(0, subreddit=""))


class TestPipeline:
    def ten_post_fixture(self):
        """Each stage removes exactly two posts."""
        posts = [
            make_post(0, subreddit="gonewild", text="I was there"),
            make_post(1, subreddit="nsfwstuff", text="my story"),
            make_post(2, text="The committee decided today"),
            make_post(3, text="Weather report for tomorrow"),
            make_post(4, text="I am"),
            make_post(5, text="my cat"),
            make_post(6, text="I went home early"),
            make_post(7, text="we stayed out late"),
            make_post(8, text="my dog ate it"),
            make_post(9, text="us three left early"),
        ]
        config = FilterConfig(
            nsfw_subreddits=frozenset({"gonewild", "nsfwstuff"}),
            min_words=3,
            sample_fraction=0.5,
            sample_seed=11,
        )
        return posts, config

    def test_hand_built_ledger(self):
        posts, config = self.ten_post_fixture()
        result, ledger = run_filter_pipeline(posts, config)
        assert ledger.rows() == [10, 8, 6, 4, 2]
        assert len(result) == 2

    def test_all_pass_identity(self):
        posts = [make_post(i, text="I went home early") for i in range(5)]
        config = FilterConfig(sample_fraction=1.0)
        result, ledger = run_filter_pipeline(posts, config)
        assert result == posts
        assert ledger.rows() == [5, 5, 5, 5, 5]

    def test_pipeline_equals_sequential_stages(self):
        posts, config = self.ten_post_fixture()
        result, _ = run_filter_pipeline(posts, config)
        manual = sample_fraction(
            filter_min_length(
                filter_first_person(filter_nsfw(posts, config), config), config
            ),
            config,
        )
        assert result == manual

    def test_ledger_serialization(self, tmp_path):
        posts, config = self.ten_post_fixture()
        _, ledger = run_filter_pipeline(posts, config)
        out = tmp_path / "ledger.json"
        ledger.to_json(out)
        data = json.loads(out.read_text())
        assert [s["stage"] for s in data["stages"]] == [
            "input", "nsfw", "first_person", "min_length", "sample",
        ]
        assert data["sampling"]["seed"] == 11

    @given(st.lists(st.integers(0, 3), min_size=0, max_size=60), st.integers(0, 2**32))
    @settings(max_examples=50, deadline=None)
    def test_ledger_counts_monotone_on_random_fixtures(self, shape, seed):
        rng = random.Random(seed)
        texts = ["I went home", "ok", "The door closed slowly", "my my my"]
        posts = [
            Post(
                id=f"p{i}",
                author=f"u{rng.randrange(8)}",
                subreddit=rng.choice(["a", "b", "gonewild"]),
                text=texts[t],
            )
            for i, t in enumerate(shape)
        ]
        config = FilterConfig(
            nsfw_subreddits=frozenset({"gonewild"}),
            sample_fraction=rng.choice([0.25, 0.5, 1.0]),
            sample_seed=seed,
        )
        _, ledger = run_filter_pipeline(posts, config)
        rows = ledger.rows()
        assert all(a >= b for a, b in zip(rows, rows[1:]))


class TestFilterConfigValidation:
    def test_rejects_empty_lexicon(self):
        with pytest.raises(ValueError):
            FilterConfig(pronoun_lexicon=())

    def test_rejects_bad_fraction(self):
        with pytest.raises(ValueError):
            FilterConfig(sample_fraction=0.0)
        with pytest.raises(ValueError):
            FilterConfig(sample_fraction=1.5)

    def test_normalizes_blocklist_case(self):
        config = FilterConfig(nsfw_subreddits=frozenset({"GoneWild"}))
        assert "gonewild" in config.nsfw_subreddits
