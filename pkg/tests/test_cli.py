import json

import pytest

from dforge.cli import main
from dforge.corpus import Post, save_posts
from dforge.generation import load_traces


@pytest.fixture()
def corpus_file(tmp_path):
    posts = [
        Post(id="p0", author="u0", subreddit="gonewild", text="I was there that day"),
        Post(id="p1", author="u1", subreddit="books", text="The committee decided it"),
        Post(id="p2", author="u2", subreddit="lgbt", text="I am"),
        Post(id="p3", author="u3", subreddit="lgbt", text="I went home early today"),
        Post(id="p4", author="u4", subreddit="adhd", text="my cat sat on my keyboard"),
        Post(id="p5", author="u5", subreddit="books", text="we stayed out very late"),
    ]
    path = tmp_path / "posts.jsonl"
    save_posts(posts, path)
    return path


@pytest.fixture()
def mock_chat_fixture(tmp_path):
    path = tmp_path / "chat_mock.json"
    path.write_text(json.dumps({"refuse_if_contains": ["REFUSEME"]}), encoding="utf-8")
    return path


def run(args):
    return main([str(a) for a in args])


class TestFilterCommand:
    def test_writes_corpus_and_ledger(self, corpus_file, tmp_path):
        out = tmp_path / "out"
        code = run(
            ["filter", "--input", corpus_file, "--output-dir", out, "--fraction", "1.0"]
        )
        assert code == 0
        ledger = json.loads((out / "filter_ledger.json").read_text())
        rows = [s["rows"] for s in ledger["stages"]]
        assert rows[0] == 6
        assert (out / "filtered.jsonl").exists()
        assert (out / "config_snapshot.json").exists()

    def test_missing_input_exits_2_naming_path(self, tmp_path, capsys):
        code = run(["filter", "--input", tmp_path / "nope.jsonl", "--output-dir", tmp_path / "o"])
        assert code == 2
        assert "nope.jsonl" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, corpus_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run(
                ["filter", "--input", corpus_file, "--output-dir", out, "--seed", "9",
                 "--fraction", "0.5"]
            ) == 0
        assert (out_a / "filtered.jsonl").read_bytes() == (out_b / "filtered.jsonl").read_bytes()
        assert (out_a / "filter_ledger.json").read_bytes() == (out_b / "filter_ledger.json").read_bytes()

    def test_blocklist_flag(self, corpus_file, tmp_path):
        blocklist = tmp_path / "nsfw.txt"
        blocklist.write_text("gonewild\n", encoding="utf-8")
        out = tmp_path / "out"
        run(
            ["filter", "--input", corpus_file, "--output-dir", out,
             "--nsfw-blocklist", blocklist, "--fraction", "1.0"]
        )
        ledger = json.loads((out / "filter_ledger.json").read_text())
        assert ledger["stages"][1]["rows"] == 5


class TestGenerateCommand:
    def test_mock_generation_deterministic(self, corpus_file, tmp_path, mock_chat_fixture):
        outs = []
        for name in ("g1", "g2"):
            out = tmp_path / name
            code = run(
                ["generate", "--input", corpus_file, "--output-dir", out,
                 "--mock", mock_chat_fixture]
            )
            assert code == 0
            outs.append((out / "traces.jsonl").read_bytes())
        assert outs[0] == outs[1]

    def test_refusals_are_data_not_failures(self, tmp_path, mock_chat_fixture):
        posts = [
            Post(id="p0", author="u", subreddit="s", text="REFUSEME please"),
            Post(id="p1", author="u", subreddit="s", text="normal post body here"),
        ]
        path = tmp_path / "posts.jsonl"
        save_posts(posts, path)
        out = tmp_path / "out"
        code = run(
            ["generate", "--input", path, "--output-dir", out, "--mock", mock_chat_fixture]
        )
        assert code == 0
        report = json.loads((out / "generation_report.json").read_text())
        assert report["refused_final"] == 1
        assert report["succeeded"] == 1

    def test_augmentation_prefixes_subreddit(self, corpus_file, tmp_path, mock_chat_fixture):
        out = tmp_path / "out"
        run(["generate", "--input", corpus_file, "--output-dir", out, "--mock", mock_chat_fixture])
        traces = load_traces(out / "traces.jsonl")
        assert traces[0].input_text.startswith("Subreddit: r/")

    def test_no_endpoint_no_mock_exits_2(self, corpus_file, tmp_path, monkeypatch):
        monkeypatch.delenv("DF_ENDPOINT", raising=False)
        code = run(["generate", "--input", corpus_file, "--output-dir", tmp_path / "o"])
        assert code == 2

    def test_calibrate_flag_writes_sweep_report(self, corpus_file, tmp_path, mock_chat_fixture):
        out = tmp_path / "out"
        code = run(
            ["generate", "--input", corpus_file, "--output-dir", out,
             "--mock", mock_chat_fixture, "--calibrate", "--grid", "0.5,0.6,0.7,0.8,0.9,1.0"]
        )
        assert code == 0
        sweep = json.loads((out / "calibration.json").read_text())
        assert len(sweep["mean_similarity"]) == 6
        assert "chosen" in sweep


class TestMetricsCommand:
    def make_traces(self, corpus_file, tmp_path, mock_chat_fixture):
        out = tmp_path / "gen"
        run(["generate", "--input", corpus_file, "--output-dir", out, "--mock", mock_chat_fixture])
        return out / "traces.jsonl"

    def test_similarity_report_and_summary(self, corpus_file, tmp_path, mock_chat_fixture):
        traces = self.make_traces(corpus_file, tmp_path, mock_chat_fixture)
        out = tmp_path / "metrics"
        code = run(["metrics", "--traces", traces, "--output-dir", out])
        assert code == 0
        rows = [json.loads(l) for l in (out / "similarity.jsonl").read_text().splitlines()]
        assert rows, "no similarity rows written"
        for row in rows:
            assert row["divergence"] == 1.0 - row["bleu3"]
        summary = json.loads((out / "metrics_summary.json").read_text())
        assert summary["pairs"] == len(rows)
        assert set(summary["means"]) == {"bleu3", "rouge_l", "meteor", "cosine", "divergence"}

    def test_hash_embeddings_add_supplementary_means(self, corpus_file, tmp_path, mock_chat_fixture):
        traces = self.make_traces(corpus_file, tmp_path, mock_chat_fixture)
        out = tmp_path / "metrics"
        run(["metrics", "--traces", traces, "--output-dir", out, "--embeddings", "hash"])
        summary = json.loads((out / "metrics_summary.json").read_text())
        assert "bert_score_f1" in summary["supplementary_means"]
        assert "style_similarity" in summary["supplementary_means"]

    def test_identical_pairs_fixture_gives_zero_divergence_mean(self, tmp_path):
        pairs = tmp_path / "pairs.jsonl"
        rows = [
            {"id": f"p{i}", "source": f"same text body {i}", "synthetic": f"same text body {i}"}
            for i in range(4)
        ]
        pairs.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        out = tmp_path / "metrics"
        assert run(["metrics", "--pairs", pairs, "--output-dir", out]) == 0
        summary = json.loads((out / "metrics_summary.json").read_text())
        assert summary["means"]["divergence"] == 0.0

    def test_requires_exactly_one_input_mode(self, tmp_path):
        assert run(["metrics", "--output-dir", tmp_path / "o"]) == 2


class TestUnlinkCommand:
    def test_fixture_scan_and_threshold(self, corpus_file, tmp_path, mock_chat_fixture):
        gen_out = tmp_path / "gen"
        run(["generate", "--input", corpus_file, "--output-dir", gen_out, "--mock", mock_chat_fixture])
        traces = load_traces(gen_out / "traces.jsonl")
        successes = [t for t in traces if t.outcome == "success"]
        # first synthetic maps to a reddit page equal to itself -> discarded
        from dforge.privacy_eval import build_query

        search_map = {"__default__": []}
        pages = {}
        url = "https://www.reddit.com/r/x/1"
        search_map[build_query(successes[0].final_text)] = [
            {"rank": 1, "url": url, "snippet": ""}
        ]
        pages[url] = successes[0].final_text
        search_path = tmp_path / "search.json"
        pages_path = tmp_path / "pages.json"
        search_path.write_text(json.dumps(search_map), encoding="utf-8")
        pages_path.write_text(json.dumps(pages), encoding="utf-8")

        out = tmp_path / "unlink"
        code = run(
            ["unlink", "--traces", gen_out / "traces.jsonl", "--output-dir", out,
             "--search-fixture", search_path, "--pages-fixture", pages_path]
        )
        assert code == 0
        accounting = json.loads((out / "unlink_accounting.json").read_text())
        assert accounting["before"] == len(successes)
        assert accounting["discarded"] == 1
        kept = load_traces(out / "kept.jsonl")
        assert len(kept) == accounting["after"]

    def test_identical_pairs_under_self_match_mock_discard_all(self, tmp_path):
        from dforge.privacy_eval import build_query

        rows = [
            {"id": f"p{i}", "source": f"identical body text {i} words", "synthetic": f"identical body text {i} words"}
            for i in range(3)
        ]
        pairs = tmp_path / "pairs.jsonl"
        pairs.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        search_map, pages = {}, {}
        for r in rows:
            url = f"https://reddit.com/r/self/{r['id']}"
            search_map[build_query(r["synthetic"])] = [{"rank": 1, "url": url}]
            pages[url] = r["synthetic"]
        search_path, pages_path = tmp_path / "s.json", tmp_path / "p.json"
        search_path.write_text(json.dumps(search_map), encoding="utf-8")
        pages_path.write_text(json.dumps(pages), encoding="utf-8")
        out = tmp_path / "unlink"
        assert run(
            ["unlink", "--pairs", pairs, "--output-dir", out,
             "--search-fixture", search_path, "--pages-fixture", pages_path]
        ) == 0
        accounting = json.loads((out / "unlink_accounting.json").read_text())
        assert accounting == {"before": 3, "discarded": 3, "after": 0}


class TestSurveyCommand:
    def test_chi_square_report(self, tmp_path):
        rows = ["respondent,set,correct"]
        rows += [f"r{i},1,{str(i < 54).lower()}" for i in range(100)]
        rows += [f"s{i},2,{str(i < 34).lower()}" for i in range(100)]
        rows += [f"t{i},3,{str(i < 30).lower()}" for i in range(100)]
        path = tmp_path / "survey.csv"
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        out = tmp_path / "out"
        code = run(["survey", "--responses", path, "--output-dir", out])
        assert code == 0
        report = json.loads((out / "survey_report.json").read_text())
        assert report["tally"]["1"]["observed_p"] == pytest.approx(0.54)
        assert report["chi_square"]["degrees_of_freedom"] == 3

    def test_survey_alone_is_a_valid_partial_run(self, tmp_path):
        path = tmp_path / "survey.csv"
        path.write_text("respondent,set,correct\nr1,1,true\nr2,1,false\n", encoding="utf-8")
        out = tmp_path / "out"
        assert run(["survey", "--responses", path, "--output-dir", out]) == 0
        assert (out / "survey_report.json").exists()


class TestEvalClassifierCommand:
    def test_multilabel(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        rows = [
            {"id": "1", "gold": ["Gender"], "pred": ["Gender"]},
            {"id": "2", "gold": ["Age"], "pred": ["Gender"]},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        out = tmp_path / "out"
        assert run(["eval-classifier", "--task", "multilabel", "--predictions", path,
                    "--output-dir", out]) == 0
        report = json.loads((out / "classifier_report.json").read_text())
        assert report["subset_accuracy"] == 0.5

    def test_span(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        pred = tmp_path / "pred.jsonl"
        gold.write_text(
            json.dumps({"id": "1", "text": "x" * 20,
                        "spans": [{"start": 0, "end": 10, "category": "Age"}]}) + "\n",
            encoding="utf-8",
        )
        pred.write_text(
            json.dumps({"id": "1", "text": "x" * 20,
                        "spans": [{"start": 0, "end": 5, "category": "Age"}]}) + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        assert run(["eval-classifier", "--task", "span", "--gold", gold, "--pred", pred,
                    "--output-dir", out]) == 0
        report = json.loads((out / "classifier_report.json").read_text())
        assert report["f1"] == 1.0


class TestProportionsCommand:
    def test_csv_output(self, tmp_path):
        def write_ann(path, n_gender, n_age):
            spans = [{"start": i * 2, "end": i * 2 + 2, "category": "Gender"} for i in range(n_gender)]
            spans += [{"start": 40 + i * 2, "end": 42 + i * 2, "category": "Age"} for i in range(n_age)]
            path.write_text(
                json.dumps({"id": "1", "text": "x" * 100, "spans": spans}) + "\n",
                encoding="utf-8",
            )

        orig, synth = tmp_path / "o.jsonl", tmp_path / "s.jsonl"
        write_ann(orig, 2, 2)
        write_ann(synth, 3, 1)
        out = tmp_path / "out"
        assert run(["proportions", "--original", orig, "--synthetic", synth,
                    "--output-dir", out]) == 0
        report = json.loads((out / "proportions.json").read_text())
        assert report["max_abs_deviation"] == pytest.approx(0.25)
        assert (out / "proportions.csv").read_text().startswith("category,original")


class TestIaaCommand:
    def test_iaa_json(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        a.write_text(
            json.dumps({"id": "1", "text": "x" * 10,
                        "spans": [{"start": 0, "end": 5, "category": "Gender"}],
                        "annotator": "a"}) + "\n",
            encoding="utf-8",
        )
        b.write_text(
            json.dumps({"id": "1", "text": "x" * 10,
                        "spans": [{"start": 3, "end": 8, "category": "Gender"}],
                        "annotator": "b"}) + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        assert run(["iaa", "--annotations-a", a, "--annotations-b", b, "--output-dir", out]) == 0
        report = json.loads((out / "iaa.json").read_text())
        assert report["pairwise_f1"] == 1.0
        assert report["mean_overlap_fraction"] == pytest.approx(0.25)


class TestImportAnnotationsCommand:
    def test_doccano_to_native(self, tmp_path):
        src = tmp_path / "doccano.jsonl"
        src.write_text(
            json.dumps({"text": "I'm male", "label": [[0, 8, "Gender"]]}) + "\n",
            encoding="utf-8",
        )
        dst = tmp_path / "native.jsonl"
        assert run(["import-annotations", "--input", src, "--output", dst]) == 0
        record = json.loads(dst.read_text().splitlines()[0])
        assert record["spans"] == [{"start": 0, "end": 8, "category": "Gender"}]

    def test_bad_category_exits_2(self, tmp_path, capsys):
        src = tmp_path / "doccano.jsonl"
        src.write_text(
            json.dumps({"text": "hello", "label": [[0, 5, "Bogus"]]}) + "\n", encoding="utf-8"
        )
        code = run(["import-annotations", "--input", src, "--output", tmp_path / "n.jsonl"])
        assert code == 2
        assert "record 0" in capsys.readouterr().err


class TestReportCommand:
    def test_aggregates_available_reports(self, corpus_file, tmp_path, mock_chat_fixture):
        root = tmp_path / "run"
        run(["filter", "--input", corpus_file, "--output-dir", root / "filter",
             "--fraction", "1.0"])
        run(["generate", "--input", corpus_file, "--output-dir", root / "gen",
             "--mock", mock_chat_fixture])
        run(["metrics", "--traces", root / "gen" / "traces.jsonl",
             "--output-dir", root / "metrics"])
        code = run(["report", "--dir", root])
        assert code == 0
        summary = json.loads((root / "summary.json").read_text())
        assert {"filter", "generation", "metrics"} <= set(summary["succeeded"])
        assert summary["reports"]["metrics"]["pairs"] > 0

    def test_missing_dir_exits_2(self, tmp_path):
        assert run(["report", "--dir", tmp_path / "missing"]) == 2
