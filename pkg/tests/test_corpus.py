import pytest

from corpus import (
    CONTENT_PLACEHOLDER,
    Corpus,
    Example,
    build_prompt,
    load_csv,
    prompt_template,
    save_csv,
    split,
)
from errors import BadLabel, EmptyText, MalformedInputFile, MissingHeader, SampleTooLarge
from evalmetrics import Label

CHECKLIST_ITEMS = [
    "Emotional Language",
    "Positive Expressions",
    "Negative Expressions",
    "Tone Shifts",
    "Balanced or Neutral Tone",
]


class TestLoadCsv:
    def test_two_rows(self, fixtures_dir):
        corpus = load_csv(fixtures_dir / "two_rows.csv")
        assert len(corpus) == 2
        assert corpus.examples[0] == Example("good news", Label.POSITIVE)
        assert corpus.examples[1] == Example("bad news", Label.NEGATIVE)
        assert corpus.source_path == str(fixtures_dir / "two_rows.csv")

    def test_labels_normalized(self, fixtures_dir):
        corpus = load_csv(fixtures_dir / "mixed_case.csv")
        assert [ex.label for ex in corpus] == [Label.POSITIVE, Label.NEUTRAL, Label.NEGATIVE, Label.NEUTRAL]

    def test_quoted_fields(self, fixtures_dir):
        corpus = load_csv(fixtures_dir / "multiline.csv")
        assert corpus.examples[0].text == 'Revenue grew, "again".\nAnalysts were pleased.'
        assert corpus.examples[1].text == "Plain line, with a comma"

    def test_bad_label_row(self, fixtures_dir):
        with pytest.raises(BadLabel) as excinfo:
            load_csv(fixtures_dir / "bad_label.csv")
        assert excinfo.value.row == 2
        assert excinfo.value.label == "mixed"

    def test_empty_text_row(self, fixtures_dir):
        with pytest.raises(EmptyText) as excinfo:
            load_csv(fixtures_dir / "empty_text.csv")
        assert excinfo.value.row == 3

    def test_missing_header(self, fixtures_dir):
        with pytest.raises(MissingHeader):
            load_csv(fixtures_dir / "no_header.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(MissingHeader):
            load_csv(path)

    @pytest.mark.parametrize(
        "content",
        ['text,label\n"good news,positive\n', "text,label\ngood news,positive\nbad news,negative,extra\n"],
    )
    def test_unparseable_csv(self, tmp_path, content):
        path = tmp_path / "broken.csv"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(MalformedInputFile):
            load_csv(path)

    def test_not_utf8(self, tmp_path):
        path = tmp_path / "latin1.csv"
        path.write_bytes("text,label\nd\xe9j\xe0 vu,neutral\n".encode("latin-1"))
        with pytest.raises(MalformedInputFile):
            load_csv(path)

    def test_round_trip_is_fixed_point(self, fixtures_dir, tmp_path):
        first = load_csv(fixtures_dir / "multiline.csv")
        save_csv(first, tmp_path / "out.csv")
        second = load_csv(tmp_path / "out.csv")
        save_csv(second, tmp_path / "again.csv")
        assert second.examples == first.examples
        assert (tmp_path / "out.csv").read_bytes() == (tmp_path / "again.csv").read_bytes()

    def test_corpus_id_ignores_path(self, fixtures_dir, tmp_path):
        original = load_csv(fixtures_dir / "mixed_case.csv")
        save_csv(original, tmp_path / "copy.csv")
        assert load_csv(tmp_path / "copy.csv").corpus_id == original.corpus_id


class TestBuildPrompt:
    def test_template_sections(self):
        prompt = build_prompt("Shares rose.")
        assert "Sentiment Indicators Checklist" in prompt
        assert "Text: Shares rose." in prompt
        assert "Assess the sentiment of the given text" in prompt
        for item in CHECKLIST_ITEMS:
            assert item in prompt
        assert "Response Format:" in prompt

    def test_section_order(self):
        prompt = build_prompt("Shares rose.")
        positions = [prompt.index(s) for s in ["Instructions:", "Text: Shares rose.", "Sentiment Indicators Checklist", "Response Format:"]]
        assert positions == sorted(positions)

    def test_only_content_slot_differs(self):
        a = build_prompt("first text")
        b = build_prompt("second")
        template = prompt_template()
        prefix, suffix = template.split(CONTENT_PLACEHOLDER)
        assert a == prefix + "first text" + suffix
        assert b == prefix + "second" + suffix

    def test_length(self):
        text = "Markets were flat."
        assert len(build_prompt(text)) == len(prompt_template()) - len(CONTENT_PLACEHOLDER) + len(text)

    def test_newline_passthrough(self):
        text = "line one\nline two"
        assert "Text: line one\nline two\n" in build_prompt(text)

    def test_braces_in_text(self):
        assert "Text: {content} literally" in build_prompt("{content} literally")

    def test_empty(self):
        with pytest.raises(EmptyText):
            build_prompt("")


class TestSplit:
    def test_full_size_keeps_order(self, separable_corpus):
        subset = split(separable_corpus, len(separable_corpus), seed=3)
        assert subset.examples == separable_corpus.examples

    def test_same_seed_same_subset(self, separable_corpus):
        assert split(separable_corpus, 50, seed=7).examples == split(separable_corpus, 50, seed=7).examples

    def test_different_seed_differs(self, separable_corpus):
        assert split(separable_corpus, 50, seed=7).examples != split(separable_corpus, 50, seed=8).examples

    def test_no_duplicates_and_source_order(self):
        examples = tuple(Example(f"text {i}", Label.NEUTRAL) for i in range(200))
        corpus = Corpus(examples=examples, source_path="<numbered>")
        subset = split(corpus, 60, seed=7)
        indices = [examples.index(ex) for ex in subset]
        assert len(set(indices)) == 60
        assert indices == sorted(indices)

    def test_records_subset(self, separable_corpus):
        subset = split(separable_corpus, 50, seed=7)
        assert subset.corpus_id == separable_corpus.corpus_id
        assert subset.subset_seed == 7
        assert subset.subset_size == 50
        assert subset.source_size == len(separable_corpus)

    def test_pinned_subset(self, numbered_corpus, fixtures_dir):
        lines = (fixtures_dir / "split_5842_n50_seed7.txt").read_text(encoding="utf-8").splitlines()
        expected = [int(line) for line in lines if line and not line.startswith("#")]
        subset = split(numbered_corpus, 50, seed=7)
        assert [int(ex.text.split()[1]) for ex in subset] == expected

    @pytest.mark.parametrize("n", [0, 301, -1])
    def test_sample_too_large(self, separable_corpus, n):
        with pytest.raises(SampleTooLarge):
            split(separable_corpus, n, seed=0)


class TestExample:
    def test_rejects_blank_text(self):
        with pytest.raises(EmptyText):
            Example("   ", Label.POSITIVE)

    def test_rejects_unknown_gold(self):
        with pytest.raises(ValueError):
            Example("text", Label.UNKNOWN)
