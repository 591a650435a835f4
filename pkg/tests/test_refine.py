import pytest

from fairqr.corpus import GroupSchema, ingest_corpus
from fairqr.errors import LexiconError, ParseError, RefinerError, TemplateError
from fairqr.fairness import (
    ExposureDistribution,
    FairnessTarget,
    exposure,
    kl_divergence,
    target_from_qrels,
)
from fairqr.index import build_index, retrieve
from fairqr.llm import ChatCompletionClient
from fairqr.refine import (
    DEFAULT_PROMPT_TEMPLATE,
    LLMRefiner,
    LexiconRefiner,
    RefinerConfig,
    fair_qr,
    parse_refinement,
    render_prompt,
)

SUBS = ("male", "female", "Unknown")


def make_target(probs, category="gender"):
    return FairnessTarget(
        "q1", category, ExposureDistribution(category, probs), "explicit"
    )


CURRENT = ExposureDistribution("gender", [0.7, 0.3, 0.0])
TARGET = make_target([0.5, 0.5, 0.0])


class TestRenderPrompt:
    def test_subgroup_substituted_in_place(self):
        prompt = render_prompt(
            DEFAULT_PROMPT_TEMPLATE, "solar power", TARGET, CURRENT, 20,
            "female", SUBS,
        )
        assert "it's the subgroup: female" in prompt
        assert "{subgroup}" not in prompt
        assert "{Query}" not in prompt

    def test_distribution_formatting(self):
        prompt = render_prompt(
            DEFAULT_PROMPT_TEMPLATE, "q", TARGET, CURRENT, 20, "female", SUBS
        )
        assert "{male: 0.7000, female: 0.3000, Unknown: 0.0000}" in prompt
        assert "{male: 0.5000, female: 0.5000, Unknown: 0.0000}" in prompt

    def test_top_k_substituted(self):
        prompt = render_prompt(
            DEFAULT_PROMPT_TEMPLATE, "q", TARGET, CURRENT, 37, "female", SUBS
        )
        assert "first 37 documents" in prompt

    def test_missing_placeholder_rejected(self):
        with pytest.raises(TemplateError):
            render_prompt("no placeholders", "q", TARGET, CURRENT, 20, "f", SUBS)


class TestParseRefinement:
    def test_extracts_after_marker(self):
        response = "reasoning...\nREFINED_QUERY: solar power women engineers"
        assert parse_refinement(response, "fallback") == "solar power women engineers"

    def test_missing_marker_is_error(self):
        with pytest.raises(ParseError) as exc:
            parse_refinement("no marker here", "fallback")
        assert exc.value.fallback_query == "fallback"

    def test_last_marker_wins(self):
        response = "REFINED_QUERY: first\nmore\nREFINED_QUERY: second"
        assert parse_refinement(response, "f") == "second"


class TestLexiconRefiner:
    def test_appends_keyword(self):
        refiner = LexiconRefiner({"female": ["women"]})
        assert refiner.refine("solar power", TARGET, CURRENT, 20, "female") == (
            "solar power women"
        )

    def test_unchanged_when_all_present(self):
        refiner = LexiconRefiner({"female": ["women"]})
        assert refiner.refine("women rights", TARGET, CURRENT, 20, "female") == (
            "women rights"
        )

    def test_skips_present_keywords(self):
        refiner = LexiconRefiner({"female": ["women", "her"]})
        assert refiner.refine("women x", TARGET, CURRENT, 20, "female") == "women x her"

    def test_missing_subgroup_is_error(self):
        refiner = LexiconRefiner({})
        with pytest.raises(LexiconError):
            refiner.refine("q", TARGET, CURRENT, 20, "female")


class TestLLMRefiner:
    def _client(self, transport):
        return ChatCompletionClient("http://stub", "test-model", transport=transport)

    @staticmethod
    def _response(text):
        return {"choices": [{"message": {"content": text}}]}

    def test_stubbed_transport_roundtrip(self):
        seen = {}

        def transport(url, headers, payload):
            seen["payload"] = payload
            return self._response("ok\nREFINED_QUERY: solar power women")

        refiner = LLMRefiner(self._client(transport), SUBS, temperature=0.3)
        refined = refiner.refine("solar power", TARGET, CURRENT, 20, "female")
        assert refined == "solar power women"
        assert seen["payload"]["temperature"] == 0.3
        assert "it's the subgroup: female" in seen["payload"]["messages"][0]["content"]
        assert refiner.last_response.endswith("solar power women")

    def test_retry_bound(self):
        calls = []

        def transport(url, headers, payload):
            calls.append(1)
            raise ConnectionError("down")

        refiner = LLMRefiner(self._client(transport), SUBS)
        with pytest.raises(RefinerError):
            refiner.refine("q", TARGET, CURRENT, 20, "female")
        assert len(calls) == 3  # 1 attempt + 2 retries

    def test_markerless_response_is_parse_error(self):
        def transport(url, headers, payload):
            return self._response("no marker at all")

        refiner = LLMRefiner(self._client(transport), SUBS)
        with pytest.raises(ParseError):
            refiner.refine("q", TARGET, CURRENT, 20, "female")


def small_collection():
    """6 docs, one topic; male docs dominate query matches until the
    'women' keyword is appended."""
    records = [
        {"id": "m1", "text": "solar power plant", "groups": {"gender": ["male"]}},
        {"id": "m2", "text": "solar power grid", "groups": {"gender": ["male"]}},
        {"id": "m3", "text": "solar power cell", "groups": {"gender": ["male"]}},
        {"id": "f1", "text": "solar women energy advocate coalition power",
         "groups": {"gender": ["female"]}},
        {"id": "f2", "text": "women energy network", "groups": {"gender": ["female"]}},
        {"id": "x1", "text": "wind farm", "groups": {}},
    ]
    store = ingest_corpus(records, [GroupSchema("gender", SUBS)])
    return store, build_index(store)


class TestFairQRLoop:
    def test_target_met_at_iteration_zero(self):
        store, index = small_collection()
        config = RefinerConfig(category="gender", pool_size=3, k=3)
        baseline = retrieve(index, "solar power", 3, "q1")
        eps = exposure(baseline, store, "gender", 3)
        target = make_target(eps.probabilities)
        ranked, trace = fair_qr(
            index, store, "solar power", target, config,
            LexiconRefiner({"female": ["women"]}), "q1",
        )
        assert trace.terminal_reason == "target-met"
        assert len(trace.records) == 1
        assert ranked == baseline

    def test_identity_refiner_terminates_no_decrease(self):
        store, index = small_collection()
        config = RefinerConfig(category="gender", pool_size=3, k=3)

        class Identity:
            def refine(self, query, target, current, top_k, subgroup):
                return query

        ranked, trace = fair_qr(
            index, store, "solar power", TARGET, config, Identity(), "q1"
        )
        assert trace.terminal_reason == "no-decrease"
        # one rejected refinement attempt recorded after iteration 0
        assert len(trace.records) == 2
        assert trace.records[1].accepted is False
        assert trace.records[1].divergence == trace.records[0].divergence

    def test_failing_refiner_degrades_to_baseline(self):
        store, index = small_collection()
        config = RefinerConfig(category="gender", pool_size=3, k=3)

        class Broken:
            def refine(self, *args):
                raise RefinerError("transport down")

        ranked, trace = fair_qr(
            index, store, "solar power", TARGET, config, Broken(), "q1"
        )
        assert trace.terminal_reason == "no-decrease"
        assert ranked == retrieve(index, "solar power", 3, "q1")

    def test_lexicon_improves_skewed_collection(self):
        store, index = small_collection()
        config = RefinerConfig(category="gender", pool_size=4, k=4)
        target = make_target([0.5, 0.5, 0.0])
        refiner = LexiconRefiner({"female": ["women"], "male": ["plant"]})
        ranked, trace = fair_qr(
            index, store, "solar power", target, config, refiner, "q1"
        )
        deltas = [r.divergence for r in trace.records if r.accepted]
        assert len(deltas) >= 2  # at least one accepted refinement
        assert all(b < a for a, b in zip(deltas, deltas[1:]))
        # every recorded exposure replays exactly
        for record in trace.records:
            replayed = retrieve(index, record.query, config.pool_size, "q1")
            eps = exposure(replayed, store, "gender", config.k)
            assert tuple(eps.probabilities) == record.exposure
            assert kl_divergence(
                eps.probabilities, target.target.probabilities
            ) == record.divergence

    def test_trace_bounded_by_max_iterations(self, synth):
        store, index = synth["store"], synth["index"]
        qrels, lexicon = synth["qrels"], synth["lexicon"]
        config = RefinerConfig(category="gender", pool_size=20, k=20)
        for query_id, qtext in synth["queries"]:
            target = target_from_qrels(qrels, store, query_id, "gender")
            _, trace = fair_qr(
                index, store, qtext, target, config,
                LexiconRefiner(lexicon), query_id,
            )
            assert len(trace.records) <= config.max_iterations + 1
            assert trace.terminal_reason in (
                "no-decrease", "max-iterations", "target-met"
            )

    def test_deterministic_end_to_end(self, synth):
        store, index = synth["store"], synth["index"]
        target = target_from_qrels(synth["qrels"], store, "q00", "gender")
        config = RefinerConfig(category="gender", pool_size=20, k=20)
        refiner = LexiconRefiner(synth["lexicon"])
        first = fair_qr(index, store, "topic00", target, config, refiner, "q00")
        second = fair_qr(index, store, "topic00", target, config, refiner, "q00")
        assert first == second


class TestRefinerConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            RefinerConfig(category="g", max_iterations=0)
        with pytest.raises(ValueError):
            RefinerConfig(category="g", temperature=3.0)
        with pytest.raises(ValueError):
            RefinerConfig(category="g", k=50, pool_size=20)
