import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adavrag.errors import BackendUnreachable, EmptyQuery, PreconditionError
from adavrag.gateway import Gateway, MockBackend
from adavrag.levels import Level
from adavrag.prompts import load_template
from adavrag.router import IntentRouter, classify_heuristic, force_level, parse_level

REFERENCE_QUERIES = [
    ("What color of clothes is the woman who appears at the fifth second wearing?", Level.L1),
    ("Why did the woman cry before the rainy scene started?", Level.L2),
    ("What life lessons does this movie convey?", Level.L3),
]


class Fixed(MockBackend):
    def __init__(self, outputs):
        super().__init__("llm")
        self.outputs = list(outputs)
        self.calls = 0

    def invoke(self, payload, params):
        self.calls += 1
        out = self.outputs[min(self.calls - 1, len(self.outputs) - 1)]
        if isinstance(out, Exception):
            raise out
        return out


class TestClassify:
    @pytest.mark.parametrize("query,level", REFERENCE_QUERIES)
    def test_llm_mock(self, gateway, query, level):
        res = IntentRouter(gateway).classify(query)
        assert (res.level, res.source) == (level, "llm")

    @pytest.mark.parametrize("query,level", REFERENCE_QUERIES)
    def test_heuristic(self, query, level):
        assert classify_heuristic(query).level is level

    def test_retry_then_heuristic(self):
        b = Fixed(["I am not sure", "still unsure"])
        res = IntentRouter(Gateway.mock(llm=b)).classify("why did it happen")
        assert (res.level, res.source, b.calls) == (Level.L2, "heuristic", 2)

    def test_second_attempt_parses(self):
        b = Fixed(["hmm", "Answer: Level-3"])
        res = IntentRouter(Gateway.mock(llm=b)).classify("anything")
        assert (res.level, res.source) == (Level.L3, "llm")

    def test_backend_down_uses_heuristic(self):
        b = Fixed([BackendUnreachable("llm", "http://x", 3, "down")])
        res = IntentRouter(Gateway.mock(llm=b)).classify("summarize the overall message")
        assert (res.level, res.source) == (Level.L3, "heuristic")

    def test_empty_query(self, gateway):
        with pytest.raises(EmptyQuery):
            IntentRouter(gateway).classify("  ")

    def test_prompt_shape(self):
        tpl = load_template("intent_classification")
        body = tpl.render(query="Q?")
        assert body.startswith("[INTENT]")
        assert body.count("Q?") == 1
        for lvl in ("Level-1", "Level-2", "Level-3"):
            assert lvl in body


class TestHeuristic:
    @pytest.mark.parametrize("query,level", [
        ("summarize the overall message", Level.L3),
        ("why did the dog bark after the bell", Level.L2),
        ("what object is at 0:05", Level.L1),
        ("What themes recur?", Level.L3),
        ("what caused the crash", Level.L2),
        ("who is lessoned", Level.L3),
        ("what is behind the door", Level.L1),
    ])
    def test_rules(self, query, level):
        res = classify_heuristic(query)
        assert res.level is level and res.source == "heuristic"

    @settings(max_examples=100, deadline=None)
    @given(st.text(min_size=1, max_size=60).filter(lambda s: s.strip()))
    def test_total(self, q):
        assert classify_heuristic(q).level in tuple(Level)


class TestForce:
    def test_forced(self):
        assert force_level("q", Level.L3) == force_level("q", "3")
        assert force_level("q", 1).level is Level.L1 and force_level("q", 1).source == "forced"

    @pytest.mark.parametrize("bad", ["4", 0, "L9", "high"])
    def test_invalid(self, bad):
        with pytest.raises(PreconditionError):
            force_level("q", bad)


_PROSE = st.text(alphabet=st.characters(blacklist_characters="123", blacklist_categories=("Cs",)), max_size=80)


class TestParseLevel:
    @settings(max_examples=300, deadline=None)
    @given(before=_PROSE, after=_PROSE, n=st.sampled_from("123"),
           form=st.sampled_from(["Level-{}", "level {}", "LEVEL_{}", "L{}", "Level{}"]))
    def test_single_token_in_prose(self, before, after, n, form):
        assert parse_level(f"{before} {form.format(n)} {after}") is Level(f"L{n}")

    def test_answer_line_wins(self):
        text = "Level-1 questions are simple, but this one needs more.\nAnswer: Level-3"
        assert parse_level(text) is Level.L3

    def test_none(self):
        assert parse_level("no idea") is None
