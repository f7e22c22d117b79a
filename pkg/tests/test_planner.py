from __future__ import annotations

import random
from fractions import Fraction

import pytest

from weavekit import (
    Config,
    HardwareProfile,
    ToolRegistry,
    ToolSpec,
    UnplannableError,
    ValidationError,
    derive_request_spec,
    plan,
    validate_plan,
)
from weavekit.planner import SOURCE, PlanGraph, PlanNode, derive_request_spec as derive
from weavekit.policy import policy_for_tool
from weavekit.store import Artifact

from oracles import brute_force_cheapest

PROFILE = HardwareProfile(46068, 65536, 200000)
SMALL_MEM = {"int4": 10, "int8": 20, "fp16": 40}


def abc_artifact():
    return Artifact(
        id="a" * 64, modality="symbolic", format="abc", bytes=b"X:1\nK:C\n",
        producer="user", inputs=[], created_at=0.0, size_bytes=8,
    )


class TestDeriveRequestSpec:
    def test_jig_request(self):
        spec = derive_request_spec("compose a jig in G, 6/8 time, and let me hear it", [])
        assert spec.goals == (("audio", "wav"),)
        assert spec.source == ("text", "plain")
        assert spec.constraints == {"key_signature": "G", "meter": "6/8"}

    def test_analyze_attachment(self):
        spec = derive_request_spec("analyze this", [abc_artifact()])
        assert spec.goals == (("report", "json"),)
        assert spec.source == ("symbolic", "abc")

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            derive_request_spec("", [])

    def test_default_goal(self):
        spec = derive_request_spec("please hum quietly", [])
        assert spec.goals == (("symbolic", "abc"),)

    def test_multiple_goals(self):
        spec = derive_request_spec("show the score and play the audio", [])
        assert spec.goals == (("audio", "wav"), ("image", "svg"))

    def test_keyword_needs_word_boundary(self):
        spec = derive_request_spec("display the melody", [])
        assert spec.goals == (("symbolic", "abc"),)  # "play" inside "display" does not count

    def test_tempo_and_duration(self):
        spec = derive_request_spec("play it at 90 bpm and keep it under 30 seconds", [])
        assert spec.constraints["tempo_qpm"] == 90
        assert spec.constraints["max_duration_s"] == 30

    def test_key_with_accidental(self):
        spec = derive_request_spec("a reel in Bb please", [])
        assert spec.constraints["key_signature"] == "Bb"

    def test_in_word_not_a_key(self):
        spec = derive_request_spec("something in Berlin style", [])
        assert "key_signature" not in spec.constraints


class TestPlan:
    def test_canonical_chain_with_shared_compose(self, registry):
        spec = derive("compose a tune, show the score, and play the audio", [])
        graph = plan(spec, registry, "high", PROFILE)
        tools = [n.tool_id for n in graph.nodes]
        assert tools == ["compose.abc", "convert.abc2midi", "synth.midi2wav", "engrave.svg"]
        compose_id = graph.nodes[0].node_id
        consumers = [c for p, c, _ in graph.edges if p == compose_id]
        assert len(consumers) == 2  # engrave and convert both feed off one compose node
        assert graph.sinks[("audio", "wav")] != graph.sinks[("image", "svg")]

    def test_identity_plan(self, registry):
        spec = derive("just echo this back", [abc_artifact()])
        assert spec.goals == (("symbolic", "abc"),)
        graph = plan(spec, registry, "high", PROFILE)
        assert graph.nodes == []
        assert graph.sinks == {("symbolic", "abc"): SOURCE}

    def test_unplannable_names_goal(self):
        registry = ToolRegistry()
        registry.register_tool(
            ToolSpec("compose.abc", (("text", "plain"),), ("symbolic", "abc"), 100, SMALL_MEM, "compose")
        )
        spec = derive("let me hear it", [])
        with pytest.raises(UnplannableError) as exc:
            plan(spec, registry, "high", PROFILE)
        assert exc.value.goal == ("audio", "wav")

    def test_determinism_byte_identical(self, registry):
        spec = derive("score and audio for a jig in D", [])
        first = plan(spec, registry, "high", PROFILE).to_json()
        second = plan(spec, registry, "high", PROFILE).to_json()
        assert first == second

    def test_mode_is_not_an_input(self, registry):
        # hosted/local only differ in backend wiring, which plan() never sees
        from weavekit import default_registry

        hosted = default_registry("hosted", "http://stub:9")
        spec = derive("play me a jig in G", [])
        assert (
            plan(spec, registry, "medium", PROFILE).to_json()
            == plan(spec, hosted, "medium", PROFILE).to_json()
        )

    def test_tier_changes_cost_not_structure(self, registry):
        spec = derive("let me hear something", [])
        low = plan(spec, registry, "low", HardwareProfile(4096, 65536, 0))
        high = plan(spec, registry, "high", PROFILE)
        assert [n.tool_id for n in low.nodes] == [n.tool_id for n in high.nodes]
        assert low.nodes[0].policy.precision == "int4"
        assert high.nodes[0].policy.precision == "fp16"

    def test_planner_output_validates(self, registry):
        spec = derive("score, audio, midi, and a report on a jig", [])
        graph = plan(spec, registry, "high", PROFILE)
        assert validate_plan(graph, registry) == []


class TestValidatePlan:
    def test_type_mismatch_diagnosed(self, registry):
        policy = policy_for_tool("high", registry.get("engrave.svg"), PROFILE)
        graph = PlanGraph(
            nodes=[PlanNode("n1", "engrave.svg", policy)],
            edges=[(SOURCE, "n1", ("audio", "wav"))],
            sinks={("image", "svg"): "n1"},
        )
        diags = validate_plan(graph, registry)
        assert any("not consumable" in d for d in diags)

    def test_unregistered_tool_diagnosed(self, registry):
        policy = policy_for_tool("high", registry.get("engrave.svg"), PROFILE)
        graph = PlanGraph(
            nodes=[PlanNode("n1", "ghost.tool", policy)],
            edges=[(SOURCE, "n1", ("text", "plain"))],
            sinks={},
        )
        diags = validate_plan(graph, registry)
        assert any("unregistered" in d for d in diags)

    def test_cycle_diagnosed(self, registry):
        policy = policy_for_tool("high", registry.get("enrich.text"), PROFILE)
        graph = PlanGraph(
            nodes=[PlanNode("n1", "enrich.text", policy), PlanNode("n2", "enrich.text", policy)],
            edges=[("n1", "n2", ("text", "plain")), ("n2", "n1", ("text", "plain"))],
            sinks={},
        )
        assert any("cycle" in d for d in validate_plan(graph, registry))


PAIRS = [("text", "plain"), ("symbolic", "abc"), ("symbolic", "smf"), ("audio", "wav"), ("image", "svg"), ("report", "json")]


def random_registry(rng: random.Random) -> ToolRegistry:
    registry = ToolRegistry()
    for i in range(rng.randint(1, 6)):
        inputs = tuple({rng.choice(PAIRS) for _ in range(rng.randint(1, 2))})
        output = rng.choice(PAIRS)
        registry.register_tool(
            ToolSpec(
                id=f"tool.{chr(97 + i)}",
                inputs=inputs,
                output=output,
                cost_estimate=rng.choice([50, 100, 100, 200, 350]),
                mem_estimate_mb=dict(SMALL_MEM),
                kind="convert",
            )
        )
    return registry


class TestOptimalityOracle:
    def test_matches_brute_force_on_400_random_registries(self):
        rng = random.Random(77)
        config = Config()
        factors = {p: Fraction(str(f)) for p, f in config.precision_factors.items()}
        compared = 0
        for _ in range(400):
            registry = random_registry(rng)
            goal = rng.choice(PAIRS)
            source = ("text", "plain")
            cost_of = {}
            for tool in registry.list_tools():
                policy = policy_for_tool("high", tool, PROFILE)
                cost_of[tool.id] = tool.cost_estimate * factors[policy.precision]
            best = brute_force_cheapest(source, goal, registry.list_tools(), cost_of)
            spec = derive("anything", [])
            spec = type(spec)(goals=(goal,), source=source, constraints={}, raw_text="x")
            if best is None:
                with pytest.raises(UnplannableError):
                    plan(spec, registry, "high", PROFILE)
                continue
            graph = plan(spec, registry, "high", PROFILE)
            sequence = tuple(n.tool_id for n in graph.nodes)
            got_cost = sum((cost_of[t] for t in sequence), Fraction(0))
            assert got_cost == best[0], f"cost mismatch: {sequence} vs {best}"
            assert sequence == best[1], f"tie-break mismatch: {sequence} vs {best}"
            compared += 1
        assert compared > 100  # plenty of plannable cases exercised

    def test_monotone_cost_when_adding_tools(self, registry):
        spec = derive("let me hear it", [])
        config = Config()
        factors = {p: Fraction(str(f)) for p, f in config.precision_factors.items()}

        def plan_cost(reg):
            graph = plan(spec, reg, "high", PROFILE)
            total = Fraction(0)
            for node in graph.nodes:
                tool = reg.get(node.tool_id)
                total += tool.cost_estimate * factors[node.policy.precision]
            return total

        baseline = plan_cost(registry)
        registry.register_tool(
            ToolSpec(
                id="synth.direct",
                inputs=(("symbolic", "abc"),),
                output=("audio", "wav"),
                cost_estimate=1,
                mem_estimate_mb=dict(SMALL_MEM),
                kind="synthesize",
            )
        )
        assert plan_cost(registry) <= baseline
