"""Request interpretation and typed tool-graph composition.

derive_request_spec turns free text plus attachments into a machine-readable
goal/constraint structure via fixed keyword and pattern rules. plan runs a
uniform-cost search over (modality, format) states, one search per goal,
then merges the per-goal paths into a DAG sharing common prefixes. Both are
pure functions: same inputs, byte-identical canonical plan JSON.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .config import Config
from .errors import CapacityError, UnplannableError, ValidationError
from .media import Pair, canonical_json, is_legal_pair
from .policy import HardwareProfile, ToolPolicy, policy_for_tool
from .registry import ToolRegistry

SOURCE = "SOURCE"

# Goal keywords, first match per keyword; absence of any keyword means the
# default symbolic goal.
_GOAL_RULES: tuple[tuple[str, Pair], ...] = (
    ("score", ("image", "svg")),
    ("sheet", ("image", "svg")),
    ("audio", ("audio", "wav")),
    ("play", ("audio", "wav")),
    ("hear", ("audio", "wav")),
    ("midi", ("symbolic", "smf")),
    ("analyze", ("report", "json")),
    ("describe", ("report", "json")),
)
DEFAULT_GOAL: Pair = ("symbolic", "abc")

_KEY_PATTERN = re.compile(r"\b[iI]n\s+([A-G][#b]?)(?=[\s,.;:!?]|$)")
_METER_PATTERN = re.compile(r"\b(\d+)\s*/\s*(\d+)\s+time\b", re.IGNORECASE)
_TEMPO_PATTERN = re.compile(r"\b(\d+)\s*bpm\b", re.IGNORECASE)
_DURATION_PATTERN = re.compile(r"\bunder\s+(\d+)\s+seconds?\b", re.IGNORECASE)

CONSTRAINT_KEYS = ("key_signature", "meter", "tempo_qpm", "max_duration_s", "style_text")


@dataclass(frozen=True)
class RequestSpec:
    goals: tuple[Pair, ...]  # sorted, unique, non-empty
    source: Pair
    constraints: dict
    raw_text: str

    def canonical(self) -> dict:
        return {
            "goals": [list(g) for g in self.goals],
            "source": list(self.source),
            "constraints": self.constraints,
            "raw_text": self.raw_text,
        }


def check_constraints(constraints: dict) -> None:
    for key, value in constraints.items():
        if key not in CONSTRAINT_KEYS:
            raise ValidationError(f"unsupported constraint {key!r}")
        if key == "key_signature" and not re.fullmatch(r"[A-G][#b]?", str(value)):
            raise ValidationError(f"malformed key_signature {value!r}")
        if key == "meter":
            m = re.fullmatch(r"(\d+)/(\d+)", str(value))
            if not m or int(m.group(1)) <= 0 or int(m.group(2)) <= 0:
                raise ValidationError(f"malformed meter {value!r}")
        if key == "tempo_qpm" and (not isinstance(value, int) or value <= 0):
            raise ValidationError(f"malformed tempo_qpm {value!r}")
        if key == "max_duration_s" and (not isinstance(value, (int, float)) or value <= 0):
            raise ValidationError(f"malformed max_duration_s {value!r}")
        if key == "style_text" and not isinstance(value, str):
            raise ValidationError("style_text must be a string")


def derive_request_spec(text: str, attachments: list | None = None) -> RequestSpec:
    """Rule-based extraction of goals, source pair, and constraints.

    An LLM-backed extractor may refine the result elsewhere; this function
    is the deterministic contract.
    """
    attachments = attachments or []
    if not text and not attachments:
        raise ValidationError("request needs text or at least one attachment")
    lowered = text.lower()
    words = set(re.findall(r"[a-z]+", lowered))
    goals = {pair for keyword, pair in _GOAL_RULES if keyword in words}
    if not goals:
        goals = {DEFAULT_GOAL}
    if attachments:
        first = attachments[0]
        source = (first.modality, first.format)
    else:
        source = ("text", "plain")
    if not is_legal_pair(*source):
        raise ValidationError(f"illegal source pair {source}")

    constraints: dict = {}
    key_match = _KEY_PATTERN.search(text)
    if key_match:
        constraints["key_signature"] = key_match.group(1)
    meter_match = _METER_PATTERN.search(text)
    if meter_match:
        constraints["meter"] = f"{meter_match.group(1)}/{meter_match.group(2)}"
    tempo_match = _TEMPO_PATTERN.search(text)
    if tempo_match:
        constraints["tempo_qpm"] = int(tempo_match.group(1))
    duration_match = _DURATION_PATTERN.search(text)
    if duration_match:
        constraints["max_duration_s"] = int(duration_match.group(1))
    check_constraints(constraints)
    return RequestSpec(
        goals=tuple(sorted(goals)),
        source=source,
        constraints=constraints,
        raw_text=text,
    )


@dataclass(frozen=True)
class PlanNode:
    node_id: str
    tool_id: str
    policy: ToolPolicy


@dataclass
class PlanGraph:
    nodes: list[PlanNode] = field(default_factory=list)
    # (producer node_id or SOURCE, consumer node_id, (modality, format))
    edges: list[tuple[str, str, Pair]] = field(default_factory=list)
    sinks: dict[Pair, str] = field(default_factory=dict)

    def canonical(self) -> dict:
        return {
            "nodes": [
                {"node_id": n.node_id, "tool_id": n.tool_id, "policy": n.policy.fields()}
                for n in self.nodes
            ],
            "edges": [[p, c, list(pair)] for p, c, pair in self.edges],
            "sinks": {f"{m}/{f}": node for (m, f), node in sorted(self.sinks.items())},
        }

    def to_json(self) -> str:
        return canonical_json(self.canonical())


def _cheapest_path(
    source: Pair,
    goal: Pair,
    registry: ToolRegistry,
    tool_cost: dict[str, Fraction],
) -> list[str]:
    """Uniform-cost search over typed states; ties resolve to the
    lexicographically smallest tool-id sequence. Returns tool ids in order."""
    if goal == source:
        return []
    frontier: list[tuple[Fraction, tuple[str, ...], Pair]] = [(Fraction(0), (), source)]
    settled: set[Pair] = set()
    while frontier:
        cost, path, state = heapq.heappop(frontier)
        if state in settled:
            continue
        settled.add(state)
        if state == goal:
            return list(path)
        for spec in registry.list_tools():
            if spec.id not in tool_cost or state not in spec.inputs:
                continue
            if spec.output in settled:
                continue
            heapq.heappush(
                frontier, (cost + tool_cost[spec.id], path + (spec.id,), spec.output)
            )
    raise UnplannableError(goal)


def plan(
    spec: RequestSpec,
    registry: ToolRegistry,
    tier: str,
    profile: HardwareProfile,
    config: Config | None = None,
) -> PlanGraph:
    """Compose the minimum-cost typed DAG reaching every goal.

    Node cost is the tool's static estimate scaled by the precision its
    policy selects at this tier, so resource hints shape the plan. Tools
    that cannot run on this profile are taken off the table; if that alone
    makes a goal unreachable, the policy engine's capacity error surfaces.
    """
    cfg = config or Config()
    if len(registry) == 0:
        raise ValidationError("registry is empty")
    policies: dict[str, ToolPolicy] = {}
    tool_cost: dict[str, Fraction] = {}
    capacity_failures: dict[str, CapacityError] = {}
    for tool in registry.list_tools():
        try:
            policy = policy_for_tool(tier, tool, profile)
        except CapacityError as exc:
            capacity_failures[tool.id] = exc
            continue
        policies[tool.id] = policy
        # exact arithmetic so cost ties are genuine ties
        factor = Fraction(str(cfg.precision_factors[policy.precision]))
        tool_cost[tool.id] = tool.cost_estimate * factor

    graph = PlanGraph()
    chain_to_node: dict[tuple[str, ...], str] = {}

    for goal in spec.goals:
        try:
            path = _cheapest_path(spec.source, goal, registry, tool_cost)
        except UnplannableError:
            if capacity_failures:
                # Reachable in principle but not on this hardware?
                full_cost = dict(tool_cost)
                for tool_id in capacity_failures:
                    full_cost[tool_id] = Fraction(registry.get(tool_id).cost_estimate)
                try:
                    _cheapest_path(spec.source, goal, registry, full_cost)
                except UnplannableError:
                    raise UnplannableError(goal) from None
                raise next(iter(capacity_failures.values()))
            raise
        if not path:
            graph.sinks[goal] = SOURCE
            continue
        state = spec.source
        chain: tuple[str, ...] = ()
        producer = SOURCE
        for tool_id in path:
            chain = chain + (tool_id,)
            if chain not in chain_to_node:
                node_id = f"n{len(chain_to_node) + 1}"
                chain_to_node[chain] = node_id
                graph.nodes.append(PlanNode(node_id, tool_id, policies[tool_id]))
                graph.edges.append((producer, node_id, state))
            node_id = chain_to_node[chain]
            producer = node_id
            state = registry.get(tool_id).output
        graph.sinks[goal] = producer
    return graph


def validate_plan(plan_graph: PlanGraph, registry: ToolRegistry) -> list[str]:
    """Re-check every plan invariant against the current registry."""
    diags: list[str] = []
    node_ids = [n.node_id for n in plan_graph.nodes]
    if len(node_ids) != len(set(node_ids)):
        diags.append("duplicate node ids")
    by_id = {n.node_id: n for n in plan_graph.nodes}

    for producer, consumer, pair in plan_graph.edges:
        if consumer not in by_id:
            diags.append(f"edge consumer {consumer} is not a node")
            continue
        consumer_node = by_id[consumer]
        if consumer_node.tool_id not in registry:
            continue  # reported below
        consumer_spec = registry.get(consumer_node.tool_id)
        if tuple(pair) not in consumer_spec.inputs:
            diags.append(f"edge {producer}->{consumer} pair {pair} not consumable by {consumer_spec.id}")
        if producer != SOURCE:
            if producer not in by_id:
                diags.append(f"edge producer {producer} is not a node")
                continue
            producer_node = by_id[producer]
            if producer_node.tool_id in registry:
                produced = registry.get(producer_node.tool_id).output
                if produced != tuple(pair):
                    diags.append(
                        f"edge {producer}->{consumer} pair {pair} != producer output {produced}"
                    )

    for node in plan_graph.nodes:
        if node.tool_id not in registry:
            diags.append(f"node {node.node_id} references unregistered tool {node.tool_id}")

    for goal, sink in plan_graph.sinks.items():
        if sink == SOURCE:
            continue
        if sink not in by_id:
            diags.append(f"sink {sink} for goal {goal} is not a node")
        elif by_id[sink].tool_id in registry:
            output = registry.get(by_id[sink].tool_id).output
            if output != tuple(goal):
                diags.append(f"sink {sink} outputs {output}, goal is {goal}")

    # cycle check over edges
    adjacency: dict[str, list[str]] = {}
    indegree: dict[str, int] = {n: 0 for n in node_ids}
    for producer, consumer, _ in plan_graph.edges:
        if producer != SOURCE and producer in indegree and consumer in indegree:
            adjacency.setdefault(producer, []).append(consumer)
            indegree[consumer] += 1
    queue = [n for n, d in indegree.items() if d == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for nxt in adjacency.get(node, []):
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    if seen != len(node_ids):
        diags.append("plan graph contains a cycle")
    return diags


def topological_order(plan_graph: PlanGraph) -> list[PlanNode]:
    """Deterministic topological order (stable by node-id within a level)."""
    producers: dict[str, list[str]] = {n.node_id: [] for n in plan_graph.nodes}
    for producer, consumer, _ in plan_graph.edges:
        if producer != SOURCE:
            producers[consumer].append(producer)
    ordered: list[PlanNode] = []
    done: set[str] = set()
    by_id = {n.node_id: n for n in plan_graph.nodes}
    remaining = sorted(producers, key=lambda nid: int(nid[1:]) if nid[1:].isdigit() else 0)
    while remaining:
        progress = [nid for nid in remaining if all(p in done for p in producers[nid])]
        if not progress:
            raise ValidationError("plan graph contains a cycle")
        for nid in progress:
            ordered.append(by_id[nid])
            done.add(nid)
        remaining = [nid for nid in remaining if nid not in done]
    return ordered
