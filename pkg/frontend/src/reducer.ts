// Pure reducer over gateway progress events. All console state transitions
// funnel through reduce(), so replaying a transcript always reproduces the
// same final state.

import { layeredLayout } from "./layout.js";
import type {
  ArtifactPanel,
  ConsoleEvent,
  ConsoleState,
  NodeStatus,
  NodeView,
  PlanView,
  PlanWire,
  Renderer,
  ReportWire,
  StepWire,
  VerdictWire,
} from "./types.js";

export function initialState(tier = "low"): ConsoleState {
  return {
    sessionId: null,
    transcript: [],
    livePlan: null,
    artifactPanels: [],
    tierSelector: tier,
    verdictBanner: null,
  };
}

const RANK: Record<NodeStatus, number> = {
  pending: 0,
  running: 1,
  cached: 2,
  done: 2,
  failed: 2,
};

const STEP_STATUS: Record<StepWire["status"], NodeStatus> = {
  executed: "done",
  cached: "cached",
  failed: "failed",
  skipped: "failed",
};

const RENDERERS: Record<string, Renderer> = {
  abc: "monospace",
  plain: "monospace",
  svg: "image",
  pdf: "image",
  wav: "audio",
  json: "report",
  smf: "download",
};

export function panelsFromReport(report: ReportWire): ArtifactPanel[] {
  return Object.entries(report.final_artifacts)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([goal, artifactId]) => {
      const [modality, format] = goal.split("/");
      return {
        artifactId,
        modality,
        format,
        renderer: RENDERERS[format] ?? "download",
      };
    });
}

function buildPlanView(planId: string, wire: PlanWire): PlanView {
  const edges = wire.edges
    .filter(([from]) => from !== "SOURCE")
    .map(([from, to, pair]) => ({ from, to, pair }));
  const positions = layeredLayout(
    wire.nodes.map((n) => n.node_id),
    edges.map(({ from, to }) => ({ from, to })),
  );
  const nodes: NodeView[] = wire.nodes.map((n) => ({
    nodeId: n.node_id,
    toolId: n.tool_id,
    status: "pending",
    layer: positions.get(n.node_id)?.layer ?? 0,
    lane: positions.get(n.node_id)?.lane ?? 0,
    reopened: false,
  }));
  return { planId, nodes, edges };
}

function withNode(
  state: ConsoleState,
  nodeId: string,
  update: (node: NodeView) => NodeView,
): ConsoleState {
  if (!state.livePlan) return state;
  return {
    ...state,
    livePlan: {
      ...state.livePlan,
      nodes: state.livePlan.nodes.map((n) => (n.nodeId === nodeId ? update(n) : n)),
    },
  };
}

function setStatus(node: NodeView, next: NodeStatus): NodeView {
  // statuses only move forward (pending -> running -> terminal); the one
  // exception is a node re-armed by a reinvoke repair
  if (RANK[next] < RANK[node.status]) {
    if (node.reopened && next === "running") {
      return { ...node, status: next, reopened: false };
    }
    return node;
  }
  return { ...node, status: next };
}

export function reduce(state: ConsoleState, event: ConsoleEvent): ConsoleState {
  switch (event.event) {
    case "plan": {
      return {
        ...state,
        livePlan: buildPlanView(event.plan_id, event.payload as PlanWire),
        artifactPanels: [],
        verdictBanner: null,
      };
    }
    case "step_started": {
      const payload = event.payload as { node_id: string };
      return withNode(state, payload.node_id, (n) => setStatus(n, "running"));
    }
    case "step_cached": {
      const payload = event.payload as StepWire;
      return withNode(state, payload.node_id, (n) => setStatus(n, "cached"));
    }
    case "step_finished": {
      const payload = event.payload as StepWire;
      return withNode(state, payload.node_id, (n) =>
        setStatus(n, STEP_STATUS[payload.status] ?? "failed"),
      );
    }
    case "repair": {
      const payload = event.payload as {
        node_id: string;
        action: string;
        cause?: string;
        substitute?: string | null;
      };
      const note =
        payload.action === "substitute"
          ? `repair: substituting ${payload.substitute} for ${payload.node_id}`
          : `repair: ${payload.action} ${payload.node_id}`;
      let next: ConsoleState = {
        ...state,
        transcript: [...state.transcript, { role: "system", text: note }],
      };
      if (payload.action === "reinvoke") {
        next = withNode(next, payload.node_id, (n) => ({ ...n, reopened: true }));
      }
      return next;
    }
    case "verdict": {
      const verdict = event.payload as VerdictWire;
      return { ...state, verdictBanner: verdict.status === "fail" ? verdict : null };
    }
    case "done": {
      const report = event.payload as ReportWire;
      return { ...state, artifactPanels: panelsFromReport(report) };
    }
    case "error": {
      const payload = event.payload as { message: string };
      const failPending = (n: NodeView): NodeView =>
        n.status === "pending" || n.status === "running" ? { ...n, status: "failed" } : n;
      return {
        ...state,
        livePlan: state.livePlan
          ? { ...state.livePlan, nodes: state.livePlan.nodes.map(failPending) }
          : null,
        transcript: [
          ...state.transcript,
          { role: "system", text: `execution failed: ${payload.message}` },
        ],
      };
    }
    default:
      return state;
  }
}

export function replay(events: ConsoleEvent[], start?: ConsoleState): ConsoleState {
  return events.reduce(reduce, start ?? initialState());
}
