// Wire types mirroring the gateway's canonical JSON (docs/wire.md)
// and the console's own state model.

export type Pair = [string, string];

export interface PlanNodeWire {
  node_id: string;
  tool_id: string;
  policy: Record<string, unknown>;
}

export interface PlanWire {
  nodes: PlanNodeWire[];
  edges: [string, string, Pair][];
  sinks: Record<string, string>;
}

export interface StepWire {
  node_id: string;
  tool_id: string;
  status: "cached" | "executed" | "failed" | "skipped";
  output: string | null;
  duration_ms: number;
  attempt: number;
}

export interface CheckWire {
  name: string;
  passed: boolean;
  detail: string;
}

export interface VerdictWire {
  status: "pass" | "fail";
  checks: CheckWire[];
}

export interface ReportWire {
  plan_id: string;
  steps: StepWire[];
  verdict: VerdictWire;
  final_artifacts: Record<string, string>; // "modality/format" -> artifact id
}

export interface ConsoleEvent {
  event:
    | "plan"
    | "step_started"
    | "step_cached"
    | "step_finished"
    | "repair"
    | "verdict"
    | "done"
    | "error";
  plan_id: string;
  payload: unknown;
}

// ---------------------------------------------------------------- console

export type NodeStatus = "pending" | "running" | "cached" | "done" | "failed";

export interface NodeView {
  nodeId: string;
  toolId: string;
  status: NodeStatus;
  layer: number; // column in the layered layout
  lane: number; // row within the column
  reopened: boolean; // a reinvoke repair re-arms a terminal node once
}

export interface PlanView {
  planId: string;
  nodes: NodeView[];
  edges: { from: string; to: string; pair: Pair }[];
}

export type Renderer = "monospace" | "image" | "audio" | "report" | "download";

export interface ArtifactPanel {
  artifactId: string;
  modality: string;
  format: string;
  renderer: Renderer;
}

export interface TranscriptEntry {
  role: "user" | "system";
  text: string;
}

export interface ConsoleState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  livePlan: PlanView | null;
  artifactPanels: ArtifactPanel[];
  tierSelector: string;
  verdictBanner: VerdictWire | null;
}
