// DOM projection of ConsoleState. Rendering is regenerative (state in,
// DOM out) and each artifact panel is isolated so one bad render cannot
// take down the page.

import { artifactUrl } from "./api.js";
import type { ArtifactPanel, ConsoleState, NodeView } from "./types.js";

const NODE_W = 150;
const NODE_H = 46;
const GAP_X = 70;
const GAP_Y = 24;

export function renderTranscript(container: HTMLElement, state: ConsoleState): void {
  container.replaceChildren(
    ...state.transcript.map((entry) => {
      const row = document.createElement("div");
      row.className = `turn turn-${entry.role}`;
      row.textContent = entry.text;
      return row;
    }),
  );
}

export function renderPlan(container: HTMLElement, state: ConsoleState): void {
  container.replaceChildren();
  const plan = state.livePlan;
  if (!plan) return;
  const layers = Math.max(...plan.nodes.map((n) => n.layer), 0) + 1;
  const lanes = Math.max(...plan.nodes.map((n) => n.lane), 0) + 1;
  const width = layers * (NODE_W + GAP_X) + GAP_X;
  const height = lanes * (NODE_H + GAP_Y) + GAP_Y;
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));

  const centers = new Map<string, { x: number; y: number }>();
  for (const node of plan.nodes) {
    centers.set(node.nodeId, {
      x: GAP_X + node.layer * (NODE_W + GAP_X) + NODE_W / 2,
      y: GAP_Y + node.lane * (NODE_H + GAP_Y) + NODE_H / 2,
    });
  }
  for (const edge of plan.edges) {
    const from = centers.get(edge.from);
    const to = centers.get(edge.to);
    if (!from || !to) continue;
    const line = document.createElementNS(svgNS, "line");
    line.setAttribute("x1", String(from.x + NODE_W / 2));
    line.setAttribute("y1", String(from.y));
    line.setAttribute("x2", String(to.x - NODE_W / 2));
    line.setAttribute("y2", String(to.y));
    line.setAttribute("class", "plan-edge");
    svg.appendChild(line);
  }
  for (const node of plan.nodes) {
    svg.appendChild(nodeGlyph(svgNS, node, centers.get(node.nodeId)!));
  }
  container.appendChild(svg);
}

function nodeGlyph(svgNS: string, node: NodeView, center: { x: number; y: number }) {
  const group = document.createElementNS(svgNS, "g");
  group.setAttribute("class", `plan-node status-${node.status}`);
  group.setAttribute("data-node", node.nodeId);
  const rect = document.createElementNS(svgNS, "rect");
  rect.setAttribute("x", String(center.x - NODE_W / 2));
  rect.setAttribute("y", String(center.y - NODE_H / 2));
  rect.setAttribute("width", String(NODE_W));
  rect.setAttribute("height", String(NODE_H));
  rect.setAttribute("rx", "8");
  const label = document.createElementNS(svgNS, "text");
  label.setAttribute("x", String(center.x));
  label.setAttribute("y", String(center.y - 2));
  label.setAttribute("text-anchor", "middle");
  label.textContent = node.toolId;
  const status = document.createElementNS(svgNS, "text");
  status.setAttribute("x", String(center.x));
  status.setAttribute("y", String(center.y + 14));
  status.setAttribute("text-anchor", "middle");
  status.setAttribute("class", "node-status");
  status.textContent = node.status;
  group.append(rect, label, status);
  return group;
}

export function renderVerdict(container: HTMLElement, state: ConsoleState, onRetry: () => void): void {
  container.replaceChildren();
  const verdict = state.verdictBanner;
  if (!verdict) return;
  const banner = document.createElement("div");
  banner.className = "verdict-banner";
  const failing = verdict.checks.filter((c) => !c.passed);
  const text = document.createElement("span");
  text.textContent = `verdict: fail — ${failing.map((c) => `${c.name}: ${c.detail}`).join("; ")}`;
  const retry = document.createElement("button");
  retry.textContent = "retry with feedback";
  retry.addEventListener("click", onRetry);
  banner.append(text, retry);
  container.appendChild(banner);
}

export function renderPanels(container: HTMLElement, state: ConsoleState, base: string): void {
  container.replaceChildren();
  for (const panel of state.artifactPanels) {
    const card = document.createElement("section");
    card.className = `panel panel-${panel.renderer}`;
    const title = document.createElement("h3");
    title.textContent = `${panel.modality}/${panel.format}`;
    card.appendChild(title);
    try {
      card.appendChild(panelBody(panel, base));
    } catch (err) {
      const oops = document.createElement("p");
      oops.className = "panel-error";
      oops.textContent = `render failed: ${err}`;
      card.appendChild(oops);
    }
    container.appendChild(card);
  }
}

function panelBody(panel: ArtifactPanel, base: string): HTMLElement {
  const url = artifactUrl(base, panel.artifactId);
  switch (panel.renderer) {
    case "audio": {
      const audio = document.createElement("audio");
      audio.controls = true;
      audio.src = url;
      audio.preload = "metadata";
      return audio;
    }
    case "image": {
      const img = document.createElement("img");
      img.src = url;
      img.alt = `${panel.modality}/${panel.format} artifact`;
      return img;
    }
    case "monospace": {
      const pre = document.createElement("pre");
      pre.textContent = "loading …";
      void fetch(url)
        .then((r) => r.text())
        .then((text) => {
          pre.textContent = text;
        })
        .catch((err) => {
          pre.textContent = `load failed: ${err}`;
        });
      return pre;
    }
    case "report": {
      const pre = document.createElement("pre");
      pre.className = "report";
      pre.textContent = "loading …";
      void fetch(url)
        .then((r) => r.json())
        .then((data) => {
          pre.textContent = JSON.stringify(data, null, 2);
        })
        .catch((err) => {
          pre.textContent = `load failed: ${err}`;
        });
      return pre;
    }
    default: {
      const link = document.createElement("a");
      link.href = url;
      link.textContent = `download ${panel.format}`;
      link.setAttribute("download", `artifact.${panel.format}`);
      return link;
    }
  }
}
