// Browser entry: one reducer loop fed by the event stream; DOM re-renders
// from state after every event.

import { createSession, health, sendMessage, streamEvents } from "./api.js";
import { renderPanels, renderPlan, renderTranscript, renderVerdict } from "./dom.js";
import { initialState, reduce } from "./reducer.js";
import type { AttachmentUpload } from "./api.js";
import type { ConsoleState } from "./types.js";

const BASE = (window as { WEAVE_BASE?: string }).WEAVE_BASE ?? "http://127.0.0.1:8000";

const els = {
  transcript: document.getElementById("transcript")!,
  plan: document.getElementById("plan")!,
  verdict: document.getElementById("verdict")!,
  panels: document.getElementById("panels")!,
  form: document.getElementById("composer") as HTMLFormElement,
  text: document.getElementById("message") as HTMLTextAreaElement,
  file: document.getElementById("attachment") as HTMLInputElement,
  hint: document.getElementById("hint")!,
  tier: document.getElementById("tier") as HTMLSelectElement,
  status: document.getElementById("status")!,
};

let state: ConsoleState = initialState();
let lastRequest = "";

function render(): void {
  renderTranscript(els.transcript, state);
  renderPlan(els.plan, state);
  renderVerdict(els.verdict, state, retryWithFeedback);
  renderPanels(els.panels, state, BASE);
}

function apply(eventState: ConsoleState): void {
  state = eventState;
  render();
}

const EXTENSION_TYPES: Record<string, [string, string]> = {
  abc: ["symbolic", "abc"],
  mid: ["symbolic", "smf"],
  midi: ["symbolic", "smf"],
  wav: ["audio", "wav"],
  svg: ["image", "svg"],
  json: ["report", "json"],
  txt: ["text", "plain"],
};

async function encodeAttachment(file: File): Promise<AttachmentUpload> {
  const ext = file.name.split(".").pop()?.toLowerCase() ?? "";
  const [modality, format] = EXTENSION_TYPES[ext] ?? ["text", "plain"];
  const buffer = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  buffer.forEach((byte) => (binary += String.fromCharCode(byte)));
  return { b64: btoa(binary), modality, format };
}

async function submit(text: string, files: File[]): Promise<void> {
  if (!text.trim() && files.length === 0) {
    els.hint.textContent = "say something or attach a file";
    return;
  }
  els.hint.textContent = "";
  if (!state.sessionId) return;
  lastRequest = text;
  // optimistic transcript append; plan panel resets when the plan event lands
  apply({ ...state, transcript: [...state.transcript, { role: "user", text }] });
  try {
    const attachments = await Promise.all(files.map(encodeAttachment));
    await sendMessage(BASE, state.sessionId, text, attachments);
  } catch (err) {
    apply({ ...state, transcript: [...state.transcript, { role: "system", text: String(err) }] });
  }
}

function retryWithFeedback(): void {
  const verdict = state.verdictBanner;
  const details = verdict
    ? verdict.checks.filter((c) => !c.passed).map((c) => `${c.name}: ${c.detail}`).join("; ")
    : "";
  void submit(`${lastRequest} (previous attempt failed: ${details})`, []);
}

async function followEvents(sessionId: string): Promise<void> {
  while (true) {
    try {
      for await (const event of streamEvents(BASE, sessionId)) {
        apply(reduce(state, event));
      }
    } catch (err) {
      els.status.textContent = `stream dropped, reconnecting… (${err})`;
    }
    await new Promise((resolve) => setTimeout(resolve, 1000));
    els.status.textContent = "reconnected";
  }
}

async function boot(): Promise<void> {
  try {
    const info = await health(BASE);
    els.status.textContent = `gateway ${info.mode}/${info.tier}`;
    els.tier.value = "";
    const session = await createSession(BASE);
    state = { ...initialState(info.tier), sessionId: session.session_id };
    render();
    void followEvents(session.session_id);
  } catch (err) {
    els.status.textContent = `gateway unreachable at ${BASE}: ${err}`;
  }
}

els.form.addEventListener("submit", (domEvent) => {
  domEvent.preventDefault();
  const files = els.file.files ? [...els.file.files] : [];
  void submit(els.text.value, files).then(() => {
    els.text.value = "";
    els.file.value = "";
  });
});

els.tier.addEventListener("change", async () => {
  // a tier override needs a fresh session (mode/tier are fixed at creation)
  const tier = els.tier.value || undefined;
  const session = await createSession(BASE, tier);
  state = { ...initialState(tier ?? state.tierSelector), sessionId: session.session_id };
  render();
  void followEvents(session.session_id);
});

void boot();
