/**
 * DOM application: wires the trace scrubber, collision marker list, and
 * the what-if parameter form to the pure state helpers and the service
 * client. All behavior is reachable through the returned actions, so the
 * scripted DOM tests drive exactly what a user would.
 */

import { ApiError, ServiceClient } from "./api.js";
import { FormatError, parseMachine, parseTrace, type MeshData, type Summary, type Trace } from "./formats.js";
import {
  DEFAULT_PARAMS,
  NUMERIC_FIELDS,
  parseParams,
  renderParams,
  validateParams,
  type FieldProblem,
  type SliceParams,
  type Vec2,
} from "./params.js";
import { applyFrame, buildScene, loadTraceIntoScene, type SceneHandles } from "./scene.js";
import {
  clampScrub,
  collisionMarkers,
  fnv1a64,
  formatSeconds,
  initialState,
  summaryDelta,
  type ViewerState,
} from "./state.js";

const DEFAULT_SERVICE_URL = "http://127.0.0.1:8723";
const DEFAULT_BED_RADIUS = 80;

const FIELD_LABELS: Record<string, string> = {
  nozzle_diameter: "nozzle diameter (mm)",
  layer_height: "layer height (mm)",
  layer_count: "layer count",
  travel_height: "travel height (mm)",
  infill_angle: "infill angle (deg)",
  infill_spacing: "infill spacing (mm)",
  perimeter_count: "perimeter count",
  segment_length: "segment length (mm)",
};

function template(initialUrl: string): string {
  const fieldRows = NUMERIC_FIELDS.map(
    (f) => `
    <label class="field" data-field="${f}">
      <span>${FIELD_LABELS[f]}</span>
      <input name="${f}" inputmode="decimal" autocomplete="off">
      <em class="field-error" data-for="${f}" hidden></em>
    </label>`,
  ).join("");
  return `
  <header class="bar">
    <strong>conformal5x viewer</strong>
    <input id="server-url" value="${initialUrl}" size="28">
    <button id="connect" type="button">connect</button>
    <span id="health" class="badge">offline</span>
    <label class="file">trace file <input id="trace-file" type="file" accept=".trace,.txt"></label>
    <span id="banner" class="banner" hidden></span>
  </header>
  <main class="cols">
    <section class="view">
      <div id="canvas-host"></div>
      <div class="scrub-row">
        <input id="scrub" type="range" min="0" max="0" value="0" step="1" disabled>
      </div>
      <dl class="readout">
        <dt>frame</dt><dd><span id="ro-frame">-</span> / <span id="ro-frames">-</span></dd>
        <dt>elapsed</dt><dd><span id="ro-time" data-seconds="">-</span> of <span id="ro-total" data-seconds="">-</span></dd>
        <dt>kind</dt><dd id="ro-kind">-</dd>
        <dt>X Y Z</dt><dd id="ro-xyz">-</dd>
        <dt>U</dt><dd id="ro-u" data-deg="">-</dd>
        <dt>V</dt><dd id="ro-v" data-deg="">-</dd>
        <dt>clearance</dt><dd id="ro-clearance">-</dd>
        <dt>flags</dt><dd id="ro-flags">-</dd>
      </dl>
      <div class="markers">
        <h3>collision frames <span id="marker-count">0</span></h3>
        <ul id="marker-list"></ul>
      </div>
    </section>
    <section class="controls">
      <form id="param-form" novalidate>
        ${fieldRows}
        <label class="field" data-field="region">
          <span>region polygon (x,y pairs)</span>
          <input name="region" autocomplete="off">
          <em class="field-error" data-for="region" hidden></em>
        </label>
        <button id="reslice" type="submit">re-slice</button>
        <span id="run-status"></span>
        <em id="form-error" class="form-error" hidden></em>
      </form>
      <div class="results">
        <div id="hash-badge" class="badge" hidden></div>
        <ul id="delta-list"></ul>
        <pre id="summary"></pre>
        <details><summary>machine</summary><pre id="machine-info"></pre></details>
      </div>
    </section>
  </main>`;
}

export interface AppOptions {
  clientFactory?: (url: string) => ServiceClient;
  initialUrl?: string;
}

export interface AppElements {
  serverUrl: HTMLInputElement;
  connect: HTMLButtonElement;
  health: HTMLElement;
  banner: HTMLElement;
  traceFile: HTMLInputElement;
  scrub: HTMLInputElement;
  roFrame: HTMLElement;
  roFrames: HTMLElement;
  roTime: HTMLElement;
  roTotal: HTMLElement;
  roKind: HTMLElement;
  roXyz: HTMLElement;
  roU: HTMLElement;
  roV: HTMLElement;
  roClearance: HTMLElement;
  roFlags: HTMLElement;
  markerCount: HTMLElement;
  markerList: HTMLElement;
  form: HTMLFormElement;
  reslice: HTMLButtonElement;
  runStatus: HTMLElement;
  formError: HTMLElement;
  hashBadge: HTMLElement;
  deltaList: HTMLElement;
  summary: HTMLElement;
  machineInfo: HTMLElement;
  canvasHost: HTMLElement;
}

export interface App {
  state: ViewerState;
  els: AppElements;
  actions: {
    connect: (url?: string) => Promise<void>;
    loadTraceText: (text: string) => void;
    setScrub: (index: number) => void;
    submitWhatIf: () => Promise<void>;
    fillForm: (params: SliceParams) => void;
    readForm: () => { params: SliceParams; problems: FieldProblem[] };
  };
  scene: () => SceneHandles | null;
  client: () => ServiceClient | null;
}

export function createApp(root: HTMLElement, options: AppOptions = {}): App {
  const initialUrl = options.initialUrl ?? DEFAULT_SERVICE_URL;
  const clientFactory = options.clientFactory ?? ((url: string) => new ServiceClient(url));
  root.innerHTML = template(initialUrl);

  const pick = <T extends HTMLElement>(selector: string): T => {
    const el = root.querySelector<T>(selector);
    if (el === null) throw new Error(`app template is missing ${selector}`);
    return el;
  };
  const els: AppElements = {
    serverUrl: pick("#server-url"),
    connect: pick("#connect"),
    health: pick("#health"),
    banner: pick("#banner"),
    traceFile: pick("#trace-file"),
    scrub: pick("#scrub"),
    roFrame: pick("#ro-frame"),
    roFrames: pick("#ro-frames"),
    roTime: pick("#ro-time"),
    roTotal: pick("#ro-total"),
    roKind: pick("#ro-kind"),
    roXyz: pick("#ro-xyz"),
    roU: pick("#ro-u"),
    roV: pick("#ro-v"),
    roClearance: pick("#ro-clearance"),
    roFlags: pick("#ro-flags"),
    markerCount: pick("#marker-count"),
    markerList: pick("#marker-list"),
    form: pick("#param-form"),
    reslice: pick("#reslice"),
    runStatus: pick("#run-status"),
    formError: pick("#form-error"),
    hashBadge: pick("#hash-badge"),
    deltaList: pick("#delta-list"),
    summary: pick("#summary"),
    machineInfo: pick("#machine-info"),
    canvasHost: pick("#canvas-host"),
  };

  const state: ViewerState = initialState();
  let client: ServiceClient | null = null;
  let meshData: MeshData | null = null;
  let bedRadius = DEFAULT_BED_RADIUS;
  let sceneHandles: SceneHandles | null = null;

  function banner(message: string | null): void {
    els.banner.hidden = message === null;
    els.banner.textContent = message ?? "";
  }

  function formError(message: string | null): void {
    els.formError.hidden = message === null;
    els.formError.textContent = message ?? "";
  }

  function clearFieldErrors(): void {
    for (const el of Array.from(root.querySelectorAll<HTMLElement>(".field-error"))) {
      el.hidden = true;
      el.textContent = "";
    }
    formError(null);
  }

  function showFieldErrors(problems: FieldProblem[]): void {
    const unmatched: string[] = [];
    for (const problem of problems) {
      const el = root.querySelector<HTMLElement>(`.field-error[data-for="${problem.field}"]`);
      if (el === null) {
        unmatched.push(`${problem.field}: ${problem.message}`);
        continue;
      }
      el.hidden = false;
      el.textContent = problem.message;
    }
    if (unmatched.length > 0) formError(unmatched.join("; "));
  }

  function ensureScene(): SceneHandles {
    if (sceneHandles === null) {
      sceneHandles = buildScene(meshData, bedRadius);
    }
    return sceneHandles;
  }

  function updateReadouts(): void {
    const trace = state.trace;
    if (trace === null || trace.frames.length === 0) return;
    const index = clampScrub(trace, state.scrub);
    const frame = trace.frames[index];
    els.roFrame.textContent = String(index);
    els.roFrames.textContent = String(trace.frames.length - 1);
    els.roTime.dataset.seconds = String(frame.time);
    els.roTime.textContent = formatSeconds(frame.time);
    els.roTotal.dataset.seconds = String(trace.totalTime);
    els.roTotal.textContent = formatSeconds(trace.totalTime);
    els.roKind.textContent = frame.kind;
    els.roXyz.textContent = `${frame.x.toFixed(3)} ${frame.y.toFixed(3)} ${frame.z.toFixed(3)}`;
    els.roU.dataset.deg = String(frame.u);
    els.roU.textContent = frame.u.toFixed(3);
    els.roV.dataset.deg = String(frame.v);
    els.roV.textContent = frame.v.toFixed(3);
    els.roClearance.textContent = Number.isFinite(frame.clearance)
      ? frame.clearance.toFixed(3)
      : "unconstrained";
    els.roFlags.textContent = frame.flags.length > 0 ? frame.flags.join(", ") : "none";
  }

  function setScrub(index: number): void {
    state.scrub = clampScrub(state.trace, index);
    els.scrub.value = String(state.scrub);
    if (state.trace !== null && sceneHandles !== null) {
      applyFrame(sceneHandles, state.trace, state.scrub);
    }
    updateReadouts();
  }

  function rebuildMarkerList(trace: Trace): void {
    const markers = collisionMarkers(trace);
    els.markerCount.textContent = String(markers.length);
    els.markerList.textContent = "";
    for (const marker of markers) {
      const item = document.createElement("li");
      const button = document.createElement("button");
      button.type = "button";
      button.className = "marker-jump";
      button.dataset.index = String(marker.index);
      button.textContent = `#${marker.index} t=${formatSeconds(marker.time)} ${marker.flags.join(",")}`;
      button.addEventListener("click", () => setScrub(marker.index));
      item.appendChild(button);
      els.markerList.appendChild(item);
    }
  }

  function installTrace(trace: Trace): void {
    state.trace = trace;
    state.scrub = 0;
    els.scrub.disabled = trace.frames.length === 0;
    els.scrub.max = String(Math.max(trace.frames.length - 1, 0));
    els.scrub.value = "0";
    rebuildMarkerList(trace);
    const scene = ensureScene();
    loadTraceIntoScene(scene, trace);
    applyFrame(scene, trace, 0);
    updateReadouts();
  }

  function loadTraceText(text: string): void {
    try {
      installTrace(parseTrace(text));
      banner(null);
    } catch (err) {
      if (err instanceof FormatError) {
        banner(`trace rejected: ${err.message}`);
        return;
      }
      throw err;
    }
  }

  function fillForm(params: SliceParams): void {
    for (const field of NUMERIC_FIELDS) {
      const input = els.form.elements.namedItem(field) as HTMLInputElement;
      input.value = String(params[field]);
    }
    const region = els.form.elements.namedItem("region") as HTMLInputElement;
    region.value = params.region.map(([x, y]) => `${x},${y}`).join(" ");
  }

  function readForm(): { params: SliceParams; problems: FieldProblem[] } {
    const problems: FieldProblem[] = [];
    const params: SliceParams = { ...DEFAULT_PARAMS, region: [] };
    for (const field of NUMERIC_FIELDS) {
      const input = els.form.elements.namedItem(field) as HTMLInputElement;
      const raw = input.value.trim();
      params[field] = raw === "" ? NaN : Number(raw);
    }
    const regionInput = els.form.elements.namedItem("region") as HTMLInputElement;
    const regionRaw = regionInput.value.trim();
    const points: Vec2[] = [];
    if (regionRaw !== "") {
      for (const pair of regionRaw.split(/\s+/)) {
        const coords = pair.split(",").map((c) => (c.trim() === "" ? NaN : Number(c)));
        if (coords.length !== 2 || coords.some(Number.isNaN)) {
          problems.push({ field: "region", message: `bad point "${pair}", expected x,y` });
          continue;
        }
        points.push([coords[0], coords[1]]);
      }
    }
    params.region = points;
    return { params, problems };
  }

  async function connect(url?: string): Promise<void> {
    const target = (url ?? els.serverUrl.value).trim();
    els.serverUrl.value = target;
    client = clientFactory(target);
    try {
      const label = await client.health();
      els.health.textContent = `connected: ${label.replace(/^ok\s*/, "")}`;
      const machineText = await client.machine();
      els.machineInfo.textContent = machineText.trim();
      const machine = parseMachine(machineText);
      const diameter = machine.get("bed_diameter");
      if (diameter !== undefined && diameter > 0) bedRadius = diameter / 2;
      meshData = await client.mesh();
      sceneHandles = null;
      ensureScene();
      fillForm(parseParams(await client.params()));
      banner(null);
    } catch (err) {
      client = null;
      els.health.textContent = `offline: ${err instanceof Error ? err.message : String(err)}`;
    }
  }

  async function submitWhatIf(): Promise<void> {
    clearFieldErrors();
    const { params, problems } = readForm();
    const allProblems = problems.concat(validateParams(params));
    if (allProblems.length > 0) {
      showFieldErrors(allProblems);
      return;
    }
    if (client === null) {
      formError("not connected to a slicing service");
      return;
    }
    els.runStatus.textContent = "slicing…";
    try {
      const result = await client.whatIf(renderParams(params));
      state.previousRun = state.lastRun;
      state.lastRun = {
        summary: result.summary,
        gcodeHash: result.gcodeHash,
        trace: result.trace,
      };
      installTrace(result.trace);
      renderRunResults(result.summary, result.gcodeHash);
      els.runStatus.textContent = "";
    } catch (err) {
      if (ServiceClient.isAbort(err)) return;
      els.runStatus.textContent = "";
      if (err instanceof ApiError) {
        showServerError(err);
      } else if (err instanceof FormatError) {
        banner(`response rejected: ${err.message}`);
      } else {
        formError(err instanceof Error ? err.message : String(err));
      }
    }
  }

  function showServerError(err: ApiError): void {
    const text = err.message.trim();
    const paramsPrefix = "params error: ";
    if (err.status === 400 && text.startsWith(paramsPrefix)) {
      const problems: FieldProblem[] = [];
      for (const part of text.slice(paramsPrefix.length).split("; ")) {
        const colon = part.indexOf(":");
        const field = colon > 0 ? part.slice(0, colon).trim() : "";
        const known = (NUMERIC_FIELDS as readonly string[]).includes(field) || field === "region";
        if (known) {
          problems.push({ field, message: part.slice(colon + 1).trim() });
        } else {
          problems.push({ field: "", message: part });
        }
      }
      showFieldErrors(problems.filter((p) => p.field !== ""));
      const loose = problems.filter((p) => p.field === "").map((p) => p.message);
      if (loose.length > 0) formError(loose.join("; "));
      return;
    }
    formError(text);
  }

  function renderRunResults(summary: Summary, gcodeHash: string): void {
    const previous = state.previousRun;
    els.hashBadge.hidden = false;
    const short = gcodeHash.slice(0, 12);
    els.hashBadge.dataset.hash = gcodeHash;
    els.hashBadge.textContent =
      previous !== null && previous.gcodeHash === gcodeHash
        ? `gcode ${short} (unchanged)`
        : `gcode ${short}`;
    els.deltaList.textContent = "";
    for (const delta of summaryDelta(previous?.summary ?? null, summary)) {
      if (delta.change === null || delta.change === 0) continue;
      const item = document.createElement("li");
      const arrow = delta.change > 0 ? "↑" : "↓";
      item.textContent = `${delta.key} ${delta.before} → ${delta.after} ${arrow}`;
      els.deltaList.appendChild(item);
    }
    els.summary.textContent = Array.from(summary.entries())
      .map(([key, value]) => `${key} ${value}`)
      .join("\n");
  }

  els.connect.addEventListener("click", () => {
    void connect();
  });
  els.scrub.addEventListener("input", () => {
    setScrub(Number(els.scrub.value));
  });
  els.form.addEventListener("submit", (event) => {
    event.preventDefault();
    void submitWhatIf();
  });
  els.traceFile.addEventListener("change", () => {
    const file = els.traceFile.files?.[0];
    if (file !== undefined) {
      void file.text().then(loadTraceText);
    }
  });

  fillForm(DEFAULT_PARAMS);

  return {
    state,
    els,
    actions: { connect, loadTraceText, setScrub, submitWhatIf, fillForm, readForm },
    scene: () => sceneHandles,
    client: () => client,
  };
}
