import { ApiClient } from "./api.js";
import { EventFeed } from "./events.js";
import { drawOverlay, type Canvas2DLike } from "./overlay.js";
import { ConsoleViewModel, type ConsoleState } from "./viewmodel.js";

const api = new ApiClient("");
const vm = new ConsoleViewModel(api);

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const imageInput = el<HTMLInputElement>("image-input");
const instructionInput = el<HTMLInputElement>("instruction-input");
const submitButton = el<HTMLButtonElement>("submit-button");
const approveButton = el<HTMLButtonElement>("approve-button");
const rejectButton = el<HTMLButtonElement>("reject-button");
const banner = el<HTMLDivElement>("banner");
const statusBadge = el<HTMLSpanElement>("status-badge");
const planBody = el<HTMLTableSectionElement>("plan-body");
const progressText = el<HTMLSpanElement>("progress-text");
const historyList = el<HTMLUListElement>("history-list");
const sceneCanvas = el<HTMLCanvasElement>("scene-canvas");
const sceneNotice = el<HTMLParagraphElement>("scene-notice");
const warningsText = el<HTMLParagraphElement>("warnings");

let imageBase64 = "";

imageInput.addEventListener("change", () => {
  const file = imageInput.files?.[0];
  if (!file) return;
  const reader = new FileReader();
  reader.onload = () => {
    imageBase64 = String(reader.result).split(",", 2)[1] ?? "";
  };
  reader.readAsDataURL(file);
});

submitButton.addEventListener("click", () => void vm.submit(imageBase64, instructionInput.value));
approveButton.addEventListener("click", () => void vm.decide(true));
rejectButton.addEventListener("click", () => void vm.decide(false));

function renderScene(state: ConsoleState): void {
  const scene = state.scene;
  if (!scene || scene.objects.length === 0) {
    sceneNotice.textContent = scene
      ? "No objects detected in the scene."
      : "No scene yet. Submit a run to populate the overlay.";
    sceneNotice.hidden = false;
    return;
  }
  sceneNotice.hidden = true;
  sceneCanvas.width = scene.width ?? sceneCanvas.width;
  sceneCanvas.height = scene.height ?? sceneCanvas.height;
  const ctx = sceneCanvas.getContext("2d") as unknown as Canvas2DLike | null;
  if (!ctx) return;
  const markers = vm.overlayMarkers();
  if (scene.image) {
    const img = new Image();
    img.onload = () => drawOverlay(ctx, img, sceneCanvas.width, sceneCanvas.height, markers);
    img.src = `data:image/png;base64,${scene.image}`;
  } else {
    drawOverlay(ctx, null, sceneCanvas.width, sceneCanvas.height, markers);
  }
}

function render(state: ConsoleState): void {
  banner.textContent = state.banner ?? "";
  banner.hidden = !state.banner;
  statusBadge.textContent = state.status ?? "idle";
  statusBadge.dataset.status = state.status ?? "idle";

  const decidable = vm.canDecide();
  approveButton.disabled = !decidable;
  rejectButton.disabled = !decidable;
  submitButton.disabled = state.status !== null && !vm.isFinished();

  planBody.replaceChildren(
    ...vm.planRows().map((row) => {
      const tr = document.createElement("tr");
      for (const cell of [String(row.sourceLine), row.action, row.params, row.scores]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      return tr;
    }),
  );

  progressText.textContent = state.progress
    ? `batch ${state.progress.batch}, command ${state.progress.command} (${state.progress.events} events)`
    : "-";
  warningsText.textContent = state.record?.warnings.join("; ") ?? "";

  historyList.replaceChildren(
    ...state.history.map((run) => {
      const li = document.createElement("li");
      li.textContent = `${run.status}: ${run.instruction} (${run.run_id.slice(0, 8)})`;
      return li;
    }),
  );

  renderScene(state);
}

vm.onChange(render);
render(vm.state);

const feed = new EventFeed(api, (event) => void vm.ingestEvent(event));
feed.start();
