import { ApiClient, ServiceError } from "./api";
import type { ClassifyResponse } from "./api";
import { ClassifyController } from "./controller";
import { decodeRLE } from "./rle";
import { AtlasInset } from "./inset";
import { ModelScene } from "./scene";
import { renderSpectrum } from "./spectrum";
import {
  applyResult,
  createState,
  setOverlayVisible,
  setTheta,
  toggleTexture,
  THETA_MAX_LIMIT,
  THETA_STEP,
} from "./state";

const api = new ApiClient("");
let state = createState();

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
};

const glCanvas = el<HTMLCanvasElement>("gl");
const insetCanvas = el<HTMLCanvasElement>("inset");
const thetaSlider = el<HTMLInputElement>("theta");
const thetaValue = el<HTMLSpanElement>("theta-value");
const radiusInput = el<HTMLInputElement>("radius");
const overlayToggle = el<HTMLInputElement>("overlay-visible");
const opacitySlider = el<HTMLInputElement>("overlay-opacity");
const opacityValue = el<HTMLSpanElement>("opacity-value");
const statusLine = el<HTMLDivElement>("status");
const statsLine = el<HTMLDivElement>("stats");
const spectrumBox = el<HTMLDivElement>("spectrum");

const scene = new ModelScene(glCanvas);
const inset = new AtlasInset(insetCanvas);

function status(text: string) {
  statusLine.textContent = text;
}

let lastMask: { mask: Uint8Array; width: number; height: number } | null = null;

function pushOverlayPixels() {
  if (!lastMask) return;
  scene.setOverlay(
    lastMask.mask,
    lastMask.width,
    lastMask.height,
    state.overlayColor,
    state.overlayOpacity,
  );
  inset.setOverlay(
    lastMask.mask,
    lastMask.width,
    lastMask.height,
    state.overlayColor,
    state.overlayOpacity,
  );
}

function showResult(res: ClassifyResponse) {
  state = applyResult(state, res);
  lastMask = { mask: decodeRLE(res.mask), width: res.mask.width, height: res.mask.height };
  pushOverlayPixels();
  scene.setOverlayVisible(state.overlayVisible);
  inset.setOverlayVisible(state.overlayVisible);
  overlayToggle.checked = state.overlayVisible;
  renderSpectrum(spectrumBox, res.reference_spectrum);
  statsLine.textContent =
    `${res.stats.count} texels within ${res.theta_max.toFixed(3)} rad, ` +
    `${res.stats.faces_selected} faces, ` +
    `median angle ${res.stats.median_angle?.toFixed(4) ?? "n/a"}`;
  status(
    `picked texel (${res.texel[0]}, ${res.texel[1]}), ` +
      `uv (${res.uv[0].toFixed(4)}, ${res.uv[1].toFixed(4)})`,
  );
}

const controller = new ClassifyController(
  (req) => api.classify(req),
  {
    onResult: showResult,
    onError: (err) => {
      if (err instanceof ServiceError && err.status === 409) {
        status(err.reason); // e.g. "no surface hit"
      } else {
        status(`request failed: ${err}`);
      }
    },
  },
  150,
);

function applyBaseTexture() {
  const url = api.textureUrl(state.baseTexture);
  scene.setBaseTexture(url);
  inset.setBaseTexture(url);
  document
    .querySelectorAll<HTMLButtonElement>("button[data-texture]")
    .forEach((b) => b.classList.toggle("active", b.dataset.texture === state.baseTexture));
}

glCanvas.addEventListener("pointerdown", (event) => {
  if (event.button !== 0) return;
  const down = { x: event.clientX, y: event.clientY, t: performance.now() };
  const onUp = (up: PointerEvent) => {
    glCanvas.removeEventListener("pointerup", onUp);
    const moved = Math.hypot(up.clientX - down.x, up.clientY - down.y);
    if (moved > 4 || performance.now() - down.t > 400) return; // an orbit drag
    controller.classify(
      { ray: scene.pointerRay(up) },
      state.thetaMax,
      state.radius,
    );
  };
  glCanvas.addEventListener("pointerup", onUp);
});

thetaSlider.min = "0";
thetaSlider.max = String(THETA_MAX_LIMIT);
thetaSlider.step = String(THETA_STEP);
thetaSlider.value = String(state.thetaMax);
thetaValue.textContent = state.thetaMax.toFixed(3);
thetaSlider.addEventListener("input", () => {
  state = setTheta(state, Number(thetaSlider.value));
  thetaValue.textContent = state.thetaMax.toFixed(3);
  controller.setThreshold(state.thetaMax, state.radius);
});

radiusInput.addEventListener("change", () => {
  state = { ...state, radius: Math.max(0, Math.trunc(Number(radiusInput.value) || 0)) };
  radiusInput.value = String(state.radius);
});

overlayToggle.addEventListener("change", () => {
  state = setOverlayVisible(state, overlayToggle.checked);
  overlayToggle.checked = state.overlayVisible;
  scene.setOverlayVisible(state.overlayVisible);
  inset.setOverlayVisible(state.overlayVisible);
});

opacitySlider.addEventListener("input", () => {
  state = { ...state, overlayOpacity: Number(opacitySlider.value) };
  opacityValue.textContent = state.overlayOpacity.toFixed(2);
  pushOverlayPixels();
});

document.querySelectorAll<HTMLButtonElement>("button[data-texture]").forEach((btn) =>
  btn.addEventListener("click", () => {
    if (btn.dataset.texture !== state.baseTexture) {
      state = toggleTexture(state);
      applyBaseTexture();
    }
  }),
);

async function boot() {
  try {
    const health = await api.health();
    status(`service ${health.status} (v${health.version ?? "?"})`);
    scene.loadMesh(await api.meshText());
    applyBaseTexture();
    status("click the model to map similar materials");
  } catch (err) {
    status(`service unavailable: ${err}`);
  }
}

void boot();
