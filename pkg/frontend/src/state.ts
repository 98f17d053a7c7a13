// Viewer state: active base texture, angular threshold, neighborhood
// radius, last pick echo, overlay visibility and color. The overlay can
// only be shown once a classification response exists.

import type { ClassifyResponse } from "./api";

export const THETA_MIN = 0.0;
export const THETA_MAX_LIMIT = 0.5;
export const THETA_STEP = 0.005;
export const THETA_DEFAULT = 0.15;

export type BaseTexture = "vis_calib" | "uvf_calib";

export interface PickEcho {
  texel: [number, number];
  uv: [number, number];
  spectrum: number[];
}

export interface ViewState {
  baseTexture: BaseTexture;
  thetaMax: number;
  radius: number;
  lastPick: PickEcho | null;
  hasResult: boolean;
  overlayVisible: boolean;
  overlayColor: [number, number, number];
  overlayOpacity: number;
}

export function createState(): ViewState {
  return {
    baseTexture: "vis_calib",
    thetaMax: THETA_DEFAULT,
    radius: 0,
    lastPick: null,
    hasResult: false,
    overlayVisible: false,
    overlayColor: [255, 0, 255],
    overlayOpacity: 0.85,
  };
}

export function clampTheta(value: number): number {
  if (!Number.isFinite(value)) return THETA_DEFAULT;
  const clamped = Math.min(Math.max(value, THETA_MIN), THETA_MAX_LIMIT);
  return Math.round(clamped / THETA_STEP) * THETA_STEP;
}

export function setTheta(state: ViewState, value: number): ViewState {
  return { ...state, thetaMax: clampTheta(value) };
}

export function toggleTexture(state: ViewState): ViewState {
  const next: BaseTexture =
    state.baseTexture === "vis_calib" ? "uvf_calib" : "vis_calib";
  // camera, overlay, and pick survive the toggle untouched
  return { ...state, baseTexture: next };
}

export function applyResult(state: ViewState, res: ClassifyResponse): ViewState {
  return {
    ...state,
    lastPick: {
      texel: res.texel,
      uv: res.uv,
      spectrum: res.reference_spectrum,
    },
    hasResult: true,
    overlayVisible: true, // a fresh result always becomes visible
  };
}

export function setOverlayVisible(state: ViewState, visible: boolean): ViewState {
  return { ...state, overlayVisible: visible && state.hasResult };
}
