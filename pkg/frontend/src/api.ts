// Thin typed client for the classification service. The viewer never does
// classification math itself; everything displayed derives from these
// responses.

import type { MaskRLE } from "./rle";

export interface RayRef {
  origin: [number, number, number];
  direction: [number, number, number];
}

export interface ClassifyRequest {
  uv?: [number, number];
  texel?: [number, number];
  ray?: RayRef;
  theta_max: number;
  radius: number;
  connected_only?: boolean;
}

export interface ClassifyStats {
  count: number;
  min_angle: number | null;
  median_angle: number | null;
  faces_selected: number;
}

export interface ClassifyResponse {
  mask: MaskRLE;
  stats: ClassifyStats;
  texel: [number, number];
  uv: [number, number];
  reference_spectrum: number[];
  theta_max: number;
  radius: number;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly reason: string,
  ) {
    super(`service ${status}: ${reason}`);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  async health(): Promise<{ status: string; version?: string }> {
    const res = await fetch(`${this.baseUrl}/health`);
    return res.json();
  }

  async meshText(): Promise<string> {
    const res = await fetch(`${this.baseUrl}/mesh`);
    if (!res.ok) throw new ServiceError(res.status, "mesh unavailable");
    return res.text();
  }

  textureUrl(name: "vis_calib" | "uvf_calib" | "overlay"): string {
    return `${this.baseUrl}/texture/${name}`;
  }

  async classify(req: ClassifyRequest): Promise<ClassifyResponse> {
    const res = await fetch(`${this.baseUrl}/classify`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!res.ok) {
      let reason = res.statusText;
      try {
        const body = await res.json();
        reason = body.reason ?? JSON.stringify(body.detail ?? body);
      } catch {
        // keep the status text
      }
      throw new ServiceError(res.status, reason);
    }
    return res.json();
  }
}
