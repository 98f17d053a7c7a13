// Flat uv-atlas inset: base texture preview with the overlay composited on
// top. Doubles as a texture-space debugger next to the 3D view.

import { maskToRGBA } from "./overlay";

export class AtlasInset {
  private ctx: CanvasRenderingContext2D;
  private baseImage: HTMLImageElement | null = null;
  private overlayCanvas = document.createElement("canvas");
  private overlayVisible = false;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas unsupported");
    this.ctx = ctx;
  }

  setBaseTexture(url: string): void {
    const img = new Image();
    img.onload = () => {
      this.baseImage = img;
      this.draw();
    };
    img.src = url;
  }

  setOverlay(
    mask: Uint8Array,
    width: number,
    height: number,
    color: [number, number, number],
    opacity: number,
  ): void {
    this.overlayCanvas.width = width;
    this.overlayCanvas.height = height;
    const rgba = maskToRGBA(mask, width, height, color, opacity, false);
    const pixels = new Uint8ClampedArray(rgba.length);
    pixels.set(rgba);
    const image = new ImageData(pixels, width, height);
    this.overlayCanvas.getContext("2d")?.putImageData(image, 0, 0);
    this.draw();
  }

  setOverlayVisible(visible: boolean): void {
    this.overlayVisible = visible;
    this.draw();
  }

  private draw(): void {
    const { width, height } = this.canvas;
    this.ctx.clearRect(0, 0, width, height);
    if (this.baseImage) {
      this.ctx.drawImage(this.baseImage, 0, 0, width, height);
    }
    if (this.overlayVisible && this.overlayCanvas.width > 0) {
      this.ctx.drawImage(this.overlayCanvas, 0, 0, width, height);
    }
  }
}
