// Overlay pixel building. Mask rows arrive top-first (row 0 = texture top);
// WebGL data textures address v = 0 at the first row they receive, and the
// atlas convention puts v = 0 on the bottom row, so the GPU copy is built
// bottom-first.

export function maskToRGBA(
  mask: Uint8Array,
  width: number,
  height: number,
  color: [number, number, number],
  alpha: number,
  bottomFirst: boolean,
): Uint8Array {
  if (mask.length !== width * height) {
    throw new Error(`mask length ${mask.length} != ${width}x${height}`);
  }
  const out = new Uint8Array(width * height * 4);
  const a = Math.round(Math.min(Math.max(alpha, 0), 1) * 255);
  for (let row = 0; row < height; row++) {
    const srcRow = bottomFirst ? height - 1 - row : row;
    for (let col = 0; col < width; col++) {
      if (mask[srcRow * width + col]) {
        const o = (row * width + col) * 4;
        out[o] = color[0];
        out[o + 1] = color[1];
        out[o + 2] = color[2];
        out[o + 3] = a;
      }
    }
  }
  return out;
}
