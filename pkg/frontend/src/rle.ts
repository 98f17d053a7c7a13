// Run-length encoded masks as delivered by POST /classify: row-major scan,
// alternating run lengths starting with a false run (possibly length 0).

export interface MaskRLE {
  width: number;
  height: number;
  counts: number[];
}

export function decodeRLE(rle: MaskRLE): Uint8Array {
  const { width, height, counts } = rle;
  const total = width * height;
  let sum = 0;
  for (const c of counts) {
    if (c < 0 || !Number.isInteger(c)) {
      throw new Error(`invalid RLE run ${c}`);
    }
    sum += c;
  }
  if (sum !== total) {
    throw new Error(`RLE sums to ${sum}, expected ${total}`);
  }
  const mask = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of counts) {
    if (value) {
      mask.fill(1, pos, pos + run);
    }
    pos += run;
    value ^= 1;
  }
  return mask;
}

export function countMask(mask: Uint8Array): number {
  let n = 0;
  for (let i = 0; i < mask.length; i++) n += mask[i];
  return n;
}
