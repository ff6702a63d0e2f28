// Log-mel front end matching the training configuration of the embedding
// model: 32 kHz input, 1024-sample Hann frames every 320 samples, 64 mel
// bands from 50 Hz to 14 kHz on the Slaney scale with area normalization,
// magnitudes squared and mapped to decibels with a 1e-10 floor.

export const TARGET_RATE = 32000;
export const WIN_LENGTH = 1024;
export const HOP_LENGTH = 320;
export const N_MELS = 64;
export const FMIN = 50;
export const FMAX = 14000;

const AMIN = 1e-10;
const N_BINS = WIN_LENGTH / 2 + 1;

export interface MelPatch {
  frames: number;
  bins: number;
  data: Float32Array; // frames * bins, frame-major
}

// Slaney mel: linear below 1 kHz, logarithmic above.
export function hzToMel(f: number): number {
  if (f < 1000) return (3 * f) / 200;
  return 15 + Math.log(f / 1000) / (Math.log(6.4) / 27);
}

export function melToHz(m: number): number {
  if (m < 15) return (200 * m) / 3;
  return 1000 * Math.exp((m - 15) * (Math.log(6.4) / 27));
}

let cachedFilters: Float64Array | null = null;

// triangular filterbank as a dense (N_MELS x N_BINS) matrix
export function melFilterBank(): Float64Array {
  if (cachedFilters) return cachedFilters;
  const edges = new Float64Array(N_MELS + 2);
  const lo = hzToMel(FMIN);
  const hi = hzToMel(FMAX);
  for (let i = 0; i < edges.length; i++) {
    edges[i] = melToHz(lo + ((hi - lo) * i) / (N_MELS + 1));
  }
  const filters = new Float64Array(N_MELS * N_BINS);
  for (let m = 0; m < N_MELS; m++) {
    const left = edges[m]!;
    const center = edges[m + 1]!;
    const right = edges[m + 2]!;
    const norm = 2 / (right - left); // equal-area scaling
    for (let k = 0; k < N_BINS; k++) {
      const f = (k * TARGET_RATE) / WIN_LENGTH;
      let w = 0;
      if (f > left && f < right) {
        w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      }
      filters[m * N_BINS + k] = w * norm;
    }
  }
  cachedFilters = filters;
  return filters;
}

// in-place iterative radix-2 FFT over interleaved re/im
function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      const tr = re[i]!; re[i] = re[j]!; re[j] = tr;
      const ti = im[i]!; im[i] = im[j]!; im[j] = ti;
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wr = Math.cos(ang);
    const wi = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let cr = 1;
      let ci = 0;
      for (let k = 0; k < len / 2; k++) {
        const ur = re[i + k]!;
        const ui = im[i + k]!;
        const vr = re[i + k + len / 2]! * cr - im[i + k + len / 2]! * ci;
        const vi = re[i + k + len / 2]! * ci + im[i + k + len / 2]! * cr;
        re[i + k] = ur + vr;
        im[i + k] = ui + vi;
        re[i + k + len / 2] = ur - vr;
        im[i + k + len / 2] = ui - vi;
        const ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

function hannWindow(): Float64Array {
  const w = new Float64Array(WIN_LENGTH);
  for (let n = 0; n < WIN_LENGTH; n++) {
    w[n] = 0.5 * (1 - Math.cos((2 * Math.PI * n) / WIN_LENGTH));
  }
  return w;
}

const WINDOW = hannWindow();

// centered framing: reflect-pad half a window at each end so frame k is
// centered on sample k * HOP_LENGTH
function paddedSample(samples: Float64Array, idx: number): number {
  const n = samples.length;
  if (n === 1) return samples[0]!;
  let i = idx;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return samples[i]!;
}

export function logMel(samples: Float64Array): MelPatch {
  const frames = 1 + Math.floor(samples.length / HOP_LENGTH);
  const filters = melFilterBank();
  const data = new Float32Array(frames * N_MELS);
  const re = new Float64Array(WIN_LENGTH);
  const im = new Float64Array(WIN_LENGTH);
  const power = new Float64Array(N_BINS);

  for (let t = 0; t < frames; t++) {
    const start = t * HOP_LENGTH - WIN_LENGTH / 2;
    for (let n = 0; n < WIN_LENGTH; n++) {
      re[n] = paddedSample(samples, start + n) * WINDOW[n]!;
      im[n] = 0;
    }
    fft(re, im);
    for (let k = 0; k < N_BINS; k++) {
      power[k] = re[k]! * re[k]! + im[k]! * im[k]!;
    }
    for (let m = 0; m < N_MELS; m++) {
      let acc = 0;
      const row = m * N_BINS;
      for (let k = 0; k < N_BINS; k++) {
        acc += filters[row + k]! * power[k]!;
      }
      data[t * N_MELS + m] = 10 * Math.log10(Math.max(acc, AMIN));
    }
  }
  return { frames, bins: N_MELS, data };
}
