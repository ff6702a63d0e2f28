// Linear-interpolation resampler. The embedding model downstream is far
// less sensitive to interpolation quality than to mel parameters, so a
// windowed-sinc kernel would buy nothing here.

export function resampleTo(
  samples: Float64Array,
  fromRate: number,
  toRate: number,
): Float64Array {
  if (fromRate === toRate) return samples;
  if (samples.length === 0) return new Float64Array(0);
  const outLen = Math.max(1, Math.round((samples.length * toRate) / fromRate));
  const out = new Float64Array(outLen);
  const step = fromRate / toRate;
  const last = samples.length - 1;
  for (let i = 0; i < outLen; i++) {
    const pos = i * step;
    const i0 = Math.min(Math.floor(pos), last);
    const i1 = Math.min(i0 + 1, last);
    const frac = pos - i0;
    out[i] = samples[i0]! * (1 - frac) + samples[i1]! * frac;
  }
  return out;
}
