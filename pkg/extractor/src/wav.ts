// RIFF/WAVE decoder for the formats that appear in the supported datasets:
// integer PCM at 16/24/32 bits, 32-bit float, and the WAVE_FORMAT_EXTENSIBLE
// wrapper around either. Anything else is rejected loudly.

export class WavError extends Error {}

export interface DecodedAudio {
  samples: Float64Array; // mono, in [-1, 1]
  sampleRate: number;
}

const FORMAT_PCM = 1;
const FORMAT_FLOAT = 3;
const FORMAT_EXTENSIBLE = 0xfffe;

export function decodeWav(buf: Buffer, name = "<wav>"): DecodedAudio {
  if (buf.length < 44) throw new WavError(`${name}: too short for a WAV header`);
  if (buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavError(`${name}: not a RIFF/WAVE file`);
  }

  let fmt: { format: number; channels: number; rate: number; bits: number } | null = null;
  let data: Buffer | null = null;

  // walk the chunk list; chunks are word-aligned
  let off = 12;
  while (off + 8 <= buf.length) {
    const id = buf.toString("ascii", off, off + 4);
    const size = buf.readUInt32LE(off + 4);
    const body = off + 8;
    if (body + size > buf.length) {
      throw new WavError(`${name}: chunk '${id}' overruns the file`);
    }
    if (id === "fmt ") {
      if (size < 16) throw new WavError(`${name}: fmt chunk too small (${size})`);
      let format = buf.readUInt16LE(body);
      const channels = buf.readUInt16LE(body + 2);
      const rate = buf.readUInt32LE(body + 4);
      const bits = buf.readUInt16LE(body + 14);
      if (format === FORMAT_EXTENSIBLE) {
        if (size < 40) throw new WavError(`${name}: extensible fmt chunk too small`);
        format = buf.readUInt16LE(body + 24); // first bytes of the subformat GUID
      }
      fmt = { format, channels, rate, bits };
    } else if (id === "data") {
      data = buf.subarray(body, body + size);
    }
    off = body + size + (size & 1);
  }

  if (!fmt) throw new WavError(`${name}: missing fmt chunk`);
  if (!data) throw new WavError(`${name}: missing data chunk`);
  if (fmt.channels < 1) throw new WavError(`${name}: zero channels`);
  if (fmt.rate < 1) throw new WavError(`${name}: zero sample rate`);

  const bytesPer = fmt.bits / 8;
  if (!Number.isInteger(bytesPer)) {
    throw new WavError(`${name}: bits per sample ${fmt.bits} not byte-aligned`);
  }
  const frameBytes = bytesPer * fmt.channels;
  if (frameBytes === 0 || data.length % frameBytes !== 0) {
    throw new WavError(`${name}: data size ${data.length} not a whole number of frames`);
  }
  const frames = data.length / frameBytes;
  const out = new Float64Array(frames);

  const read = sampleReader(fmt.format, fmt.bits, name);
  for (let i = 0; i < frames; i++) {
    let acc = 0;
    for (let c = 0; c < fmt.channels; c++) {
      acc += read(data, (i * fmt.channels + c) * bytesPer);
    }
    out[i] = acc / fmt.channels;
  }
  return { samples: out, sampleRate: fmt.rate };
}

function sampleReader(format: number, bits: number, name: string) {
  if (format === FORMAT_FLOAT && bits === 32) {
    return (b: Buffer, o: number) => b.readFloatLE(o);
  }
  if (format !== FORMAT_PCM) {
    throw new WavError(`${name}: unsupported format code ${format}`);
  }
  switch (bits) {
    case 16:
      return (b: Buffer, o: number) => b.readInt16LE(o) / 32768;
    case 24:
      return (b: Buffer, o: number) => {
        const v = b[o]! | (b[o + 1]! << 8) | (b[o + 2]! << 16);
        return (v >= 0x800000 ? v - 0x1000000 : v) / 8388608;
      };
    case 32:
      return (b: Buffer, o: number) => b.readInt32LE(o) / 2147483648;
    default:
      throw new WavError(`${name}: unsupported PCM depth ${bits}`);
  }
}
