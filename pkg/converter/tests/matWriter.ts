/**
 * Minimal MAT level-5 writer used to build test fixtures in the
 * benchmark's layout (optionally with zlib-compressed elements).
 */

import * as zlib from 'node:zlib';

const MI_INT8 = 1;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;
const MI_UTF16 = 17;

const MX_CHAR = 4;
const MX_DOUBLE = 6;
const MX_SINGLE = 7;

function element(type: number, data: Buffer): Buffer {
  const pad = (8 - (data.length % 8)) % 8;
  const out = Buffer.alloc(8 + data.length + pad);
  out.writeUInt32LE(type, 0);
  out.writeUInt32LE(data.length, 4);
  data.copy(out, 8);
  return out;
}

export interface FixtureArray {
  name: string;
  dims: number[];
  /** Flat column-major values (char arrays: code points). */
  values: ArrayLike<number>;
  kind: 'single' | 'double' | 'char';
}

function matrixElement(arr: FixtureArray): Buffer {
  const cls = { single: MX_SINGLE, double: MX_DOUBLE, char: MX_CHAR }[arr.kind];
  const flags = Buffer.alloc(8);
  flags.writeUInt32LE(cls, 0);

  const dims = Buffer.alloc(arr.dims.length * 4);
  arr.dims.forEach((d, i) => dims.writeInt32LE(d, i * 4));

  const name = Buffer.from(arr.name, 'latin1');

  let data: Buffer;
  let dataType: number;
  if (arr.kind === 'single') {
    dataType = MI_SINGLE;
    data = Buffer.alloc(arr.values.length * 4);
    for (let i = 0; i < arr.values.length; i++) {
      data.writeFloatLE(arr.values[i], i * 4);
    }
  } else if (arr.kind === 'double') {
    dataType = MI_DOUBLE;
    data = Buffer.alloc(arr.values.length * 8);
    for (let i = 0; i < arr.values.length; i++) {
      data.writeDoubleLE(arr.values[i], i * 8);
    }
  } else {
    dataType = MI_UTF16;
    data = Buffer.alloc(arr.values.length * 2);
    for (let i = 0; i < arr.values.length; i++) {
      data.writeUInt16LE(arr.values[i], i * 2);
    }
  }

  const body = Buffer.concat([
    element(MI_UINT32, flags),
    element(MI_INT32, dims),
    element(MI_INT8, name),
    element(dataType, data),
  ]);
  return element(MI_MATRIX, body);
}

export function writeMat(arrays: FixtureArray[], compress = false): Buffer {
  const header = Buffer.alloc(128);
  header.write('MATLAB 5.0 MAT-file, synthetic fixture', 0, 'latin1');
  header.writeUInt16LE(0x0100, 124);
  header.write('IM', 126, 'latin1');

  const elements = arrays.map((arr) => {
    const plain = matrixElement(arr);
    if (!compress) return plain;
    return element(MI_COMPRESSED, zlib.deflateSync(plain));
  });
  return Buffer.concat([header, ...elements]);
}

const MATRIX_ROWS = ['ABCDEF', 'GHIJKL', 'MNOPQR', 'STUVWX', 'YZ1234',
                     '56789_'];

export interface FixtureOptions {
  nChars: number;
  seed: number;
  labeled: boolean;
  compress?: boolean;
  flashOn?: number;
  flashOff?: number;
}

/** Deterministic xorshift PRNG so fixtures are reproducible. */
export function makeRng(seed: number): () => number {
  let state = seed >>> 0 || 1;
  return () => {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    return state / 0x100000000;
  };
}

export interface Fixture {
  buffer: Buffer;
  symbols: string;
  signal: Float32Array;   // flat (char, sample, channel) row-major
  nSamplesPerChar: number;
  nChannels: number;
}

/** Build a benchmark-layout MAT file: 180 flash onsets per character. */
export function buildFixture(opts: FixtureOptions): Fixture {
  const { nChars, labeled } = opts;
  const flashOn = opts.flashOn ?? 2;
  const flashOff = opts.flashOff ?? 2;
  const cycle = flashOn + flashOff;
  const nChannels = 64;
  const nSamples = 180 * cycle + 170;
  const rng = makeRng(opts.seed);
  const alphabet = MATRIX_ROWS.join('');

  const symbols = Array.from({ length: nChars },
                             () => alphabet[Math.floor(rng() * 36)]).join('');
  const signal = new Float32Array(nChars * nSamples * nChannels);
  const codes = new Float64Array(nChars * nSamples);
  const types = new Float64Array(nChars * nSamples);

  for (let ch = 0; ch < nChars; ch++) {
    const symbol = symbols[ch];
    const row = 7 + MATRIX_ROWS.findIndex((r) => r.includes(symbol));
    const col = 1 + MATRIX_ROWS[row - 7].indexOf(symbol);
    for (let t = 0; t < nSamples; t++) {
      for (let e = 0; e < nChannels; e++) {
        // integer-valued like the source recordings: exact under float32
        signal[(ch * nSamples + t) * nChannels + e] =
          Math.floor(rng() * 1000) - 500;
      }
    }
    for (let rep = 0; rep < 15; rep++) {
      const order = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];
      for (let i = order.length - 1; i > 0; i--) {
        const j = Math.floor(rng() * (i + 1));
        [order[i], order[j]] = [order[j], order[i]];
      }
      order.forEach((code, slot) => {
        const start = (rep * 12 + slot) * cycle;
        const isTarget = code === row || code === col;
        for (let k = 0; k < flashOn; k++) {
          codes[ch * nSamples + start + k] = code;
          if (isTarget) types[ch * nSamples + start + k] = 1;
        }
      });
    }
  }

  // column-major copies for the MAT container
  const cm = <T extends Float32Array | Float64Array>(
      src: T, dims: number[], make: (n: number) => T): T => {
    const out = make(src.length);
    const [d0, d1, d2] = [dims[0], dims[1], dims[2] ?? 1];
    for (let i = 0; i < d0; i++) {
      for (let j = 0; j < d1; j++) {
        for (let k = 0; k < d2; k++) {
          out[i + j * d0 + k * d0 * d1] = src[(i * d1 + j) * d2 + k];
        }
      }
    }
    return out;
  };

  const arrays: FixtureArray[] = [
    { name: 'Signal', dims: [nChars, nSamples, nChannels],
      values: cm(signal, [nChars, nSamples, nChannels],
                 (n) => new Float32Array(n)),
      kind: 'single' },
    { name: 'StimulusCode', dims: [nChars, nSamples],
      values: cm(codes, [nChars, nSamples], (n) => new Float64Array(n)),
      kind: 'double' },
  ];
  if (labeled) {
    arrays.push({ name: 'StimulusType', dims: [nChars, nSamples],
                  values: cm(types, [nChars, nSamples],
                             (n) => new Float64Array(n)),
                  kind: 'double' });
    arrays.push({ name: 'TargetChar', dims: [1, nChars],
                  values: Array.from(symbols, (s) => s.charCodeAt(0)),
                  kind: 'char' });
  }
  return { buffer: writeMat(arrays, opts.compress ?? false), symbols,
           signal, nSamplesPerChar: nSamples, nChannels };
}
