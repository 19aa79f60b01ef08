/**
 * EEGB container: 4-byte magic "EEGB", one version byte (0x01), uint32-LE
 * header length, UTF-8 JSON header, then the float32-LE sample-major
 * raster of exactly n_samples x n_channels x 4 bytes.
 */

const MAGIC = 'EEGB';
const VERSION = 1;

export interface Marker {
  sample_index: number;
  code: number;
  is_target: boolean;
}

export interface CharacterSpan {
  symbol: string;
  first_marker: number;
  n_markers: number;
}

export interface EegbHeader {
  subject_id: string;
  fs_hz: number;
  n_channels: number;
  n_samples: number;
  channel_names: string[];
  matrix: string[];
  labeled: boolean;
  markers: Marker[];
  characters: CharacterSpan[];
  meta: Record<string, unknown>;
}

export interface EegbSession {
  header: EegbHeader;
  /** Sample-major raster, length n_samples * n_channels. */
  raster: Float32Array;
}

export function encodeEegb(session: EegbSession): Buffer {
  const { header, raster } = session;
  if (raster.length !== header.n_samples * header.n_channels) {
    throw new Error(
      `raster length ${raster.length} != ` +
      `${header.n_samples} x ${header.n_channels}`);
  }
  const headerBytes = Buffer.from(JSON.stringify(header), 'utf-8');
  const out = Buffer.alloc(4 + 1 + 4 + headerBytes.length + raster.length * 4);
  let offset = out.write(MAGIC, 0, 'latin1');
  offset = out.writeUInt8(VERSION, offset);
  offset = out.writeUInt32LE(headerBytes.length, offset);
  offset += headerBytes.copy(out, offset);
  for (let i = 0; i < raster.length; i++) {
    offset = out.writeFloatLE(raster[i], offset);
  }
  return out;
}

export function decodeEegb(buffer: Buffer): EegbSession {
  if (buffer.toString('latin1', 0, 4) !== MAGIC) {
    throw new Error('bad EEGB magic');
  }
  if (buffer.readUInt8(4) !== VERSION) {
    throw new Error(`unsupported EEGB version ${buffer.readUInt8(4)}`);
  }
  const headerLen = buffer.readUInt32LE(5);
  const header = JSON.parse(
    buffer.toString('utf-8', 9, 9 + headerLen)) as EegbHeader;
  const expected = header.n_samples * header.n_channels * 4;
  const body = buffer.subarray(9 + headerLen);
  if (body.length !== expected) {
    throw new Error(`raster is ${body.length} bytes, expected ${expected}`);
  }
  const raster = new Float32Array(header.n_samples * header.n_channels);
  for (let i = 0; i < raster.length; i++) {
    raster[i] = body.readFloatLE(i * 4);
  }
  return { header, raster };
}

/** Structural invariants of a session container; empty list = valid. */
export function validateEegb(session: EegbSession): string[] {
  const v: string[] = [];
  const { header } = session;
  const markersPerChar = 180;
  let prev = -1;
  header.markers.forEach((m, i) => {
    if (m.code < 1 || m.code > 12) {
      v.push(`marker ${i}: code ${m.code} outside [1, 12]`);
    }
    if (m.sample_index <= prev) {
      v.push(`marker ${i}: not strictly ascending`);
    }
    prev = m.sample_index;
    if (m.sample_index + 160 > header.n_samples) {
      v.push(`marker ${i}: window overruns the record`);
    }
  });
  let expectedFirst = 0;
  header.characters.forEach((c, ci) => {
    if (c.first_marker !== expectedFirst) {
      v.push(`character ${ci}: does not start at marker ${expectedFirst}`);
    }
    if (c.n_markers !== markersPerChar) {
      v.push(`character ${ci}: ${c.n_markers} markers`);
    }
    expectedFirst = c.first_marker + c.n_markers;
    const counts = new Map<number, number>();
    const targets = new Set<number>();
    for (let k = c.first_marker; k < c.first_marker + c.n_markers; k++) {
      const m = header.markers[k];
      if (!m) continue;
      counts.set(m.code, (counts.get(m.code) ?? 0) + 1);
      if (m.is_target) targets.add(m.code);
    }
    for (let code = 1; code <= 12; code++) {
      if (counts.get(code) !== 15) {
        v.push(`character ${ci}: code ${code} appears ` +
               `${counts.get(code) ?? 0} times`);
      }
    }
    if (header.labeled && targets.size !== 2) {
      v.push(`character ${ci}: ${targets.size} target codes`);
    }
  });
  if (expectedFirst !== header.markers.length) {
    v.push(`characters cover ${expectedFirst} of ` +
           `${header.markers.length} markers`);
  }
  return v;
}
