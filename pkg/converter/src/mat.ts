/**
 * Minimal MAT-file (level 5) reader covering the layouts used by the
 * public BCI speller benchmark distribution: full numeric arrays of up
 * to three dimensions, character arrays, and zlib-compressed elements.
 * Cells, structs, sparse and complex arrays are rejected.
 */

import * as zlib from 'node:zlib';

export class MatFormatError extends Error {}

// mi data types
const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT16 = 3;
const MI_UINT16 = 4;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;
const MI_UTF8 = 16;
const MI_UTF16 = 17;

// mx array classes
const MX_CHAR = 4;
const MX_DOUBLE = 6;
const MX_SINGLE = 7;
const MX_INT8 = 8;
const MX_UINT8 = 9;
const MX_INT16 = 10;
const MX_UINT16 = 11;
const MX_INT32 = 12;
const MX_UINT32 = 13;

const NUMERIC_CLASSES = new Set([MX_DOUBLE, MX_SINGLE, MX_INT8, MX_UINT8,
                                 MX_INT16, MX_UINT16, MX_INT32, MX_UINT32]);

export interface MatVariable {
  name: string;
  /** Column-major dimensions as stored in the file. */
  dims: number[];
  /** Flat column-major values; chars are code points. */
  data: Float64Array;
  isChar: boolean;
}

interface Element {
  type: number;
  bytes: Uint8Array;
}

function readElement(view: DataView, offset: number,
                     littleEndian: boolean): { elem: Element; next: number } {
  if (offset + 8 > view.byteLength) {
    throw new MatFormatError(
      `truncated element tag at byte ${offset} of ${view.byteLength}`);
  }
  const first = view.getUint32(offset, littleEndian);
  let type: number;
  let nBytes: number;
  let dataStart: number;
  let padTo: number;
  if ((first & 0xffff0000) !== 0) {
    // small data element: length in the upper 16 bits, data in-tag
    type = first & 0xffff;
    nBytes = first >>> 16;
    dataStart = offset + 4;
    padTo = offset + 8;
  } else {
    type = first;
    nBytes = view.getUint32(offset + 4, littleEndian);
    dataStart = offset + 8;
    padTo = dataStart + nBytes + ((8 - (nBytes % 8)) % 8);
  }
  if (dataStart + nBytes > view.byteLength) {
    throw new MatFormatError(
      `truncated element body: need ${nBytes} bytes at ${dataStart}, ` +
      `file has ${view.byteLength}`);
  }
  const bytes = new Uint8Array(view.buffer,
                               view.byteOffset + dataStart, nBytes);
  return { elem: { type, bytes }, next: padTo };
}

function numericValues(elem: Element, littleEndian: boolean): Float64Array {
  const dv = new DataView(elem.bytes.buffer, elem.bytes.byteOffset,
                          elem.bytes.byteLength);
  const read: { [t: number]: [number, (o: number) => number] } = {
    [MI_INT8]: [1, (o) => dv.getInt8(o)],
    [MI_UINT8]: [1, (o) => dv.getUint8(o)],
    [MI_UTF8]: [1, (o) => dv.getUint8(o)],
    [MI_INT16]: [2, (o) => dv.getInt16(o, littleEndian)],
    [MI_UINT16]: [2, (o) => dv.getUint16(o, littleEndian)],
    [MI_UTF16]: [2, (o) => dv.getUint16(o, littleEndian)],
    [MI_INT32]: [4, (o) => dv.getInt32(o, littleEndian)],
    [MI_UINT32]: [4, (o) => dv.getUint32(o, littleEndian)],
    [MI_SINGLE]: [4, (o) => dv.getFloat32(o, littleEndian)],
    [MI_DOUBLE]: [8, (o) => dv.getFloat64(o, littleEndian)],
  };
  const entry = read[elem.type];
  if (!entry) {
    throw new MatFormatError(`unsupported data type mi=${elem.type}`);
  }
  const [width, get] = entry;
  const n = Math.floor(elem.bytes.byteLength / width);
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = get(i * width);
  }
  return out;
}

function parseMatrix(elem: Element, littleEndian: boolean): MatVariable {
  const view = new DataView(elem.bytes.buffer, elem.bytes.byteOffset,
                            elem.bytes.byteLength);
  let offset = 0;

  const flags = readElement(view, offset, littleEndian);
  offset = flags.next;
  const flagWord = new DataView(flags.elem.bytes.buffer,
                                flags.elem.bytes.byteOffset)
    .getUint32(0, littleEndian);
  const cls = flagWord & 0xff;
  if ((flagWord & 0x0800) !== 0) {
    throw new MatFormatError('complex arrays are not supported');
  }
  if (cls !== MX_CHAR && !NUMERIC_CLASSES.has(cls)) {
    throw new MatFormatError(`unsupported array class mx=${cls}`);
  }

  const dimsElem = readElement(view, offset, littleEndian);
  offset = dimsElem.next;
  const dims = Array.from(numericValues(dimsElem.elem, littleEndian),
                          (d) => Math.trunc(d));
  if (dims.length > 3) {
    throw new MatFormatError(`rank-${dims.length} arrays are not supported`);
  }

  const nameElem = readElement(view, offset, littleEndian);
  offset = nameElem.next;
  const name = Buffer.from(nameElem.elem.bytes).toString('latin1');

  const dataElem = readElement(view, offset, littleEndian);
  const data = numericValues(dataElem.elem, littleEndian);
  const expected = dims.reduce((a, b) => a * b, 1);
  if (data.length !== expected) {
    throw new MatFormatError(
      `variable ${name}: ${data.length} values for dims [${dims}]`);
  }
  return { name, dims, data, isChar: cls === MX_CHAR };
}

/** Parse every top-level variable of a level-5 MAT file. */
export function readMat(buffer: Buffer): Map<string, MatVariable> {
  if (buffer.length < 128) {
    throw new MatFormatError(`file too short for a MAT header: ${buffer.length} bytes`);
  }
  const endian = buffer.toString('latin1', 126, 128);
  let littleEndian: boolean;
  if (endian === 'IM') {
    littleEndian = true;
  } else if (endian === 'MI') {
    littleEndian = false;
  } else {
    throw new MatFormatError(`bad endian indicator ${JSON.stringify(endian)}`);
  }
  const version = littleEndian ? buffer.readUInt16LE(124)
                               : buffer.readUInt16BE(124);
  if (version !== 0x0100) {
    throw new MatFormatError(`unsupported MAT version 0x${version.toString(16)}`);
  }

  const variables = new Map<string, MatVariable>();
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.length);
  let offset = 128;
  while (offset < buffer.length) {
    const { elem, next } = readElement(view, offset, littleEndian);
    offset = next;
    let matrix = elem;
    if (elem.type === MI_COMPRESSED) {
      const inflated = zlib.inflateSync(Buffer.from(elem.bytes));
      const innerView = new DataView(inflated.buffer, inflated.byteOffset,
                                     inflated.length);
      matrix = readElement(innerView, 0, littleEndian).elem;
    }
    if (matrix.type !== MI_MATRIX) {
      throw new MatFormatError(`unexpected top-level element mi=${matrix.type}`);
    }
    const variable = parseMatrix(matrix, littleEndian);
    variables.set(variable.name, variable);
  }
  return variables;
}

/** Value at row-major position (i, j) of a 2-D column-major variable. */
export function at2(v: MatVariable, i: number, j: number): number {
  return v.data[i + j * v.dims[0]];
}

/** Value at row-major position (i, j, k) of a 3-D column-major variable. */
export function at3(v: MatVariable, i: number, j: number, k: number): number {
  return v.data[i + j * v.dims[0] + k * v.dims[0] * v.dims[1]];
}

export function charToString(v: MatVariable): string {
  if (!v.isChar) {
    throw new MatFormatError(`variable ${v.name} is not a char array`);
  }
  // 1xN char rows: column-major order is string order
  return String.fromCharCode(...Array.from(v.data, (c) => Math.trunc(c)));
}
