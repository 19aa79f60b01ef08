/**
 * Conversion from the benchmark's per-subject MAT layout to EEGB.
 *
 * The distribution stores one row per spelled character: a signal tensor
 * (characters x samples x 64 channels), a stimulus-code stream and a
 * flashing stream aligned sample-for-sample with it, a target-flag
 * stream on training files, and the target character string. Characters
 * concatenate in order into one continuous record; flash markers sit on
 * the rising edge of the code stream.
 */

import { MatVariable, at2, at3, charToString, readMat } from './mat.js';
import { CharacterSpan, EegbSession, Marker, validateEegb } from './eegb.js';

export class ConversionError extends Error {}

const MATRIX_ROWS = ['ABCDEF', 'GHIJKL', 'MNOPQR', 'STUVWX', 'YZ1234',
                     '56789_'];
const FS_HZ = 240;
const MARKERS_PER_CHARACTER = 180;

export interface ConversionSummary {
  characters: number;
  markers: number;
  targets: number;
  labeled: boolean;
  samples: number;
  channels: number;
}

function targetCodes(symbol: string): [number, number] {
  for (let r = 0; r < 6; r++) {
    const c = MATRIX_ROWS[r].indexOf(symbol);
    if (c >= 0) return [r + 7, c + 1];
  }
  throw new ConversionError(`symbol ${JSON.stringify(symbol)} not in matrix`);
}

function need(vars: Map<string, MatVariable>, name: string): MatVariable {
  const v = vars.get(name);
  if (!v) {
    throw new ConversionError(
      `variable ${name} missing; found [${[...vars.keys()].join(', ')}]`);
  }
  return v;
}

export function convertMat(buffer: Buffer, subject: string,
                           answers?: string): EegbSession {
  const vars = readMat(buffer);
  const signal = need(vars, 'Signal');
  const codes = need(vars, 'StimulusCode');
  const types = vars.get('StimulusType') ?? null;
  const targetChar = vars.get('TargetChar') ?? null;

  if (signal.dims.length !== 3) {
    throw new ConversionError(
      `Signal must be characters x samples x channels, got [${signal.dims}]`);
  }
  const [nChars, nSamples, nChannels] = signal.dims;
  if (codes.dims.length !== 2 || codes.dims[0] !== nChars
      || codes.dims[1] !== nSamples) {
    throw new ConversionError(
      `StimulusCode dims [${codes.dims}] do not match Signal [${signal.dims}]`);
  }

  let symbols: string | null = targetChar ? charToString(targetChar) : null;
  if (answers !== undefined) {
    const trimmed = answers.trim();
    if (trimmed.length !== nChars) {
      throw new ConversionError(
        `answer string has ${trimmed.length} symbols for ${nChars} characters`);
    }
    symbols = trimmed;
  }
  // labels need both the flag stream and symbols, or an answer string
  const labeled = (types !== null && symbols !== null)
    || answers !== undefined;

  const markers: Marker[] = [];
  const characters: CharacterSpan[] = [];
  const raster = new Float32Array(nChars * nSamples * nChannels);

  for (let ch = 0; ch < nChars; ch++) {
    const base = ch * nSamples;
    for (let t = 0; t < nSamples; t++) {
      for (let e = 0; e < nChannels; e++) {
        raster[(base + t) * nChannels + e] = at3(signal, ch, t, e);
      }
    }

    const symbol = symbols ? symbols[ch] : '?';
    let targetRow = 0;
    let targetCol = 0;
    if (labeled && answers !== undefined) {
      [targetRow, targetCol] = targetCodes(symbol);
    }

    characters.push({ symbol, first_marker: markers.length,
                      n_markers: MARKERS_PER_CHARACTER });
    let count = 0;
    let prev = 0;
    for (let t = 0; t < nSamples; t++) {
      const code = at2(codes, ch, t);
      if (code > 0 && prev === 0) {
        if (code < 1 || code > 12 || !Number.isInteger(code)) {
          throw new ConversionError(
            `character ${ch}: stimulus code ${code} at sample ${t}`);
        }
        let isTarget = false;
        if (labeled) {
          isTarget = answers !== undefined
            ? code === targetRow || code === targetCol
            : at2(types!, ch, t) === 1;
        }
        markers.push({ sample_index: base + t, code, is_target: isTarget });
        count++;
      }
      prev = code;
    }
    if (count !== MARKERS_PER_CHARACTER) {
      throw new ConversionError(
        `character ${ch}: ${count} flash onsets, ` +
        `expected ${MARKERS_PER_CHARACTER}`);
    }
  }

  const session: EegbSession = {
    header: {
      subject_id: subject,
      fs_hz: FS_HZ,
      n_channels: nChannels,
      n_samples: nChars * nSamples,
      channel_names: Array.from({ length: nChannels },
                                (_, i) => `ch${String(i).padStart(2, '0')}`),
      matrix: MATRIX_ROWS,
      labeled,
      markers,
      characters,
      meta: labeled ? {} : { unlabeled: true },
    },
    raster,
  };
  const violations = validateEegb(session);
  if (violations.length > 0) {
    throw new ConversionError(`converted session is invalid: ${violations[0]}`);
  }
  return session;
}

export function summarize(session: EegbSession): ConversionSummary {
  return {
    characters: session.header.characters.length,
    markers: session.header.markers.length,
    targets: session.header.markers.filter((m) => m.is_target).length,
    labeled: session.header.labeled,
    samples: session.header.n_samples,
    channels: session.header.n_channels,
  };
}
