/**
 * converter INPUT.mat OUTPUT.eegb --subject A|B [--answers FILE]
 *
 * Exit code 0 on success. On any failure nothing is written.
 */

import * as fs from 'node:fs';
import { ConversionError, convertMat, summarize } from './convert.js';
import { encodeEegb } from './eegb.js';
import { MatFormatError } from './mat.js';

function usage(): never {
  console.error(
    'usage: converter INPUT.mat OUTPUT.eegb --subject A|B [--answers FILE]');
  process.exit(2);
}

export function main(argv: string[]): number {
  const positional: string[] = [];
  let subject: string | undefined;
  let answersPath: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === '--subject') {
      subject = argv[++i];
    } else if (arg === '--answers') {
      answersPath = argv[++i];
    } else if (arg.startsWith('-')) {
      console.error(`unknown option ${arg}`);
      usage();
    } else {
      positional.push(arg);
    }
  }
  if (positional.length !== 2 || !subject) {
    usage();
  }
  const [input, output] = positional;

  try {
    const answers = answersPath !== undefined
      ? fs.readFileSync(answersPath, 'utf-8')
      : undefined;
    const session = convertMat(fs.readFileSync(input), subject, answers);
    const encoded = encodeEegb(session);
    fs.writeFileSync(output, encoded);
    const s = summarize(session);
    console.log(
      `${output}: ${s.characters} characters, ${s.markers} markers, ` +
      `${s.targets} targets, ${s.samples} samples x ${s.channels} ` +
      `channels${s.labeled ? '' : ' (unlabeled)'}`);
    return 0;
  } catch (err) {
    if (err instanceof MatFormatError || err instanceof ConversionError) {
      console.error(`format error: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && 'code' in err) {
      console.error(`i/o error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
