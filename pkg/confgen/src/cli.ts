#!/usr/bin/env node
/** confgen prep: condensed glycan names -> conformer-ensemble JSONL.
 *
 *   confgen prep --input sugars.csv [--labels shifts.csv] --out data.jsonl
 *                [--n-gen 200] [--n-keep 100] [--rmsd 0.5] [--seed 0]
 *
 * Exit codes: 0 success, 2 input validation error.
 */

import { parseArgs } from 'node:util';
import { readFileSync, writeFileSync } from 'node:fs';
import { parseInputCsv, parseLabelCsv } from './io.js';
import { prepareAll } from './pipeline.js';
import { toJsonl } from './emit.js';

function fail(message: string): never {
  process.stderr.write(`error: ${message}\n`);
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv[0] !== 'prep') {
    process.stderr.write('usage: confgen prep --input <csv> [--labels <csv>] --out <jsonl>\n');
    return 2;
  }
  let values: Record<string, string | undefined>;
  try {
    ({ values } = parseArgs({
      args: argv.slice(1),
      options: {
        input: { type: 'string' },
        labels: { type: 'string' },
        out: { type: 'string' },
        'n-gen': { type: 'string', default: '200' },
        'n-keep': { type: 'string', default: '100' },
        rmsd: { type: 'string', default: '0.5' },
        seed: { type: 'string', default: '0' },
      },
    }) as { values: Record<string, string | undefined> });
  } catch (e) {
    fail((e as Error).message);
  }
  if (!values.input || !values.out) fail('--input and --out are required');

  const spec = {
    nGenerate: Number(values['n-gen']),
    nKeep: Number(values['n-keep']),
    rmsdThreshold: Number(values.rmsd),
    seed: Number(values.seed),
  };
  for (const [k, v] of Object.entries(spec)) {
    if (!Number.isFinite(v)) fail(`bad numeric value for ${k}`);
  }

  try {
    const rows = parseInputCsv(readFileSync(values.input, 'utf-8'));
    const labels = values.labels ? parseLabelCsv(readFileSync(values.labels, 'utf-8')) : [];
    const records = prepareAll(rows, labels, spec);
    writeFileSync(values.out, toJsonl(records));
    process.stderr.write(
      `wrote ${records.length} records ` +
        `(${records.map((r) => r.conformers.length).join('/')} conformers) to ${values.out}\n`,
    );
    return 0;
  } catch (e) {
    fail((e as Error).message);
  }
}

process.exit(main(process.argv.slice(2)));
