import { describe, expect, it } from 'vitest';
import { execFileSync } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { Rng } from '../src/geometry.js';
import { parseGlycanName, SUGARS } from '../src/nomenclature.js';
import { buildStructure, resolveAtomRef, structureFromInput } from '../src/structure.js';
import { sampleConformers } from '../src/conformers.js';
import { scoreConformers } from '../src/energy.js';
import { diversityFilter, energyFilter, selectConformers } from '../src/filter.js';
import { rmsd } from '../src/rmsd.js';
import { parseInputCsv, parseLabelCsv } from '../src/io.js';
import { prepareAll } from '../src/pipeline.js';
import { toJsonl } from '../src/emit.js';

const SPEC = { nGenerate: 200, nKeep: 100, rmsdThreshold: 0.5, seed: 7 };

const INPUT_CSV = [
  'id,name_or_smiles,class',
  'glc_b,bGlc,mono',
  'lac,bGal(1-4)aGlc,di',
  'man3,aMan(1-3)bMan(1-4)bGlc,tri',
].join('\n');

const LABEL_CSV = [
  'id,atom_ref,nucleus,shift_ppm',
  'glc_b,0:C1,C,96.8',
  'glc_b,0:C1,H,4.64',
  'glc_b,0:C6,C,61.8',
  'glc_b,0:C6,H,3.72',
  'lac,0:C1,C,103.6',
  'lac,1:C4,C,79.0',
  'man3,0:C1,C,103.0',
].join('\n');

describe('nomenclature', () => {
  it('parses condensed names', () => {
    const g = parseGlycanName('bGal(1-4)aGlc');
    expect(g.units).toEqual([
      { sugar: 'Gal', anomer: 'b' },
      { sugar: 'Glc', anomer: 'a' },
    ]);
    expect(g.links).toEqual([{ from: 0, to: 1, position: 4 }]);
  });

  it('rejects malformed names', () => {
    expect(() => parseGlycanName('bXyl')).toThrow(/cannot parse/);
    expect(() => parseGlycanName('bGlc(1-5)bGlc')).toThrow(/link/);
  });
});

describe('structure', () => {
  it('builds a monosaccharide with the canonical atom set', () => {
    const s = structureFromInput('bGlc');
    const names = s.atoms.map((a) => a.name);
    expect(names).toEqual([
      'C1', 'C2', 'C3', 'C4', 'C5', 'O5', 'C6', 'O1', 'O2', 'O3', 'O4', 'O6',
    ]);
    expect(s.atoms.every((a) => a.unit === 0)).toBe(true);
    // 6 ring bonds + C5-C6 + 5 C-O hydroxyl bonds
    expect(s.bonds.length).toBe(12);
  });

  it('forms a glycosidic bridge and drops the replaced hydroxyl', () => {
    const s = structureFromInput('bGal(1-4)aGlc');
    // donor Gal loses O1, acceptor Glc loses its own O4 (bridge O4 replaces it)
    const gal = s.atoms.filter((a) => a.unit === 0).map((a) => a.name);
    expect(gal).not.toContain('O1');
    const bridge = s.atoms.findIndex((a) => a.unit === 1 && a.name === 'O4');
    expect(bridge).toBeGreaterThanOrEqual(0);
    expect(s.atoms[bridge].h).toBe(0);
    const c1 = resolveAtomRef(s, '0:C1');
    const c4 = resolveAtomRef(s, '1:C4');
    const touching = s.bonds.filter((b) => b.i === bridge || b.j === bridge);
    expect(touching.length).toBe(2);
    const partners = touching.map((b) => (b.i === bridge ? b.j : b.i)).sort((a, b) => a - b);
    expect(partners).toEqual([c1, c4].sort((a, b) => a - b));
  });

  it('anomers differ only at the anomeric stereocenter and emit distinct records', () => {
    const alpha = structureFromInput('aGlc');
    const beta = structureFromInput('bGlc');
    // same graph
    expect(alpha.atoms.map((a) => a.name)).toEqual(beta.atoms.map((a) => a.name));
    expect(alpha.bonds).toEqual(beta.bonds);
    // SMILES differ only in the anomeric stereo tag
    expect(SUGARS.Glc.smiles.a).not.toBe(SUGARS.Glc.smiles.b);
    expect(SUGARS.Glc.smiles.a.replace('[C@H](O)', 'X')).toBe(
      SUGARS.Glc.smiles.b.replace('[C@@H](O)', 'X'),
    );
    // geometry differs exactly at O1 (axial vs equatorial)
    const o1 = alpha.atoms.findIndex((a) => a.name === 'O1');
    for (let i = 0; i < alpha.template.length; i++) {
      const same =
        Math.abs(alpha.template[i][0] - beta.template[i][0]) < 1e-12 &&
        Math.abs(alpha.template[i][1] - beta.template[i][1]) < 1e-12 &&
        Math.abs(alpha.template[i][2] - beta.template[i][2]) < 1e-12;
      expect(same).toBe(i !== o1);
    }
  });
});

describe('rmsd', () => {
  it('is zero for rotated copies and positive for distinct shapes', () => {
    const s = structureFromInput('bGlc');
    const a = s.template;
    // rotate 90 degrees about z and translate
    const b = a.map(
      (p) => [-p[1] + 3, p[0] - 1, p[2] + 2] as [number, number, number],
    );
    expect(rmsd(a, b)).toBeLessThan(1e-7);
    const rng = new Rng(1);
    const [c] = sampleConformers(s, 1, rng);
    expect(rmsd(a, c)).toBeGreaterThan(0.01);
  });
});

describe('filtering', () => {
  const structure = structureFromInput('bGal(1-4)aGlc');
  const raw = sampleConformers(structure, SPEC.nGenerate, new Rng(SPEC.seed));
  const scored = scoreConformers(structure, raw);
  const survivors = diversityFilter(scored, SPEC.rmsdThreshold);
  const kept = energyFilter(survivors, SPEC.nKeep);

  it('keeps exactly min(nKeep, survivors) conformers', () => {
    expect(kept.length).toBe(Math.min(SPEC.nKeep, survivors.length));
    expect(kept.length).toBeGreaterThan(0);
  });

  it('kept conformers are pairwise at least the RMSD threshold apart', () => {
    for (let i = 0; i < kept.length; i++) {
      for (let j = i + 1; j < kept.length; j++) {
        expect(rmsd(kept[i].coords, kept[j].coords)).toBeGreaterThanOrEqual(
          SPEC.rmsdThreshold,
        );
      }
    }
  });

  it('max kept energy <= min energy among discarded survivors', () => {
    if (survivors.length > kept.length) {
      const keptSet = new Set(kept);
      const discarded = survivors.filter((c) => !keptSet.has(c));
      const maxKept = Math.max(...kept.map((c) => c.energy));
      const minDiscarded = Math.min(...discarded.map((c) => c.energy));
      expect(maxKept).toBeLessThanOrEqual(minDiscarded);
    }
  });

  it('selectConformers composes both stages', () => {
    expect(selectConformers(scored, SPEC.rmsdThreshold, SPEC.nKeep)).toEqual(kept);
  });
});

describe('pipeline', () => {
  const rows = parseInputCsv(INPUT_CSV);
  const labels = parseLabelCsv(LABEL_CSV);
  const records = prepareAll(rows, labels, SPEC);

  it('emits one record per input with labels resolved to atom indices', () => {
    expect(records.map((r) => r.id)).toEqual(['glc_b', 'lac', 'man3']);
    expect(records.map((r) => r.class)).toEqual(['mono', 'di', 'tri']);
    const glc = records[0];
    expect(glc.labels.length).toBe(4);
    const hLabel = glc.labels.find((l) => l.nucleus === 'H' && l.shift === 3.72)!;
    // C6 carries two protons, so its H assignment is pre-averaged with n_eq=2
    expect(hLabel.n_eq).toBe(2);
    for (const rec of records) {
      expect(rec.conformers.length).toBeGreaterThan(0);
      expect(rec.conformers.length).toBeLessThanOrEqual(SPEC.nKeep);
      for (const conf of rec.conformers) {
        expect(conf.length).toBe(rec.atoms.length);
      }
    }
  });

  it('is deterministic for a fixed seed and changes with the seed', () => {
    const again = prepareAll(rows, labels, SPEC);
    expect(toJsonl(again)).toBe(toJsonl(records));
    const other = prepareAll(rows, labels, { ...SPEC, seed: SPEC.seed + 1 });
    expect(toJsonl(other)).not.toBe(toJsonl(records));
  });

  it('rejects labels for unknown records and unknown atoms', () => {
    expect(() =>
      prepareAll(rows, [{ id: 'nope', atomRef: '0:C1', nucleus: 'C', shiftPpm: 100 }], SPEC),
    ).toThrow(/unknown record/);
    expect(() =>
      prepareAll(rows, [{ id: 'glc_b', atomRef: '0:C9', nucleus: 'C', shiftPpm: 100 }], SPEC),
    ).toThrow(/not found/);
  });

  it('emitted JSONL loads through the downstream dataset reader', () => {
    const dir = mkdtempSync(join(tmpdir(), 'confgen-'));
    const path = join(dir, 'out.jsonl');
    writeFileSync(path, toJsonl(records));
    const script = [
      'import sys, json',
      'from geqshift.molgraph import load_dataset, build_graph',
      'recs = load_dataset(sys.argv[1])',
      'graphs = [build_graph(r, 0, 5.0) for r in recs]',
      'print(json.dumps({r.id: len(r.conformers) for r in recs}))',
    ].join('\n');
    const out = execFileSync('python3', ['-c', script, path], {
      encoding: 'utf-8',
      cwd: join(import.meta.dirname ?? __dirname, '..', '..'),
    });
    const counts = JSON.parse(out.trim());
    for (const rec of records) {
      expect(counts[rec.id]).toBe(rec.conformers.length);
    }
  });
});
