/** Cheap steric-strain score used only to rank conformers.
 *
 * Harmonic bond terms keep covalent distances honest after torsion moves;
 * a truncated Lennard-Jones term between atom pairs at least three bonds
 * apart penalizes clashes. Absolute values are meaningless; only the
 * ordering matters for the low-energy filter.
 */

import type { Conformer, Structure, Vec3 } from './types.js';
import { distance } from './geometry.js';

const BOND_K = 300.0; // kcal/mol/A^2, generic single-bond stiffness
const LJ_EPS = 0.15;
const LJ_CUTOFF = 6.0;

/** van der Waals radii (A) by atomic number, just C and O here. */
const VDW: Record<number, number> = { 6: 1.7, 8: 1.52 };

function referenceBondLength(zi: number, zj: number): number {
  if (zi === 6 && zj === 6) return 1.53;
  return 1.43; // C-O
}

/** Pairs of atom indices separated by >= 3 bonds (graph distance). */
export function nonbondedPairs(structure: Structure): Array<[number, number]> {
  const n = structure.atoms.length;
  const adj: number[][] = Array.from({ length: n }, () => []);
  for (const b of structure.bonds) {
    adj[b.i].push(b.j);
    adj[b.j].push(b.i);
  }
  const pairs: Array<[number, number]> = [];
  for (let s = 0; s < n; s++) {
    // BFS out to depth 2; anything unreached is >= 3 bonds away
    const dist = new Array<number>(n).fill(-1);
    dist[s] = 0;
    const queue = [s];
    while (queue.length) {
      const u = queue.shift()!;
      if (dist[u] >= 2) continue;
      for (const v of adj[u]) {
        if (dist[v] === -1) {
          dist[v] = dist[u] + 1;
          queue.push(v);
        }
      }
    }
    for (let t = s + 1; t < n; t++) {
      if (dist[t] === -1) pairs.push([s, t]);
    }
  }
  return pairs;
}

export function energyOf(
  structure: Structure,
  coords: Vec3[],
  pairs?: Array<[number, number]>,
): number {
  let e = 0;
  for (const b of structure.bonds) {
    const r0 = referenceBondLength(structure.atoms[b.i].z, structure.atoms[b.j].z);
    const d = distance(coords[b.i], coords[b.j]) - r0;
    e += BOND_K * d * d;
  }
  const nb = pairs ?? nonbondedPairs(structure);
  for (const [i, j] of nb) {
    const r = distance(coords[i], coords[j]);
    if (r > LJ_CUTOFF) continue;
    const sigma = (VDW[structure.atoms[i].z] + VDW[structure.atoms[j].z]) / 2;
    const sr6 = Math.pow(sigma / Math.max(r, 0.5), 6);
    e += 4 * LJ_EPS * (sr6 * sr6 - sr6);
  }
  return e;
}

export function scoreConformers(structure: Structure, coordSets: Vec3[][]): Conformer[] {
  const pairs = nonbondedPairs(structure);
  return coordSets.map((coords) => ({ coords, energy: energyOf(structure, coords, pairs) }));
}
