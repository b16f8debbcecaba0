/** Conformer generation: seeded torsion sampling plus small Cartesian jitter.
 *
 * Each rotatable bond [pivot, mover] defines a torsion: every atom on the
 * mover's side of the bond (found by cutting the bond in the molecular
 * graph) is rotated about the pivot->mover axis by a uniform random angle.
 * A small Gaussian jitter then breaks exact symmetry so no two conformers
 * coincide even for rigid structures.
 */

import type { Structure, Vec3 } from './types.js';
import { Rng, normalize, rotateAbout, sub } from './geometry.js';

const JITTER_SIGMA = 0.05; // Angstrom

/** Atoms reachable from `mover` without crossing the pivot-mover bond. */
export function movingSide(structure: Structure, pivot: number, mover: number): number[] {
  const n = structure.atoms.length;
  const adj: number[][] = Array.from({ length: n }, () => []);
  for (const b of structure.bonds) {
    adj[b.i].push(b.j);
    adj[b.j].push(b.i);
  }
  const seen = new Array<boolean>(n).fill(false);
  seen[pivot] = true;
  seen[mover] = true;
  const queue = [mover];
  const side = [mover];
  while (queue.length) {
    const u = queue.shift()!;
    for (const v of adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        queue.push(v);
        side.push(v);
      }
    }
  }
  return side;
}

export function sampleConformers(structure: Structure, count: number, rng: Rng): Vec3[][] {
  const sides = structure.rotatable.map(([p, m]) => movingSide(structure, p, m));
  const out: Vec3[][] = [];
  for (let c = 0; c < count; c++) {
    const coords = structure.template.map((p) => [...p] as Vec3);
    for (let r = 0; r < structure.rotatable.length; r++) {
      const [pivot, mover] = structure.rotatable[r];
      const angle = rng.uniform(-Math.PI, Math.PI);
      const axis = normalize(sub(coords[mover], coords[pivot]));
      for (const atom of sides[r]) {
        if (atom === mover) continue; // on the axis, unchanged
        coords[atom] = rotateAbout(coords[atom], coords[pivot], axis, angle);
      }
    }
    for (let i = 0; i < coords.length; i++) {
      coords[i] = [
        coords[i][0] + JITTER_SIGMA * rng.gauss(),
        coords[i][1] + JITTER_SIGMA * rng.gauss(),
        coords[i][2] + JITTER_SIGMA * rng.gauss(),
      ];
    }
    out.push(coords);
  }
  return out;
}
