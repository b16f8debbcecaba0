/** Minimal heavy-atom RMSD after optimal superposition.
 *
 * Uses the quaternion formulation: build the 4x4 key matrix from the
 * cross-covariance of centered coordinates; its largest eigenvalue gives
 * the best-fit residual in closed form. The eigenvalue is found with a
 * cyclic Jacobi sweep, which is plenty for a symmetric 4x4.
 */

import type { Vec3 } from './types.js';

function center(coords: Vec3[]): Vec3[] {
  const c: Vec3 = [0, 0, 0];
  for (const p of coords) {
    c[0] += p[0];
    c[1] += p[1];
    c[2] += p[2];
  }
  const n = coords.length;
  c[0] /= n;
  c[1] /= n;
  c[2] /= n;
  return coords.map((p) => [p[0] - c[0], p[1] - c[1], p[2] - c[2]] as Vec3);
}

/** Largest eigenvalue of a symmetric 4x4 matrix via Jacobi rotations. */
function maxEigen4(m: number[][]): number {
  const a = m.map((row) => row.slice());
  for (let sweep = 0; sweep < 50; sweep++) {
    let off = 0;
    for (let p = 0; p < 4; p++) for (let q = p + 1; q < 4; q++) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;
    for (let p = 0; p < 4; p++) {
      for (let q = p + 1; q < 4; q++) {
        if (Math.abs(a[p][q]) < 1e-15) continue;
        const theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const t = Math.sign(theta || 1) / (Math.abs(theta) + Math.sqrt(theta * theta + 1));
        const c = 1 / Math.sqrt(t * t + 1);
        const s = t * c;
        for (let k = 0; k < 4; k++) {
          const akp = a[k][p];
          const akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (let k = 0; k < 4; k++) {
          const apk = a[p][k];
          const aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  return Math.max(a[0][0], a[1][1], a[2][2], a[3][3]);
}

export function rmsd(aIn: Vec3[], bIn: Vec3[]): number {
  if (aIn.length !== bIn.length) {
    throw new Error(`rmsd: coordinate sets differ in length (${aIn.length} vs ${bIn.length})`);
  }
  const n = aIn.length;
  const a = center(aIn);
  const b = center(bIn);
  let ga = 0;
  let gb = 0;
  const r = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (let k = 0; k < n; k++) {
    ga += a[k][0] ** 2 + a[k][1] ** 2 + a[k][2] ** 2;
    gb += b[k][0] ** 2 + b[k][1] ** 2 + b[k][2] ** 2;
    for (let i = 0; i < 3; i++) for (let j = 0; j < 3; j++) r[i][j] += a[k][i] * b[k][j];
  }
  const [sxx, sxy, sxz] = r[0];
  const [syx, syy, syz] = r[1];
  const [szx, szy, szz] = r[2];
  const key = [
    [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
    [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
    [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
    [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
  ];
  const lambda = maxEigen4(key);
  const sq = Math.max(0, (ga + gb - 2 * lambda) / n);
  return Math.sqrt(sq);
}
