//! Dense symmetric indefinite `P A P^T = L D L^T` factorization with
//! Bunch-Kaufman partial pivoting. `D` has 1x1 and 2x2 blocks; the block
//! signs give the inertia the interior-point solver needs.
//!
//! The trailing update skips structurally zero multipliers, which keeps the
//! cost close to that of a sparse factorization on KKT systems of radial
//! networks.

use nalgebra::DMatrix;

/// Growth-bounding constant `(1 + sqrt(17)) / 8`.
const ALPHA: f64 = 0.640_388_203_202_208_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy)]
enum Pivot {
    One(usize),
    Two(usize),
}

#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    /// Row-major working storage; strictly lower part holds `L`, the
    /// diagonal (and first sub-diagonal for 2x2 blocks) holds `D`.
    w: Vec<f64>,
    perm: Vec<usize>,
    pivots: Vec<Pivot>,
    inertia: Inertia,
}

impl Ldlt {
    /// Factors the symmetric matrix `a`. Pivots with magnitude at or below
    /// `zero_tol` are counted as zero eigenvalues.
    pub fn factor(a: &DMatrix<f64>, zero_tol: f64) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                w[i * n + j] = a[(i, j)];
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        let mut inertia = Inertia::default();
        let mut nz: Vec<usize> = Vec::with_capacity(n);
        let mut l1: Vec<f64> = vec![0.0; n];
        let mut l2: Vec<f64> = vec![0.0; n];

        let mut k = 0;
        while k < n {
            let absakk = w[k * n + k].abs();
            let mut imax = k;
            let mut colmax = 0.0;
            for i in k + 1..n {
                let v = w[i * n + k].abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            if absakk.max(colmax) <= zero_tol {
                // Numerically zero column: record a zero pivot and move on.
                inertia.zero += 1;
                for i in k + 1..n {
                    w[i * n + k] = 0.0;
                }
                pivots.push(Pivot::One(k));
                k += 1;
                continue;
            }
            let (kp, kstep) = if absakk >= ALPHA * colmax {
                (k, 1)
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(w[imax * n + j].abs());
                    }
                }
                if absakk * rowmax >= ALPHA * colmax * colmax {
                    (k, 1)
                } else if w[imax * n + imax].abs() >= ALPHA * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };
            let kk = k + kstep - 1;
            if kp != kk {
                swap_sym(&mut w, n, kk, kp);
                perm.swap(kk, kp);
            }

            if kstep == 1 {
                let d = w[k * n + k];
                if d.abs() <= zero_tol {
                    inertia.zero += 1;
                } else if d > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                nz.clear();
                for i in k + 1..n {
                    let v = w[i * n + k];
                    if v != 0.0 {
                        nz.push(i);
                        l1[i] = if d.abs() <= zero_tol { 0.0 } else { v / d };
                    }
                }
                for &i in &nz {
                    let li = l1[i];
                    if li == 0.0 {
                        continue;
                    }
                    let row = i * n;
                    for &j in &nz {
                        // W[j,k] = d * l_j
                        w[row + j] -= li * w[j * n + k];
                    }
                }
                for &i in &nz {
                    w[i * n + k] = l1[i];
                    w[k * n + i] = 0.0;
                }
                pivots.push(Pivot::One(k));
            } else {
                let d11 = w[k * n + k];
                let d21 = w[(k + 1) * n + k];
                let d22 = w[(k + 1) * n + k + 1];
                let det = d11 * d22 - d21 * d21;
                let (ev1, ev2) = eig2(d11, d21, d22);
                for ev in [ev1, ev2] {
                    if ev.abs() <= zero_tol {
                        inertia.zero += 1;
                    } else if ev > 0.0 {
                        inertia.positive += 1;
                    } else {
                        inertia.negative += 1;
                    }
                }
                nz.clear();
                for i in k + 2..n {
                    let a1 = w[i * n + k];
                    let a2 = w[i * n + k + 1];
                    if a1 != 0.0 || a2 != 0.0 {
                        nz.push(i);
                        l1[i] = (a1 * d22 - a2 * d21) / det;
                        l2[i] = (a2 * d11 - a1 * d21) / det;
                    }
                }
                for &i in &nz {
                    let (li1, li2) = (l1[i], l2[i]);
                    let row = i * n;
                    for &j in &nz {
                        w[row + j] -= li1 * w[j * n + k] + li2 * w[j * n + k + 1];
                    }
                }
                for &i in &nz {
                    w[i * n + k] = l1[i];
                    w[i * n + k + 1] = l2[i];
                    w[k * n + i] = 0.0;
                    w[(k + 1) * n + i] = 0.0;
                }
                pivots.push(Pivot::Two(k));
            }
            k += kstep;
        }
        Self {
            n,
            w,
            perm,
            pivots,
            inertia,
        }
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`. Only meaningful when no zero pivots were found.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let w = &self.w;
        let mut z: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // L z = y
        for piv in &self.pivots {
            match *piv {
                Pivot::One(k) => {
                    let zk = z[k];
                    if zk != 0.0 {
                        for i in k + 1..n {
                            z[i] -= w[i * n + k] * zk;
                        }
                    }
                }
                Pivot::Two(k) => {
                    let (z1, z2) = (z[k], z[k + 1]);
                    for i in k + 2..n {
                        z[i] -= w[i * n + k] * z1 + w[i * n + k + 1] * z2;
                    }
                }
            }
        }
        // D
        for piv in &self.pivots {
            match *piv {
                Pivot::One(k) => {
                    let d = w[k * n + k];
                    z[k] = if d != 0.0 { z[k] / d } else { 0.0 };
                }
                Pivot::Two(k) => {
                    let d11 = w[k * n + k];
                    let d21 = w[(k + 1) * n + k];
                    let d22 = w[(k + 1) * n + k + 1];
                    let det = d11 * d22 - d21 * d21;
                    let (b1, b2) = (z[k], z[k + 1]);
                    z[k] = (d22 * b1 - d21 * b2) / det;
                    z[k + 1] = (d11 * b2 - d21 * b1) / det;
                }
            }
        }
        // L^T x = z
        for piv in self.pivots.iter().rev() {
            match *piv {
                Pivot::One(k) => {
                    let mut s = 0.0;
                    for i in k + 1..n {
                        s += w[i * n + k] * z[i];
                    }
                    z[k] -= s;
                }
                Pivot::Two(k) => {
                    let mut s1 = 0.0;
                    let mut s2 = 0.0;
                    for i in k + 2..n {
                        s1 += w[i * n + k] * z[i];
                        s2 += w[i * n + k + 1] * z[i];
                    }
                    z[k] -= s1;
                    z[k + 1] -= s2;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

fn swap_sym(w: &mut [f64], n: usize, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..n {
        w.swap(a * n + j, b * n + j);
    }
    for i in 0..n {
        w.swap(i * n + a, i * n + b);
    }
}

fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (tr + disc, tr - disc)
}
