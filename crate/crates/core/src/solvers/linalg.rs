//! Dense symmetric indefinite factorization (Bunch-Kaufman LDLᵀ) and helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SolverError;

const BK_ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

#[derive(Debug, Clone, Copy)]
enum Pivot {
    One,
    Two,
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` and block-diagonal `D`
/// made of 1×1 and 2×2 blocks.
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    perm: Vec<usize>,
    l: DMatrix<f64>,
    d: DMatrix<f64>,
    blocks: Vec<(usize, Pivot)>,
}

/// Numbers of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Ldlt {
    /// Factorizes a symmetric matrix. Pivots smaller than `rel_tol * max|A|`
    /// are reported as singular.
    pub fn factor(a: &DMatrix<f64>, rel_tol: f64) -> Result<Self, SolverError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LDLt needs a square matrix");
        let scale = a.amax().max(f64::MIN_POSITIVE);
        let tiny = rel_tol * scale;
        let mut w = a.clone();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut d = DMatrix::<f64>::zeros(n, n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();

        let mut k = 0;
        while k < n {
            let absakk = w[(k, k)].abs();
            let (imax, colmax) =
                ((k + 1)..n)
                    .map(|i| (i, w[(i, k)].abs()))
                    .fold((k, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });

            if absakk.max(colmax) <= tiny {
                return Err(SolverError::Singular);
            }

            let (kp, step) = if absakk >= BK_ALPHA * colmax {
                (k, Pivot::One)
            } else {
                let rowmax = (k..n).filter(|&j| j != imax).map(|j| w[(imax, j)].abs()).fold(0.0, f64::max);
                if absakk * rowmax >= BK_ALPHA * colmax * colmax {
                    (k, Pivot::One)
                } else if w[(imax, imax)].abs() >= BK_ALPHA * rowmax {
                    (imax, Pivot::One)
                } else {
                    (imax, Pivot::Two)
                }
            };

            let kk = match step {
                Pivot::One => k,
                Pivot::Two => k + 1,
            };
            if kp != kk {
                w.swap_rows(kk, kp);
                w.swap_columns(kk, kp);
                perm.swap(kk, kp);
                for j in 0..k {
                    let tmp = l[(kk, j)];
                    l[(kk, j)] = l[(kp, j)];
                    l[(kp, j)] = tmp;
                }
            }

            match step {
                Pivot::One => {
                    let dkk = w[(k, k)];
                    if dkk.abs() <= tiny {
                        return Err(SolverError::Singular);
                    }
                    d[(k, k)] = dkk;
                    for i in (k + 1)..n {
                        l[(i, k)] = w[(i, k)] / dkk;
                    }
                    for i in (k + 1)..n {
                        for j in (k + 1)..=i {
                            let v = w[(i, j)] - l[(i, k)] * w[(j, k)];
                            w[(i, j)] = v;
                            w[(j, i)] = v;
                        }
                    }
                    blocks.push((k, Pivot::One));
                    k += 1;
                }
                Pivot::Two => {
                    let (a11, a21, a22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                    let det = a11 * a22 - a21 * a21;
                    if det.abs() <= tiny * scale {
                        return Err(SolverError::Singular);
                    }
                    d[(k, k)] = a11;
                    d[(k + 1, k)] = a21;
                    d[(k, k + 1)] = a21;
                    d[(k + 1, k + 1)] = a22;
                    for i in (k + 2)..n {
                        let (wi1, wi2) = (w[(i, k)], w[(i, k + 1)]);
                        l[(i, k)] = (wi1 * a22 - wi2 * a21) / det;
                        l[(i, k + 1)] = (wi2 * a11 - wi1 * a21) / det;
                    }
                    for i in (k + 2)..n {
                        for j in (k + 2)..=i {
                            let v = w[(i, j)] - l[(i, k)] * w[(j, k)] - l[(i, k + 1)] * w[(j, k + 1)];
                            w[(i, j)] = v;
                            w[(j, i)] = v;
                        }
                    }
                    blocks.push((k, Pivot::Two));
                    k += 2;
                }
            }
        }
        Ok(Self { n, perm, l, d, blocks })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut z = DVector::from_iterator(n, self.perm.iter().map(|&p| b[p]));
        // forward: L y = Pb
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.l[(i, j)] * z[j];
            }
            z[i] = s;
        }
        // block diagonal
        for &(k, piv) in &self.blocks {
            match piv {
                Pivot::One => z[k] /= self.d[(k, k)],
                Pivot::Two => {
                    let (a11, a21, a22) = (self.d[(k, k)], self.d[(k + 1, k)], self.d[(k + 1, k + 1)]);
                    let det = a11 * a22 - a21 * a21;
                    let (y1, y2) = (z[k], z[k + 1]);
                    z[k] = (a22 * y1 - a21 * y2) / det;
                    z[k + 1] = (a11 * y2 - a21 * y1) / det;
                }
            }
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in (i + 1)..n {
                s -= self.l[(j, i)] * z[j];
            }
            z[i] = s;
        }
        let mut x = DVector::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// Inertia of the factored matrix (Sylvester's law applied to `D`).
    pub fn inertia(&self) -> Inertia {
        let mut inertia = Inertia { positive: 0, negative: 0, zero: 0 };
        for &(k, piv) in &self.blocks {
            match piv {
                Pivot::One => {
                    if self.d[(k, k)] > 0.0 {
                        inertia.positive += 1;
                    } else {
                        inertia.negative += 1;
                    }
                }
                Pivot::Two => {
                    let (a11, a21, a22) = (self.d[(k, k)], self.d[(k + 1, k)], self.d[(k + 1, k + 1)]);
                    if a11 * a22 - a21 * a21 < 0.0 {
                        inertia.positive += 1;
                        inertia.negative += 1;
                    } else if a11 + a22 > 0.0 {
                        inertia.positive += 2;
                    } else {
                        inertia.negative += 2;
                    }
                }
            }
        }
        inertia
    }
}

/// Orthonormal basis of the null space of `a` (columns), computed by SVD.
pub fn null_space(a: &DMatrix<f64>, n: usize, tol: f64) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to at least n rows so that the SVD yields a full set of right vectors
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let cut = tol * smax.max(1.0);
    let cols: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= cut).collect();
    let mut z = DMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        z.set_column(c, &v_t.row(i).transpose());
    }
    z
}

/// Rank of a matrix by SVD with relative tolerance.
pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = a.clone().singular_values();
    let cut = tol * s.max().max(1.0);
    s.iter().filter(|&&v| v > cut).count()
}

/// Symmetrizes `h` and lifts its spectrum to at least `floor`.
pub fn regularize_spd(h: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

pub fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}
