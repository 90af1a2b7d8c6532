//! Direct solver for the Newton system.
//!
//! With unknowns ordered by grid row, the Jacobian is block tridiagonal
//! (one block of cosine modes per row) except for the two top rows, whose
//! surface equation reaches one row further down, and for the `λ` column and
//! amplitude row, which are dense. Grouping the two top rows and `λ` into a
//! final block leaves a block-tridiagonal matrix with a dense border, solved
//! by block elimination towards that final block. The kernel direction near
//! the bifurcation only makes the interior operator singular through the
//! surface condition, so it is confined to the bordered final block, which
//! stays regular.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Block-tridiagonal matrix with a dense border.
#[derive(Clone, Debug)]
pub(crate) struct BorderedBlocks {
    /// Size of each interior block.
    k: usize,
    /// Number of interior blocks.
    n: usize,
    /// Size of the final block.
    f: usize,
    diag: Vec<DMatrix<f64>>,
    lower: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
    /// Interior rows against the final block.
    right: Vec<DMatrix<f64>>,
    /// Final rows against interior blocks.
    bottom: Vec<DMatrix<f64>>,
    corner: DMatrix<f64>,
}

impl BorderedBlocks {
    /// `n` interior blocks of size `k` followed by a final block of size `f`.
    pub(crate) fn new(k: usize, n: usize, f: usize) -> Self {
        BorderedBlocks {
            k,
            n,
            f,
            diag: vec![DMatrix::zeros(k, k); n],
            lower: vec![DMatrix::zeros(k, k); n],
            upper: vec![DMatrix::zeros(k, k); n],
            right: vec![DMatrix::zeros(k, f); n],
            bottom: vec![DMatrix::zeros(f, k); n],
            corner: DMatrix::zeros(f, f),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.n * self.k + self.f
    }

    /// Adds `v` at global position `(row, col)`.
    pub(crate) fn add(&mut self, row: usize, col: usize, v: f64) -> Result<()> {
        let split = self.n * self.k;
        let k = self.k;
        let slot = match (row < split, col < split) {
            (true, true) => {
                let (bi, bj) = (row / k, col / k);
                let (r, c) = (row % k, col % k);
                let target = if bi == bj {
                    &mut self.diag[bi]
                } else if bj + 1 == bi {
                    &mut self.lower[bi]
                } else if bi + 1 == bj {
                    &mut self.upper[bi]
                } else {
                    return Err(Error::numerical(format!("entry ({row}, {col}) outside the block pattern")));
                };
                &mut target[(r, c)]
            }
            (true, false) => &mut self.right[row / k][(row % k, col - split)],
            (false, true) => &mut self.bottom[col / k][(row - split, col % k)],
            (false, false) => &mut self.corner[(row - split, col - split)],
        };
        *slot += v;
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn to_dense(&self) -> DMatrix<f64> {
        let (k, n) = (self.k, self.n);
        let split = n * k;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            out.view_mut((i * k, i * k), (k, k)).copy_from(&self.diag[i]);
            if i > 0 {
                out.view_mut((i * k, (i - 1) * k), (k, k)).copy_from(&self.lower[i]);
            }
            if i + 1 < n {
                out.view_mut((i * k, (i + 1) * k), (k, k)).copy_from(&self.upper[i]);
            }
            out.view_mut((i * k, split), (k, self.f)).copy_from(&self.right[i]);
            out.view_mut((split, i * k), (self.f, k)).copy_from(&self.bottom[i]);
        }
        out.view_mut((split, split), (self.f, self.f)).copy_from(&self.corner);
        out
    }

    /// Solves `A x = rhs`.
    pub(crate) fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (k, n, f) = (self.k, self.n, self.f);
        assert_eq!(rhs.len(), self.dim());
        let singular = || Error::numerical("singular Newton matrix");
        let mut g: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut h: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(n);
        let mut corner = self.corner.clone();
        let mut r_final = DVector::from_column_slice(&rhs[n * k..]);

        let mut d = self.diag[0].clone();
        let mut b = self.right[0].clone();
        let mut c = self.bottom[0].clone();
        let mut r = DVector::from_column_slice(&rhs[..k]);
        for i in 0..n {
            let lu = std::mem::replace(&mut d, DMatrix::zeros(0, 0)).lu();
            let gi = if i + 1 < n { lu.solve(&self.upper[i]).ok_or_else(singular)? } else { DMatrix::zeros(k, k) };
            let hi = lu.solve(&b).ok_or_else(singular)?;
            let yi = lu.solve(&r).ok_or_else(singular)?;
            corner -= &c * &hi;
            r_final -= &c * &yi;
            if i + 1 < n {
                let l = &self.lower[i + 1];
                d = &self.diag[i + 1] - l * &gi;
                b = &self.right[i + 1] - l * &hi;
                r = DVector::from_column_slice(&rhs[(i + 1) * k..(i + 2) * k]) - l * &yi;
                c = &self.bottom[i + 1] - &c * &gi;
            }
            g.push(gi);
            h.push(hi);
            y.push(yi);
        }
        let x_final = corner.lu().solve(&r_final).ok_or_else(singular)?;

        let mut x = vec![0.0; self.dim()];
        x[n * k..].copy_from_slice(x_final.as_slice());
        let mut next: Option<DVector<f64>> = None;
        for i in (0..n).rev() {
            let mut xi = &y[i] - &h[i] * &x_final;
            if let Some(xn) = &next {
                xi -= &g[i] * xn;
            }
            x[i * k..(i + 1) * k].copy_from_slice(xi.as_slice());
            next = Some(xi);
        }
        debug_assert_eq!(x.len(), n * k + f);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A diagonally weighted random matrix with the bordered block pattern.
    fn random_system(k: usize, n: usize, f: usize, seed: &[f64]) -> (BorderedBlocks, DMatrix<f64>) {
        let mut a = BorderedBlocks::new(k, n, f);
        let dim = a.dim();
        let mut dense = DMatrix::zeros(dim, dim);
        let mut t = 0usize;
        let mut next = || {
            t += 1;
            seed[t % seed.len()] * ((t * 7919) % 13) as f64 / 13.0
        };
        for row in 0..dim {
            for col in 0..dim {
                let (bi, bj) = (row / k, col / k);
                let interior = row < n * k && col < n * k;
                if interior && bi.abs_diff(bj) > 1 {
                    continue;
                }
                let v = next() + if row == col { (3 * k + f + 1) as f64 } else { 0.0 };
                a.add(row, col, v).unwrap();
                dense[(row, col)] += v;
            }
        }
        (a, dense)
    }

    #[test]
    fn rejects_entries_outside_the_pattern() {
        let mut a = BorderedBlocks::new(2, 3, 1);
        assert!(a.add(0, 5, 1.0).is_err());
        assert!(a.add(0, 6, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn matches_dense_lu(seed in proptest::collection::vec(-1.0f64..1.0, 7..20), k in 1usize..5, n in 1usize..6, f in 1usize..4) {
            let (a, dense) = random_system(k, n, f, &seed);
            let rhs: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = a.solve(&rhs).unwrap();
            let back = &dense * DVector::from_column_slice(&x);
            for i in 0..a.dim() {
                prop_assert!((back[i] - rhs[i]).abs() < 1e-9, "{} vs {}", back[i], rhs[i]);
            }
        }
    }
}
