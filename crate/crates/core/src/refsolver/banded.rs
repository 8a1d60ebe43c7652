//! Banded matrix with row-offset storage and an LU solve with partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` superdiagonals. Each row keeps
/// `2 kl + ku + 1` slots so that row swaps during pivoting have room for the
/// fill-in above the diagonal.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(
            c + self.kl >= r && c <= r + self.kl + self.ku,
            "({r}, {c}) outside band"
        );
        r * self.width + (c + self.kl - r)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.ku + self.kl {
            return 0.0;
        }
        self.data[self.idx(r, c)]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            c + self.kl >= r && c <= r + self.ku,
            "entry ({r}, {c}) is outside the declared band"
        );
        let i = self.idx(r, c);
        self.data[i] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    /// Solves `A x = b` in place, destroying the matrix.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::LinearSolve(format!("singular pivot in column {k}")));
            }
            if piv != k {
                for c in k..=last_col {
                    let a = self.idx(k, c);
                    let p = self.idx(piv, c);
                    self.data.swap(a, p);
                }
                b.swap(k, piv);
            }
            let d = self.get(k, k);
            for r in k + 1..=last_row {
                let l = self.get(r, k) / d;
                if l == 0.0 {
                    continue;
                }
                for c in k..=last_col {
                    let v = self.get(k, c);
                    let i = self.idx(r, c);
                    self.data[i] -= l * v;
                }
                b[r] -= l * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let mut s = b[k];
            for c in k + 1..=last_col {
                s -= self.get(k, c) * b[c];
            }
            b[k] = s / self.get(k, k);
        }
        Ok(())
    }
}
