//! Direct solvers: dense LU with partial pivoting and banded LU.

use crate::error::{Error, Result};

/// Dense LU factorisation `PA = LU` of a row-major square matrix.
#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pivot == 0.0 {
                return Err(Error::IllConditioned {
                    residual: f64::INFINITY,
                    limit: 0.0,
                });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let akk = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / akk;
                a[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= l * a[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Row-major dense matrix-vector product.
pub fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// LU without pivoting for a banded matrix with half-bandwidth `bw`.
///
/// Only valid for matrices where elimination without pivoting is stable;
/// here that is `I - P` for a substochastic `P`, which is diagonally dominant.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // row i holds columns i-bw ..= i+bw at offsets 0 ..= 2bw
    band: Vec<f64>,
}

impl BandedLu {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedLu {
            n,
            bw,
            band: vec![0.0; n * (2 * bw + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bw >= i && j <= i + self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.band[k] += v;
    }

    pub fn factor(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        for k in 0..n {
            let akk = self.band[self.at(k, k)];
            if akk.abs() < 1e-300 {
                return Err(Error::IllConditioned {
                    residual: f64::INFINITY,
                    limit: 0.0,
                });
            }
            let jmax = (k + bw).min(n - 1);
            for i in k + 1..=(k + bw).min(n - 1) {
                let ik = self.at(i, k);
                let l = self.band[ik] / akk;
                if l == 0.0 {
                    continue;
                }
                self.band[ik] = l;
                let row_i = i * w + bw - i;
                let row_k = k * w + bw - k;
                for j in k + 1..=jmax {
                    self.band[row_i + j] -= l * self.band[row_k + j];
                }
            }
        }
        Ok(self)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        for i in 0..n {
            let row = i * w + bw - i;
            let lo = i.saturating_sub(bw);
            let s: f64 = self.band[row + lo..row + i].iter().zip(&x[lo..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = i * w + bw - i;
            let hi = (i + bw).min(n - 1) + 1;
            let s: f64 = self.band[row + i + 1..row + hi].iter().zip(&x[i + 1..hi]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.band[row + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solves_with_pivoting() {
        // needs a row swap at the first step
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = DenseLu::new(3, a.clone()).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let back = matvec(3, &a, &x);
        for (b, e) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert!((b - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_dense_rejected() {
        assert!(DenseLu::new(2, vec![1.0, 2.0, 2.0, 4.0]).is_err());
    }

    #[test]
    fn banded_matches_dense_on_tridiagonal() {
        let n = 40;
        let mut dense = vec![0.0; n * n];
        let mut band = BandedLu::zeros(n, 1);
        for i in 0..n {
            dense[i * n + i] = 1.0;
            band.add(i, i, 1.0);
            for j in [i.wrapping_sub(1), i + 1] {
                if j < n {
                    dense[i * n + j] = -0.5;
                    band.add(i, j, -0.5);
                }
            }
        }
        let band = band.factor().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
        let mut x = b.clone();
        band.solve_in_place(&mut x);
        let y = DenseLu::new(n, dense).unwrap().solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-10);
        }
        // gambler's ruin Green function: g(i,i) = 2 (i+1)(n-i)/(n+1)
        let mut e = vec![0.0; n];
        e[5] = 1.0;
        band.solve_in_place(&mut e);
        let expected = 2.0 * 6.0 * (n - 5) as f64 / (n + 1) as f64;
        assert!((e[5] - expected).abs() < 1e-10);
    }
}
