//! Dense LU factorization with partial pivoting.

/// Row-major square LU factors, `P A = L U`, unit-diagonal `L` stored below
/// the diagonal.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

/// Pivot column whose best candidate was numerically zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular {
    pub column: usize,
}

impl Lu {
    /// Factorizes the row-major `n x n` matrix `a`. A pivot smaller than
    /// `rel_tol` times the largest absolute entry counts as singular.
    pub fn factor(mut a: Vec<f64>, n: usize, rel_tol: f64) -> Result<Self, Singular> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if !(best > rel_tol * scale) {
                return Err(Singular { column: k });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn solve_has_small_residual(n in 1usize..8, vals in prop::collection::vec(-5.0..5.0f64, 72)) {
            // Diagonal dominance keeps the draws well conditioned.
            let mut a: Vec<f64> = vals[..n * n].to_vec();
            for i in 0..n {
                a[i * n + i] += 40.0;
            }
            let b = &vals[64..64 + n];
            let x = Lu::factor(a.clone(), n, 1e-13).unwrap().solve(b);
            for i in 0..n {
                let r: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>() - b[i];
                prop_assert!(r.abs() <= 1e-12);
            }
        }
    }
}
