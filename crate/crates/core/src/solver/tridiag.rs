/// LU factorisation of a tridiagonal matrix (Thomas algorithm, no pivoting).
///
/// `sub[0]` and `sup[n - 1]` are ignored.
#[derive(Debug, Clone)]
pub(crate) struct TridiagonalLu {
    sub: Vec<f64>,
    // modified super-diagonal and inverse pivots
    sup: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalLu {
    pub(crate) fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut c = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let a = if i == 0 { 0.0 } else { sub[i] };
            let pivot = diag[i] - a * prev_c;
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            inv_pivot[i] = 1.0 / pivot;
            c[i] = if i + 1 < n { sup[i] * inv_pivot[i] } else { 0.0 };
            prev_c = c[i];
        }
        Some(Self {
            sub: sub.to_vec(),
            sup: c,
            inv_pivot,
        })
    }

    /// Solves in place.
    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n {
            let a = if i == 0 { 0.0 } else { self.sub[i] };
            let prev = if i == 0 { 0.0 } else { rhs[i - 1] };
            rhs[i] = (rhs[i] - a * prev) * self.inv_pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.sup[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_product() {
        let sub = [0.0, -1.0, 0.5, -2.0, 1.0];
        let diag = [4.0, 5.0, -6.0, 7.0, 3.0];
        let sup = [1.0, 2.0, -1.0, 0.5, 0.0];
        let x = [1.0, -2.0, 3.0, 0.25, -1.5];
        let mut b = [0.0; 5];
        for i in 0..5 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += sub[i] * x[i - 1];
            }
            if i < 4 {
                b[i] += sup[i] * x[i + 1];
            }
        }
        let lu = TridiagonalLu::factor(&sub, &diag, &sup).unwrap();
        lu.solve(&mut b);
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        assert!(TridiagonalLu::factor(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]).is_none());
    }
}
