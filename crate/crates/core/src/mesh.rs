//! Geometrically graded mesh on the fixed domain `[0, 1]`.
//!
//! Spacing shrinks by a constant factor toward `y = 1`, where the moving
//! front sits after the front-fixing transform, and grows toward `y = 0`
//! where the solution is flat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node count and smallest spacing (at `y = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub n_nodes: usize,
    pub dy_min: f64,
}

impl MeshSpec {
    pub fn new(n_nodes: usize, dy_min: f64) -> Result<Self> {
        let spec = Self { n_nodes, dy_min };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 3 {
            return Err(Error::invalid("mesh.n_nodes", "need at least 3 nodes"));
        }
        if !(self.dy_min > 0.0 && self.dy_min.is_finite()) {
            return Err(Error::invalid("mesh.dy_min", "must be positive"));
        }
        Ok(())
    }

    fn intervals(&self) -> usize {
        self.n_nodes - 1
    }
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            n_nodes: 1001,
            dy_min: 1e-6,
        }
    }
}

/// Immutable node set `y_1 = 0 < ... < y_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    // Kept alongside the nodes: differencing nodes near y = 1 loses ~1e-10
    // relative accuracy on the smallest spacings.
    spacings: Vec<f64>,
    ratio: f64,
}

impl Mesh {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Geometric expansion factor: `h_i = ratio * h_{i+1}`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Spacings `h_i = y_{i+1} - y_i`, `N - 1` of them.
    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn dy_min(&self) -> f64 {
        self.spacings[self.spacings.len() - 1]
    }

    pub fn dy_max(&self) -> f64 {
        self.spacings[0]
    }

    /// Uniform mesh with `n_nodes` points.
    pub fn uniform(n_nodes: usize) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::invalid("mesh.n_nodes", "need at least 3 nodes"));
        }
        let last = (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| i as f64 / last).collect();
        nodes[n_nodes - 1] = 1.0;
        let spacings = vec![1.0 / last; n_nodes - 1];
        Ok(Self {
            nodes,
            spacings,
            ratio: 1.0,
        })
    }

    /// Mesh from explicit nodes. Used for tabulated profiles and tests.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::invalid("mesh.nodes", "need at least 3 nodes"));
        }
        if nodes[0] != 0.0 || nodes[nodes.len() - 1] != 1.0 {
            return Err(Error::invalid("mesh.nodes", "must start at 0 and end at 1"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("mesh.nodes", "must be strictly increasing"));
        }
        let spacings: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        let k = spacings.len();
        let ratio = spacings[k - 2] / spacings[k - 1];
        Ok(Self {
            nodes,
            spacings,
            ratio,
        })
    }
}

/// `g(r) = dy_min * (r^n - 1)/(r - 1) - 1` with the `r -> 1` limit taken analytically.
fn closure_defect(r: f64, n: usize, dy_min: f64) -> f64 {
    let n = n as f64;
    let x = r - 1.0;
    let series = if x.abs() < 1e-300 {
        n
    } else {
        (n * x.ln_1p()).exp_m1() / x
    };
    dy_min * series - 1.0
}

/// Expansion factor `r` such that `n - 1` spacings starting from `dy_min`
/// at `y = 1` and growing by `r` toward `y = 0` fill the unit interval.
pub fn solve_expansion_ratio(spec: &MeshSpec) -> Result<f64> {
    spec.validate()?;
    let n = spec.intervals();
    let uniform_defect = n as f64 * spec.dy_min - 1.0;
    if uniform_defect.abs() <= 1e-14 {
        return Ok(1.0);
    }
    if uniform_defect > 0.0 {
        return Err(Error::NoBracket(format!(
            "dy_min = {} >= 1/(N-1) = {}: no expanding mesh fits in [0, 1]",
            spec.dy_min,
            1.0 / n as f64
        )));
    }

    let g = |r: f64| closure_defect(r, n, spec.dy_min);
    let mut lo = 1.0 + 1e-12;
    let mut hi = 2.0;
    if g(lo) > 0.0 {
        return Err(Error::NoBracket("closure defect positive at r = 1+".into()));
    }
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoBracket("could not bracket expansion ratio".into()));
        }
    }
    // Bisect down to adjacent floats.
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi })
}

pub fn build_mesh(spec: &MeshSpec) -> Result<Mesh> {
    let ratio = solve_expansion_ratio(spec)?;
    let n = spec.intervals();

    // h[k] is the spacing between nodes k and k+1; the last one is dy_min.
    let mut h = vec![0.0; n];
    let mut width = spec.dy_min;
    for hk in h.iter_mut().rev() {
        *hk = width;
        width *= ratio;
    }
    let total: f64 = h.iter().rev().sum();
    for hk in h.iter_mut() {
        *hk /= total;
    }

    let mut nodes = vec![0.0; spec.n_nodes];
    nodes[spec.n_nodes - 1] = 1.0;
    for k in (1..n).rev() {
        nodes[k] = nodes[k + 1] - h[k];
    }
    nodes[0] = 0.0;
    Ok(Mesh {
        nodes,
        spacings: h,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisection_oracle(n: usize, dy_min: f64) -> f64 {
        // Direct summation, independent of the closed-form series.
        let g = |r: f64| {
            let mut sum = 0.0;
            let mut h = dy_min;
            for _ in 0..n {
                sum += h;
                h *= r;
            }
            sum - 1.0
        };
        let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn default_mesh_ratio() {
        let r = solve_expansion_ratio(&MeshSpec::new(1001, 1e-6).unwrap()).unwrap();
        assert!((r - 1.009165).abs() < 5e-7, "r = {r}");
        assert!(closure_defect(r, 1000, 1e-6).abs() < 1e-12);
    }

    #[test]
    fn default_mesh_largest_spacing() {
        let mesh = build_mesh(&MeshSpec::default()).unwrap();
        // 1e-6 * r^999; the geometric series forces this to be ~9.083e-3.
        assert!((mesh.dy_max() - 9.083e-3).abs() < 1e-5, "{}", mesh.dy_max());
    }

    #[test]
    fn three_node_closed_form() {
        let spec = MeshSpec::new(3, 0.25).unwrap();
        let r = solve_expansion_ratio(&spec).unwrap();
        assert!((r - 3.0).abs() < 1e-12);
        let mesh = build_mesh(&spec).unwrap();
        let y = mesh.nodes();
        assert_eq!(y[0], 0.0);
        assert!((y[1] - 0.75).abs() < 1e-12);
        assert_eq!(y[2], 1.0);
    }

    #[test]
    fn uniform_limit() {
        let spec = MeshSpec::new(11, 0.1).unwrap();
        assert_eq!(solve_expansion_ratio(&spec).unwrap(), 1.0);
        let mesh = build_mesh(&spec).unwrap();
        for h in mesh.spacings() {
            assert!((h - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn contracting_request_rejected() {
        let spec = MeshSpec::new(11, 0.2).unwrap();
        assert!(matches!(solve_expansion_ratio(&spec), Err(Error::NoBracket(_))));
    }

    #[test]
    fn matches_bisection_oracle() {
        let spec = MeshSpec::new(101, 1e-4).unwrap();
        let r = solve_expansion_ratio(&spec).unwrap();
        let oracle = bisection_oracle(100, 1e-4);
        assert!((r - oracle).abs() < 1e-10, "{r} vs {oracle}");
    }

    #[test]
    fn invalid_specs() {
        assert!(MeshSpec::new(2, 0.1).is_err());
        assert!(MeshSpec::new(10, 0.0).is_err());
        assert!(MeshSpec::new(10, -1.0).is_err());
    }

    #[test]
    fn refinement_shrinks_largest_spacing() {
        let mut prev = f64::INFINITY;
        for n in [101, 201, 401, 801, 1001] {
            let m = build_mesh(&MeshSpec::new(n, 1e-6).unwrap()).unwrap();
            assert!(m.dy_max() < prev);
            prev = m.dy_max();
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn mesh_invariants(n in 3usize..2000, frac in 1e-4f64..0.999) {
                let dy_min = frac / (n - 1) as f64;
                let mesh = build_mesh(&MeshSpec::new(n, dy_min).unwrap()).unwrap();
                let y = mesh.nodes();
                prop_assert_eq!(y[0], 0.0);
                prop_assert_eq!(y[n - 1], 1.0);
                let h = mesh.spacings();
                prop_assert!(h.iter().all(|&v| v > 0.0));
                let total: f64 = h.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!((h[n - 2] - dy_min).abs() <= 1e-12 * dy_min.max(1e-3));
                for w in h.windows(2) {
                    let measured = w[0] / w[1];
                    prop_assert!((measured - mesh.ratio()).abs() <= 1e-10 * mesh.ratio(),
                        "ratio {} vs {}", measured, mesh.ratio());
                }
            }
        }
    }
}
