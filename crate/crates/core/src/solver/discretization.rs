use super::tridiag::TridiagonalLu;
use super::{ProblemConfig, State, StepperParams, DENSITY_BOUNDS};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Three-point stencils on a graded mesh, precomputed once per run.
///
/// Interior node `i` with `h- = y_i - y_{i-1}`, `h+ = y_{i+1} - y_i`:
///
/// ```text
/// u_yy ~ 2 [a u_{i-1} + g u_i + d u_{i+1}]
///        a = 1/(h-(h+ + h-)),  g = -1/(h- h+),  d = 1/(h+(h+ + h-))
/// u_y  ~ -h+/(h-(h+ + h-)) u_{i-1} + (h+ - h-)/(h- h+) u_i + h-/(h+(h+ + h-)) u_{i+1}
/// ```
///
/// The interface gradient is the one-sided second-order backward difference
/// on the last three nodes.
#[derive(Debug, Clone)]
pub struct Discretization {
    y: Vec<f64>,
    dy_min: f64,
    // indexed by node; entries 0 and N-1 are unused
    laplacian: Vec<[f64; 3]>,
    gradient: Vec<[f64; 3]>,
    interface_gradient: [f64; 3],
}

impl Discretization {
    pub fn new(mesh: &Mesh) -> Self {
        let y = mesh.nodes().to_vec();
        let h = mesh.spacings();
        let n = y.len();
        let mut laplacian = vec![[0.0; 3]; n];
        let mut gradient = vec![[0.0; 3]; n];
        for i in 1..n - 1 {
            let (hm, hp) = (h[i - 1], h[i]);
            let sum = hp + hm;
            laplacian[i] = [1.0 / (hm * sum), -1.0 / (hm * hp), 1.0 / (hp * sum)];
            gradient[i] = [-hp / (hm * sum), (hp - hm) / (hm * hp), hm / (hp * sum)];
        }
        let (hm, hp) = (h[n - 3], h[n - 2]);
        let sum = hp + hm;
        let interface_gradient = [
            hp / (hm * sum),
            -sum / (hm * hp),
            (2.0 * hp + hm) / (hp * sum),
        ];
        Self {
            y,
            dy_min: mesh.dy_min(),
            laplacian,
            gradient,
            interface_gradient,
        }
    }

    /// Scales the upper diffusion coefficient `d` at every interior node.
    ///
    /// Only meant for fault-injection checks: any factor other than 1 makes
    /// the scheme inconsistent and breaks discrete heat conservation.
    pub fn with_perturbed_stencil(mut self, factor: f64) -> Self {
        for c in self.laplacian.iter_mut() {
            c[2] *= factor;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.y
    }

    pub fn dy_min(&self) -> f64 {
        self.dy_min
    }

    /// `du/dy` at `y = 1`.
    pub fn interface_gradient(&self, u: &[f64]) -> f64 {
        let n = u.len();
        let c = &self.interface_gradient;
        c[0] * u[n - 3] + c[1] * u[n - 2] + c[2] * u[n - 1]
    }

    pub fn mass(&self, state: &State) -> f64 {
        state.s * super::trapezoid(&self.y, &state.u)
    }

    /// Advances `state` by `dt`. Returns the new state and the number of
    /// Newton iterations used.
    ///
    /// `speed_hint` seeds the interface position as `s + dt * speed_hint`;
    /// without it the iteration starts from the old position.
    pub fn advance(
        &self,
        state: &State,
        cfg: &ProblemConfig,
        dt: f64,
        params: &StepperParams,
        speed_hint: Option<f64>,
    ) -> Result<(State, usize)> {
        let n = self.y.len();
        assert_eq!(state.u.len(), n, "state does not match the mesh");
        let s_old = state.s;
        let t_new = state.t + dt;
        let inv_dt = 1.0 / dt;
        let diffusion = 2.0 / (s_old * s_old);
        let lambda = cfg.lambda;
        // s_new = s_old - (dt kappa / s_old) * du/dy(1)
        let stefan = dt * cfg.kappa / s_old;
        let stefan_row = self.interface_gradient.map(|c| stefan * c);

        let mut u = state.u.clone();
        let mut s = match speed_hint {
            Some(v) if v.is_finite() && s_old + dt * v > 0.0 => s_old + dt * v,
            _ => s_old,
        };

        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut col = vec![0.0; n];

        let mut change = f64::INFINITY;
        for iter in 1..=params.newton_max_iters {
            let speed = (s - s_old) * inv_dt;

            // u_2 - u_1 = 0
            diag[0] = -1.0;
            sup[0] = 1.0;
            rhs[0] = -(u[1] - u[0]);
            col[0] = 0.0;
            for i in 1..n - 1 {
                let [a, g, d] = self.laplacian[i];
                let [ga, gb, gc] = self.gradient[i];
                let advect = self.y[i] / s_old;
                let lap = a * u[i - 1] + g * u[i] + d * u[i + 1];
                let grad = ga * u[i - 1] + gb * u[i] + gc * u[i + 1];
                let ui = u[i];
                let residual = (ui - state.u[i]) * inv_dt
                    - diffusion * lap
                    - advect * speed * grad
                    - lambda * ui * (1.0 - ui);
                sub[i] = -diffusion * a - advect * speed * ga;
                diag[i] = inv_dt - diffusion * g - advect * speed * gb - lambda * (1.0 - 2.0 * ui);
                sup[i] = -diffusion * d - advect * speed * gc;
                rhs[i] = -residual;
                col[i] = -advect * inv_dt * grad;
            }
            // u_N = 0
            sub[n - 1] = 0.0;
            diag[n - 1] = 1.0;
            rhs[n - 1] = -u[n - 1];
            col[n - 1] = 0.0;

            let stefan_residual = s - s_old
                + stefan_row[0] * u[n - 3]
                + stefan_row[1] * u[n - 2]
                + stefan_row[2] * u[n - 1];

            let lu = TridiagonalLu::factor(&sub, &diag, &sup).ok_or(Error::NewtonFailed {
                t: t_new,
                iters: iter,
                change,
            })?;
            lu.solve(&mut rhs);
            lu.solve(&mut col);

            // Border elimination for the interface unknown.
            let dot = |v: &[f64]| {
                stefan_row[0] * v[n - 3] + stefan_row[1] * v[n - 2] + stefan_row[2] * v[n - 1]
            };
            let denom = 1.0 - dot(&col);
            let ds = (-stefan_residual - dot(&rhs)) / denom;

            change = ds.abs();
            for i in 0..n {
                let du = rhs[i] - col[i] * ds;
                u[i] += du;
                change = change.max(du.abs());
            }
            s += ds;

            if !change.is_finite() || !s.is_finite() {
                break;
            }
            if change < params.newton_tol {
                // The boundary rows are linear; impose them exactly.
                u[0] = u[1];
                u[n - 1] = 0.0;
                if let Some(&bad) = u
                    .iter()
                    .find(|&&v| v < DENSITY_BOUNDS.0 || v > DENSITY_BOUNDS.1)
                {
                    return Err(Error::InstabilityDetected {
                        t: t_new,
                        value: bad,
                    });
                }
                return Ok((State { u, s, t: t_new }, iter));
            }
        }
        Err(Error::NewtonFailed {
            t: t_new,
            iters: params.newton_max_iters,
            change,
        })
    }
}

/// One implicit step of size `params.dt`.
pub fn step(
    state: &State,
    mesh: &Mesh,
    cfg: &ProblemConfig,
    params: &StepperParams,
) -> Result<(State, usize)> {
    Discretization::new(mesh).advance(state, cfg, params.dt, params, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec};
    use crate::solver::{make_initial_state, InitialCondition};

    fn cfg(kappa: f64, lambda: f64) -> ProblemConfig {
        ProblemConfig {
            kappa,
            lambda,
            ic: InitialCondition::Step { alpha: 1.0 },
            t_end: 1.0,
            blowup_speed_threshold: 1e4,
        }
    }

    #[test]
    fn stencils_are_exact_for_quadratics() {
        let mesh = build_mesh(&MeshSpec::new(41, 1e-3).unwrap()).unwrap();
        let disc = Discretization::new(&mesh);
        let y = mesh.nodes();
        let f: Vec<f64> = y.iter().map(|&v| 3.0 * v * v - 2.0 * v + 0.5).collect();
        for i in 1..y.len() - 1 {
            let [a, g, d] = disc.laplacian[i];
            let lap = 2.0 * (a * f[i - 1] + g * f[i] + d * f[i + 1]);
            assert!((lap - 6.0).abs() < 1e-6, "lap {lap}");
            let [p, q, r] = disc.gradient[i];
            let grad = p * f[i - 1] + q * f[i] + r * f[i + 1];
            assert!((grad - (6.0 * y[i] - 2.0)).abs() < 1e-8);
        }
        assert!((disc.interface_gradient(&f) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let mesh = build_mesh(&MeshSpec::new(101, 1e-4).unwrap()).unwrap();
        let disc = Discretization::new(&mesh);
        let mut st = State {
            u: vec![0.0; 101],
            s: 1.0,
            t: 0.0,
        };
        let c = cfg(-0.7, 0.0);
        let p = StepperParams::default();
        for _ in 0..20 {
            st = disc.advance(&st, &c, p.dt, &p, None).unwrap().0;
        }
        assert!(st.u.iter().all(|&v| v == 0.0));
        assert_eq!(st.s, 1.0);
    }

    #[test]
    fn boundary_rows_hold_exactly() {
        let mesh = build_mesh(&MeshSpec::new(201, 1e-5).unwrap()).unwrap();
        let st = make_initial_state(&mesh, &InitialCondition::Step { alpha: 1.0 });
        let (next, iters) = step(&st, &mesh, &cfg(-0.5, 1.0), &StepperParams::default()).unwrap();
        assert!(iters >= 2);
        assert_eq!(next.u[0], next.u[1]);
        assert_eq!(next.u[200], 0.0);
        assert!(next.s < 1.0);
    }

    /// Residual of the discrete system written out independently of the
    /// assembled Jacobian.
    fn residual(
        y: &[f64],
        old: &State,
        u: &[f64],
        s: f64,
        c: &ProblemConfig,
        dt: f64,
    ) -> Vec<f64> {
        let n = y.len();
        let mut r = vec![0.0; n + 1];
        r[0] = u[1] - u[0];
        let v = (s - old.s) / dt;
        for i in 1..n - 1 {
            let hm = y[i] - y[i - 1];
            let hp = y[i + 1] - y[i];
            let uyy = 2.0 * (u[i - 1] / (hm * (hp + hm)) - u[i] / (hm * hp) + u[i + 1] / (hp * (hp + hm)));
            let uy = -hp / (hm * (hp + hm)) * u[i - 1]
                + (hp - hm) / (hm * hp) * u[i]
                + hm / (hp * (hp + hm)) * u[i + 1];
            r[i] = (u[i] - old.u[i]) / dt
                - uyy / (old.s * old.s)
                - y[i] / old.s * v * uy
                - c.lambda * u[i] * (1.0 - u[i]);
        }
        r[n - 1] = u[n - 1];
        let hp = y[n - 1] - y[n - 2];
        let hm = y[n - 2] - y[n - 3];
        let grad = hp / (hm * (hp + hm)) * u[n - 3] - (hp + hm) / (hm * hp) * u[n - 2]
            + (2.0 * hp + hm) / (hp * (hp + hm)) * u[n - 1];
        r[n] = s - old.s + dt * c.kappa / old.s * grad;
        r
    }

    #[test]
    fn single_step_matches_dense_newton_oracle() {
        // 5-node uniform mesh, manufactured smooth state.
        let mesh = Mesh::uniform(5).unwrap();
        let y = mesh.nodes().to_vec();
        let old = State {
            u: y.iter().map(|&v| 0.8 * (1.0 - v * v)).collect(),
            s: 1.0,
            t: 0.0,
        };
        let c = cfg(-0.6, 2.0);
        let p = StepperParams {
            dt: 1e-2,
            newton_tol: 1e-13,
            newton_max_iters: 50,
        };
        let (new, _) = step(&old, &mesh, &c, &p).unwrap();

        // Dense Newton with a finite-difference Jacobian on all 6 unknowns.
        let mut x: Vec<f64> = old.u.iter().copied().chain([old.s]).collect();
        for _ in 0..30 {
            let f = residual(&y, &old, &x[..5], x[5], &c, p.dt);
            let m = x.len();
            let mut jac = vec![vec![0.0; m]; m];
            for j in 0..m {
                let eps = 1e-7;
                let mut xp = x.clone();
                xp[j] += eps;
                let mut xm = x.clone();
                xm[j] -= eps;
                let fp = residual(&y, &old, &xp[..5], xp[5], &c, p.dt);
                let fm = residual(&y, &old, &xm[..5], xm[5], &c, p.dt);
                for i in 0..m {
                    jac[i][j] = (fp[i] - fm[i]) / (2.0 * eps);
                }
            }
            // Gaussian elimination with partial pivoting.
            let mut b: Vec<f64> = f.iter().map(|v| -v).collect();
            for k in 0..m {
                let piv = (k..m)
                    .max_by(|&a, &b2| jac[a][k].abs().total_cmp(&jac[b2][k].abs()))
                    .unwrap();
                jac.swap(k, piv);
                b.swap(k, piv);
                let pivot_row = jac[k].clone();
                for i in k + 1..m {
                    let f = jac[i][k] / pivot_row[k];
                    for (dst, src) in jac[i][k..].iter_mut().zip(&pivot_row[k..]) {
                        *dst -= f * src;
                    }
                    b[i] -= f * b[k];
                }
            }
            let mut dx = vec![0.0; m];
            for k in (0..m).rev() {
                let tail: f64 = (k + 1..m).map(|j| jac[k][j] * dx[j]).sum();
                dx[k] = (b[k] - tail) / jac[k][k];
            }
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
        }
        let f = residual(&y, &old, &x[..5], x[5], &c, p.dt);
        assert!(f.iter().all(|v| v.abs() < 1e-10));
        for (i, (got, want)) in new.u.iter().zip(&x[..5]).enumerate() {
            assert!((got - want).abs() < 1e-10, "node {i}: {got} vs {want}");
        }
        assert!((new.s - x[5]).abs() < 1e-10);
    }

    #[test]
    fn newton_failure_is_reported() {
        let mesh = build_mesh(&MeshSpec::new(101, 1e-4).unwrap()).unwrap();
        let st = make_initial_state(&mesh, &InitialCondition::Step { alpha: 1.0 });
        let p = StepperParams {
            dt: 1e-2,
            newton_tol: 1e-30,
            newton_max_iters: 3,
        };
        let err = step(&st, &mesh, &cfg(-0.5, 0.0), &p).unwrap_err();
        assert!(matches!(err, Error::NewtonFailed { .. }));
    }
}
