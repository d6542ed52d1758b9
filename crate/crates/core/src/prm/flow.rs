use crate::error::{Error, Result};

/// Affine flow `dψ = (Aψ + b) dk`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    /// Row-major ℓ×ℓ matrix.
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

/// Substeps used by the RK4 fallback over one integration horizon.
pub const RK4_SUBSTEPS: usize = 100;

impl FlowSpec {
    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: vec![vec![0.0; dim]; dim],
            offset: vec![0.0; dim],
        }
    }

    /// Constant-rate flow `dψ = b dk`.
    pub fn constant(offset: Vec<f64>) -> Self {
        let dim = offset.len();
        Self {
            matrix: vec![vec![0.0; dim]; dim],
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, a)| i == j || *a == 0.0))
    }

    pub fn derivative(&self, psi: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(psi).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }

    fn check(&self, psi: &[f64], dt: f64) -> Result<()> {
        if self.matrix.len() != self.dim() || self.matrix.iter().any(|r| r.len() != self.dim()) {
            return Err(Error::Definition("flow matrix is not square".into()));
        }
        if psi.len() != self.dim() {
            return Err(Error::Definition(format!(
                "flow has dimension {} but psi has {}",
                self.dim(),
                psi.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Numeric(format!("integration horizon must be positive, got {dt}")));
        }
        if psi.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite psi {psi:?}")));
        }
        Ok(())
    }

    /// Solves the ODE over `dt`, unclamped.
    ///
    /// Diagonal systems use the closed form per component; anything else
    /// falls back to classical RK4 with [`RK4_SUBSTEPS`] substeps.
    pub fn integrate(&self, psi: &[f64], dt: f64) -> Result<Vec<f64>> {
        self.check(psi, dt)?;
        let out = if self.is_diagonal() {
            psi.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let a = self.matrix[i][i];
                    let b = self.offset[i];
                    if a == 0.0 {
                        x + b * dt
                    } else {
                        // x·e^{a dt} + b·(e^{a dt} − 1)/a
                        x * (a * dt).exp() + b * (a * dt).exp_m1() / a
                    }
                })
                .collect()
        } else {
            self.integrate_rk4(psi, dt, RK4_SUBSTEPS)?
        };
        finite(out)
    }

    /// Classical fourth-order Runge-Kutta with `substeps` equal steps.
    pub fn integrate_rk4(&self, psi: &[f64], dt: f64, substeps: usize) -> Result<Vec<f64>> {
        self.check(psi, dt)?;
        let h = dt / substeps.max(1) as f64;
        let n = psi.len();
        let mut x = psi.to_vec();
        let mut tmp = vec![0.0; n];
        for _ in 0..substeps.max(1) {
            let k1 = self.derivative(&x);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            let k2 = self.derivative(&tmp);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            let k3 = self.derivative(&tmp);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            let k4 = self.derivative(&tmp);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        finite(x)
    }
}

fn finite(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("flow produced non-finite psi {v:?}")))
    }
}

/// Integrates `flow` over `dt` and clamps the result componentwise to `bounds`.
pub fn flow_step(flow: &FlowSpec, psi: &[f64], dt: f64, bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
    let mut out = flow.integrate(psi, dt)?;
    if bounds.len() != out.len() {
        return Err(Error::Definition(format!(
            "{} bounds given for {} variables",
            bounds.len(),
            out.len()
        )));
    }
    for (x, (lo, hi)) in out.iter_mut().zip(bounds) {
        *x = x.clamp(*lo, *hi);
    }
    Ok(out)
}
