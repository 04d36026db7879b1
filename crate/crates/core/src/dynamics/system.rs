use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AtomSampling, DerivedParams, SystemParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest state dimension accepted by [`build_system`].
pub const DIMENSION_LIMIT: usize = 1_000_000;

/// Linear mode equations for the common resonator `a`, the mini-resonators
/// `b_m` and the sampled atomic coherences `S_{j,m}`:
///
/// ```text
/// a'       = -(kappa/2 + gamma_c) a - i g sum_m b_m + sqrt(kappa) A_in
/// b_m'     = -(i delta_m + gamma_b) b_m - i g a - i sum_j f_j S_{j,m}
/// S_{j,m}' = -(i delta_{j,m} + gamma_a) S_{j,m} - i f_j b_m
/// ```
///
/// State order is `[a, b_1 .. b_M, S_{1,1} .. S_{N,1}, S_{1,2} .. S_{N,M}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub kappa: f64,
    pub gamma_c: f64,
    pub gamma_b: f64,
    pub gamma_a: f64,
    pub g: f64,
    /// Mini-resonator detunings.
    pub comb: Vec<f64>,
    /// `detunings[m][j]` for node `j` of resonator `m`.
    pub detunings: Vec<Vec<f64>>,
    /// Node coupling `f_j = f sqrt(N_a w_j)`.
    pub node_coupling: Vec<f64>,
}

pub fn build_system(
    p: &SystemParams,
    dp: &DerivedParams,
    sampling: &AtomSampling,
) -> Result<LinearSystem> {
    let m = p.resonators;
    let n = sampling.nodes_per_resonator;
    if sampling.resonators() != m
        || sampling.weights.len() != n
        || sampling.detunings.iter().any(|row| row.len() != n)
    {
        return Err(Error::InvalidParams(format!(
            "atom sampling does not describe {m} resonators with {n} nodes each"
        )));
    }
    let dim = m
        .checked_mul(n)
        .and_then(|x| x.checked_add(1 + m))
        .unwrap_or(usize::MAX);
    if dim > DIMENSION_LIMIT {
        return Err(Error::DimensionOverflow {
            dim,
            limit: DIMENSION_LIMIT,
        });
    }
    let atoms = p.atoms as f64;
    Ok(LinearSystem {
        kappa: p.kappa,
        gamma_c: p.gamma_c,
        gamma_b: p.gamma_b,
        gamma_a: p.gamma_a,
        g: p.g,
        comb: dp.comb_frequencies.clone(),
        detunings: sampling.detunings.clone(),
        node_coupling: sampling
            .weights
            .iter()
            .map(|w| p.f * (atoms * w).sqrt())
            .collect(),
    })
}

impl LinearSystem {
    pub fn resonators(&self) -> usize {
        self.comb.len()
    }

    pub fn nodes(&self) -> usize {
        self.node_coupling.len()
    }

    pub fn dimension(&self) -> usize {
        1 + self.resonators() * (1 + self.nodes())
    }

    pub fn b_index(&self, m: usize) -> usize {
        1 + m
    }

    pub fn s_index(&self, m: usize, j: usize) -> usize {
        1 + self.resonators() + m * self.nodes() + j
    }

    /// Diagonal part of the generator.
    pub fn diagonal(&self) -> Vec<Complex64> {
        let mut d = Vec::with_capacity(self.dimension());
        d.push(Complex64::new(-(0.5 * self.kappa + self.gamma_c), 0.0));
        d.extend(self.comb.iter().map(|&w| Complex64::new(-self.gamma_b, -w)));
        for row in &self.detunings {
            d.extend(row.iter().map(|&w| Complex64::new(-self.gamma_a, -w)));
        }
        d
    }

    /// Writes the off-diagonal couplings applied to `x` into `out`, plus
    /// `drive` on the common-resonator component.
    pub fn apply_coupling(&self, x: &[Complex64], drive: Complex64, out: &mut [Complex64]) {
        let m_count = self.resonators();
        let n = self.nodes();
        let a = x[0];
        let b = &x[1..1 + m_count];
        let s = &x[1 + m_count..1 + m_count + m_count * n];
        let (out_a, rest) = out.split_at_mut(1);
        let (out_b, out_s) = rest.split_at_mut(m_count);

        let b_sum: Complex64 = b.iter().sum();
        out_a[0] = -I * self.g * b_sum + drive;

        let ga = -I * self.g * a;
        for m in 0..m_count {
            let row = &s[m * n..(m + 1) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (sj, fj) in row.iter().zip(&self.node_coupling) {
                acc += sj * fj;
            }
            out_b[m] = ga - I * acc;

            let bm = -I * b[m];
            for (o, fj) in out_s[m * n..(m + 1) * n]
                .iter_mut()
                .zip(&self.node_coupling)
            {
                *o = bm * fj;
            }
        }
    }

    /// `(|a|^2, P_M, P_a)` for a state vector.
    pub fn energies(&self, x: &[Complex64]) -> (f64, f64, f64) {
        let m = self.resonators();
        let field = x[0].norm_sqr();
        let p_m = x[1..1 + m].iter().map(|z| z.norm_sqr()).sum();
        let p_a = x[1 + m..self.dimension()]
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        (field, p_m, p_a)
    }

    /// Dense row-major generator, for small systems.
    pub fn dense_generator(&self) -> Result<Vec<Complex64>> {
        let dim = self.dimension();
        if dim > 4096 {
            return Err(Error::DimensionOverflow { dim, limit: 4096 });
        }
        let mut dense = vec![Complex64::new(0.0, 0.0); dim * dim];
        let diag = self.diagonal();
        let mut unit = vec![Complex64::new(0.0, 0.0); dim];
        let mut column = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..dim {
            unit[k] = Complex64::new(1.0, 0.0);
            self.apply_coupling(&unit, Complex64::new(0.0, 0.0), &mut column);
            for r in 0..dim {
                dense[r * dim + k] = column[r];
            }
            dense[k * dim + k] += diag[k];
            unit[k] = Complex64::new(0.0, 0.0);
        }
        Ok(dense)
    }
}
