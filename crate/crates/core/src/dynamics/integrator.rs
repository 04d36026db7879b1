//! Adaptive exponential Runge-Kutta integration of [`LinearSystem`].
//!
//! The diagonal of the generator (cavity decay, comb and atomic detunings) is
//! integrated exactly; the couplings and the drive go through the fourth-order
//! Cox-Matthews scheme. Local error is estimated by step doubling. Three
//! energy accumulators (input, output, dissipated) ride along as extra state
//! components so that the energy audit has the same accuracy as the fields.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::system::LinearSystem;
use crate::error::{Error, Result};
use crate::model::Pulse;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ENERGY_SLOTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the recording grid; defaults to `2 pi / (16 w_max)`.
    pub record_dt: Option<f64>,
    /// Starting state; the system starts at rest when absent.
    pub initial_state: Option<Vec<Complex64>>,
    /// Keep the mini-resonator amplitudes at every recorded sample.
    pub record_modes: bool,
    /// Upper bound on the number of steps per recording interval.
    pub max_substeps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            record_dt: None,
            initial_state: None,
            record_modes: true,
            max_substeps: 1 << 20,
        }
    }
}

/// Recorded time evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub a: Vec<Complex64>,
    /// `b[k][m]` at sample `k`; empty when mode recording is off.
    pub b: Vec<Vec<Complex64>>,
    pub p_m: Vec<f64>,
    pub p_a: Vec<f64>,
    pub a_in: Vec<Complex64>,
    pub a_out: Vec<Complex64>,
    pub e_in: Vec<f64>,
    pub e_out: Vec<f64>,
    pub dissipated: Vec<f64>,
    /// Internal energy of the starting state.
    pub initial_energy: f64,
    pub final_state: Vec<Complex64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `|a|^2 + P_M + P_a` at sample `k`.
    pub fn internal_energy(&self, k: usize) -> f64 {
        self.a[k].norm_sqr() + self.p_m[k] + self.p_a[k]
    }

    /// `E_in - E_out - (internal - internal_0) - dissipated` at every sample.
    pub fn ledger_residuals(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                self.e_in[k]
                    - self.e_out[k]
                    - (self.internal_energy(k) - self.initial_energy)
                    - self.dissipated[k]
            })
            .collect()
    }

    pub fn max_ledger_residual(&self) -> f64 {
        self.ledger_residuals()
            .into_iter()
            .fold(0.0, |acc, r| acc.max(r.abs()))
    }

    /// Fraction of the delivered energy not returned to the waveguide.
    pub fn storage_efficiency(&self) -> f64 {
        let k = self.len() - 1;
        if self.e_in[k] == 0.0 {
            return 0.0;
        }
        1.0 - self.e_out[k] / self.e_in[k]
    }

    pub const CSV_HEADER: &'static str = "t,Re_a,Im_a,P_M,P_a,Re_A_out,Im_A_out,E_in,E_out";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.t[k],
                self.a[k].re,
                self.a[k].im,
                self.p_m[k],
                self.p_a[k],
                self.a_out[k].re,
                self.a_out[k].im,
                self.e_in[k],
                self.e_out[k]
            )?;
        }
        Ok(())
    }
}

/// Largest angular frequency the recording grid must resolve.
pub fn max_frequency(sys: &LinearSystem, drive: Option<&Pulse>) -> f64 {
    let comb = sys.comb.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let pulse = drive.map_or(0.0, |p| p.carrier_offset.abs() + 6.0 / p.duration);
    comb.max(pulse)
        .max(0.5 * sys.kappa + sys.gamma_c)
        .max(f64::MIN_POSITIVE)
}

/// `(e^z, phi_1(z), phi_2(z), phi_3(z))`, by Taylor series near zero.
fn phi_functions(z: Complex64) -> [Complex64; 4] {
    let e = z.exp();
    if z.norm() < 0.5 {
        // phi_k(z) = sum_n z^n / (n + k)!, evaluated by Horner from order 17 down.
        let mut inv_fact = [0.0f64; 21];
        let mut fact = 1.0;
        for (n, c) in inv_fact.iter_mut().enumerate().skip(1) {
            fact *= n as f64;
            *c = 1.0 / fact;
        }
        let mut p = [ZERO; 3];
        for n in (0..18).rev() {
            p[0] = p[0] * z + inv_fact[n + 1];
            p[1] = p[1] * z + inv_fact[n + 2];
            p[2] = p[2] * z + inv_fact[n + 3];
        }
        [e, p[0], p[1], p[2]]
    } else {
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - 0.5 * z * z) / (z * z * z);
        [e, p1, p2, p3]
    }
}

/// ETDRK4 weights for one step size.
struct Coefficients {
    h: f64,
    e: Vec<Complex64>,
    e_half: Vec<Complex64>,
    q: Vec<Complex64>,
    w1: Vec<Complex64>,
    w2: Vec<Complex64>,
    w3: Vec<Complex64>,
}

impl Coefficients {
    fn new(diag: &[Complex64], h: f64) -> Self {
        let n = diag.len();
        let mut c = Coefficients {
            h,
            e: Vec::with_capacity(n),
            e_half: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            w1: Vec::with_capacity(n),
            w2: Vec::with_capacity(n),
            w3: Vec::with_capacity(n),
        };
        let mut memo: HashMap<(u64, u64), [Complex64; 6]> = HashMap::new();
        for &l in diag {
            let key = (l.re.to_bits(), l.im.to_bits());
            let v = *memo.entry(key).or_insert_with(|| {
                let [e, p1, p2, p3] = phi_functions(l * h);
                let [eh, q1, _, _] = phi_functions(l * (0.5 * h));
                [
                    e,
                    eh,
                    q1 * (0.5 * h),
                    (p1 - 3.0 * p2 + 4.0 * p3) * h,
                    (p2 - 2.0 * p3) * (2.0 * h),
                    (4.0 * p3 - p2) * h,
                ]
            });
            c.e.push(v[0]);
            c.e_half.push(v[1]);
            c.q.push(v[2]);
            c.w1.push(v[3]);
            c.w2.push(v[4]);
            c.w3.push(v[5]);
        }
        c
    }
}

struct Rhs<'a> {
    sys: &'a LinearSystem,
    drive: Option<&'a Pulse>,
    sqrt_kappa: f64,
}

impl Rhs<'_> {
    fn eval(&self, t: f64, x: &[Complex64], out: &mut [Complex64]) {
        let dim = self.sys.dimension();
        let a_in = self.drive.map_or(ZERO, |p| p.evaluate(t));
        self.sys
            .apply_coupling(&x[..dim], self.sqrt_kappa * a_in, &mut out[..dim]);
        let (field, p_m, p_a) = self.sys.energies(&x[..dim]);
        let a_out = self.sqrt_kappa * x[0] - a_in;
        out[dim] = Complex64::new(a_in.norm_sqr(), 0.0);
        out[dim + 1] = Complex64::new(a_out.norm_sqr(), 0.0);
        out[dim + 2] = Complex64::new(
            2.0 * (self.sys.gamma_c * field + self.sys.gamma_b * p_m + self.sys.gamma_a * p_a),
            0.0,
        );
    }
}

struct Stepper<'a> {
    rhs: Rhs<'a>,
    diag: Vec<Complex64>,
    cache: HashMap<u64, Coefficients>,
    k: [Vec<Complex64>; 4],
    stage: [Vec<Complex64>; 3],
}

impl<'a> Stepper<'a> {
    fn new(sys: &'a LinearSystem, drive: Option<&'a Pulse>) -> Self {
        let mut diag = sys.diagonal();
        diag.extend([ZERO; ENERGY_SLOTS]);
        let n = diag.len();
        Self {
            rhs: Rhs {
                sys,
                drive,
                sqrt_kappa: sys.kappa.sqrt(),
            },
            diag,
            cache: HashMap::new(),
            k: std::array::from_fn(|_| vec![ZERO; n]),
            stage: std::array::from_fn(|_| vec![ZERO; n]),
        }
    }

    /// Makes the weights for steps `dt / key` and `dt / (2 key)` available.
    fn prepare(&mut self, key: u64, h: f64) {
        let pair = [(key, h), (2 * key, 0.5 * h)];
        let missing = pair
            .iter()
            .filter(|(k, _)| !self.cache.contains_key(k))
            .count();
        if missing > 0 && self.cache.len() + missing > 12 {
            self.cache.clear();
        }
        for (k, step) in pair {
            if !self.cache.contains_key(&k) {
                self.cache.insert(k, Coefficients::new(&self.diag, step));
            }
        }
    }

    fn step(&mut self, key: u64, t: f64, x: &[Complex64], out: &mut [Complex64]) {
        let Stepper {
            rhs,
            cache,
            k,
            stage,
            ..
        } = self;
        let c = &cache[&key];
        let h = c.h;
        let [k0, k1, k2, k3] = k;
        let [sa, sb, sc] = stage;

        rhs.eval(t, x, k0);
        for i in 0..x.len() {
            sa[i] = c.e_half[i] * x[i] + c.q[i] * k0[i];
        }
        rhs.eval(t + 0.5 * h, sa, k1);
        for i in 0..x.len() {
            sb[i] = c.e_half[i] * x[i] + c.q[i] * k1[i];
        }
        rhs.eval(t + 0.5 * h, sb, k2);
        for i in 0..x.len() {
            sc[i] = c.e_half[i] * sa[i] + c.q[i] * (2.0 * k2[i] - k0[i]);
        }
        rhs.eval(t + h, sc, k3);
        for i in 0..x.len() {
            out[i] = c.e[i] * x[i] + c.w1[i] * k0[i] + c.w2[i] * (k1[i] + k2[i]) + c.w3[i] * k3[i];
        }
    }
}

fn max_abs(x: &[Complex64]) -> f64 {
    x.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

fn error_norm(coarse: &[Complex64], fine: &[Complex64], scale: f64) -> f64 {
    let worst = coarse
        .iter()
        .zip(fine)
        .fold(0.0f64, |m, (a, b)| m.max((b - a).norm()));
    worst / scale / 15.0
}

/// Integrates `sys` over `t_span` driven by `drive` (or undriven).
///
/// Steps are whole fractions of the recording interval, so every recorded
/// sample is hit exactly. Within each interval the step count is chosen by
/// step-doubling error control; an interval whose error exceeds the
/// tolerance is redone with more steps.
pub fn integrate(
    sys: &LinearSystem,
    drive: Option<&Pulse>,
    t_span: (f64, f64),
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let (t_start, t_end) = t_span;
    if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidParams(format!(
            "time span must satisfy start < end, got [{t_start}, {t_end}]"
        )));
    }
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::InvalidParams("tolerances must be > 0".into()));
    }
    let dim = sys.dimension();
    if let Some(pulse) = drive {
        pulse.validate()?;
        if opts.initial_state.is_none() && pulse.energy > 0.0 && t_start > pulse.support().0 {
            return Err(Error::Precondition(format!(
                "integration starts at {t_start}, after the pulse onset {}",
                pulse.support().0
            )));
        }
    }
    let resolve = 2.0 * PI / (16.0 * max_frequency(sys, drive));
    let record_dt = match opts.record_dt {
        None => resolve,
        Some(dt) if dt > 0.0 && dt <= resolve * (1.0 + 1e-12) => dt,
        Some(dt) => {
            return Err(Error::InvalidParams(format!(
                "record_dt = {dt} exceeds the resolution limit {resolve}"
            )))
        }
    };
    let span = t_end - t_start;
    let intervals = (span / record_dt - 1e-9).ceil().max(1.0) as usize;
    let dt = span / intervals as f64;

    let mut y = vec![ZERO; dim + ENERGY_SLOTS];
    if let Some(init) = &opts.initial_state {
        if init.len() != dim {
            return Err(Error::InvalidParams(format!(
                "initial state has {} components, system has {dim}",
                init.len()
            )));
        }
        y[..dim].copy_from_slice(init);
    }
    let (f0, pm0, pa0) = sys.energies(&y[..dim]);

    let mut stepper = Stepper::new(sys, drive);
    let sqrt_kappa = sys.kappa.sqrt();
    let mut traj = Trajectory {
        t: Vec::with_capacity(intervals + 1),
        a: Vec::with_capacity(intervals + 1),
        b: Vec::new(),
        p_m: Vec::with_capacity(intervals + 1),
        p_a: Vec::with_capacity(intervals + 1),
        a_in: Vec::with_capacity(intervals + 1),
        a_out: Vec::with_capacity(intervals + 1),
        e_in: Vec::with_capacity(intervals + 1),
        e_out: Vec::with_capacity(intervals + 1),
        dissipated: Vec::with_capacity(intervals + 1),
        initial_energy: f0 + pm0 + pa0,
        final_state: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let record = |traj: &mut Trajectory, t: f64, y: &[Complex64]| {
        let (_, p_m, p_a) = sys.energies(&y[..dim]);
        let a_in = drive.map_or(ZERO, |p| p.evaluate(t));
        traj.t.push(t);
        traj.a.push(y[0]);
        if opts.record_modes {
            traj.b.push(y[1..1 + sys.resonators()].to_vec());
        }
        traj.p_m.push(p_m);
        traj.p_a.push(p_a);
        traj.a_in.push(a_in);
        traj.a_out.push(sqrt_kappa * y[0] - a_in);
        traj.e_in.push(y[dim].re);
        traj.e_out.push(y[dim + 1].re);
        traj.dissipated.push(y[dim + 2].re);
    };
    record(&mut traj, t_start, &y);

    let n_vec = y.len();
    let mut start = vec![ZERO; n_vec];
    let mut coarse = vec![ZERO; n_vec];
    let mut half = vec![ZERO; n_vec];
    let mut fine = vec![ZERO; n_vec];
    let mut substeps: u64 = 1;

    for interval in 0..intervals {
        let t0 = t_start + interval as f64 * dt;
        start.copy_from_slice(&y);
        loop {
            let h = dt / substeps as f64;
            stepper.prepare(substeps, h);
            let mut worst = 0.0f64;
            let mut failed = None;
            y.copy_from_slice(&start);
            for s in 0..substeps {
                let t = t0 + s as f64 * h;
                stepper.step(substeps, t, &y, &mut coarse);
                stepper.step(2 * substeps, t, &y, &mut half);
                stepper.step(2 * substeps, t + 0.5 * h, &half, &mut fine);
                let scale = opts.atol + opts.rtol * max_abs(&y).max(max_abs(&fine));
                let err = error_norm(&coarse, &fine, scale);
                if !err.is_finite() || err > 1.0 {
                    failed = Some((t, err));
                    break;
                }
                worst = worst.max(err);
                y.copy_from_slice(&fine);
            }
            match failed {
                None => {
                    traj.accepted_steps += substeps as usize;
                    let grow = if worst == 0.0 {
                        4.0
                    } else {
                        (0.9 * worst.powf(-0.2)).clamp(0.2, 4.0)
                    };
                    substeps = ((substeps as f64 / grow).ceil() as u64).max(1);
                    break;
                }
                Some((t, err)) => {
                    traj.rejected_steps += 1;
                    let shrink = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 0.9)
                    } else {
                        0.2
                    };
                    let next = ((substeps as f64 / shrink).ceil() as u64).max(substeps + 1);
                    if next as usize > opts.max_substeps
                        || dt / next as f64 <= f64::EPSILON * t.abs().max(1.0)
                    {
                        return Err(Error::StepUnderflow {
                            t,
                            h: dt / next as f64,
                        });
                    }
                    substeps = next;
                }
            }
        }
        let t1 = if interval + 1 == intervals {
            t_end
        } else {
            t0 + dt
        };
        record(&mut traj, t1, &y);
    }
    traj.final_state = y[..dim].to_vec();
    Ok(traj)
}
