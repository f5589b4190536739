//! Dormand–Prince 5(4) with step-size control and the 4th-order dense output.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            max_steps: 2_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Adaptive integrator for y' = f(t, y). Keeps the last accepted step so the
/// solution can be evaluated anywhere inside it.
pub struct Dopri5<F> {
    f: F,
    opts: OdeOptions,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    steps: usize,
    // dense output of the last step on [t_old, t]
    t_old: f64,
    h_last: f64,
    cont: [Vec<f64>; 5],
    k: [Vec<f64>; 6],
    ytmp: Vec<f64>,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Dopri5<F> {
    pub fn new(mut f: F, t0: f64, y0: &[f64], opts: OdeOptions) -> Self {
        let n = y0.len();
        let mut k1 = vec![0.0; n];
        f(t0, y0, &mut k1);
        let zeros = || vec![0.0; n];
        let mut s = Self {
            f,
            opts,
            t: t0,
            y: y0.to_vec(),
            k1,
            h: 0.0,
            steps: 0,
            t_old: t0,
            h_last: 0.0,
            cont: [zeros(), zeros(), zeros(), zeros(), zeros()],
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            ytmp: zeros(),
        };
        s.h = opts.h_init.unwrap_or_else(|| s.initial_step());
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current point (FSAL stage).
    pub fn dy(&self) -> &[f64] {
        &self.k1
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len().max(1) as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..self.y.len() {
            let sc = self.scale(self.y[i], 0.0);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..self.y.len() {
            self.ytmp[i] = self.y[i] + h0 * self.k1[i];
        }
        let t1 = self.t + h0;
        (self.f)(t1, &self.ytmp, &mut self.k[0]);
        let mut d2 = 0.0;
        for i in 0..self.y.len() {
            let sc = self.scale(self.y[i], 0.0);
            d2 += ((self.k[0][i] - self.k1[i]) / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// Takes one accepted step, never passing `t_limit`. Returns the new time.
    pub fn step(&mut self, t_limit: f64) -> Result<f64> {
        let n = self.y.len();
        let mut rejected = false;
        loop {
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(Error::NoConvergence {
                    what: format!("ODE integration (max_steps = {})", self.opts.max_steps),
                    residual: t_limit - self.t,
                });
            }
            let mut h = self.h.min(t_limit - self.t);
            let last = h >= t_limit - self.t;
            if h <= 1e-14 * self.t.abs() || h <= 1e-300 {
                return Err(Error::Stiffness { t: self.t, h });
            }
            let (t, y) = (self.t, &self.y);
            let [k2, k3, k4, k5, k6, k7] = &mut self.k;
            let yt = &mut self.ytmp;
            let k1 = &self.k1;
            for i in 0..n {
                yt[i] = y[i] + h * A21 * k1[i];
            }
            (self.f)(t + C2 * h, yt, k2);
            for i in 0..n {
                yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.f)(t + C3 * h, yt, k3);
            for i in 0..n {
                yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.f)(t + C4 * h, yt, k4);
            for i in 0..n {
                yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.f)(t + C5 * h, yt, k5);
            for i in 0..n {
                yt[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if last { t_limit } else { t + h };
            (self.f)(t_new, yt, k6);
            for i in 0..n {
                yt[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            (self.f)(t_new, yt, k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(yt[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();

            if err <= 1.0 {
                for i in 0..n {
                    let ydiff = yt[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * k7[i] - bspl;
                    self.cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                self.t_old = t;
                self.h_last = t_new - t;
                self.t = t_new;
                std::mem::swap(&mut self.y, &mut self.ytmp);
                std::mem::swap(&mut self.k1, k7);
                let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
                fac = fac.clamp(0.2, 5.0);
                if rejected {
                    fac = fac.min(1.0);
                }
                if !last {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h * fac);
                }
                return Ok(self.t);
            }
            rejected = true;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.1) } else { 0.1 };
            h *= fac;
            self.h = h;
        }
    }

    /// Dense output inside the last accepted step.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        if self.h_last == 0.0 {
            out.copy_from_slice(&self.y);
            return;
        }
        let th = ((t - self.t_old) / self.h_last).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        for i in 0..out.len() {
            let c = &self.cont;
            out[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
    }
}

/// Solution at each of the sorted `outputs` (all ≥ `t0`). Output times equal
/// to `t0` return `y0` unchanged.
pub fn integrate<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    opts: OdeOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.iter().any(|&t| t < t0) {
        return Err(Error::InvalidInput(
            "output times must be sorted and not before t0".into(),
        ));
    }
    let mut res = Vec::with_capacity(outputs.len());
    let Some(&t_end) = outputs.last() else {
        return Ok(res);
    };
    let mut solver = Dopri5::new(f, t0, y0, opts);
    let mut buf = vec![0.0; y0.len()];
    for &t_out in outputs {
        if t_out == t0 {
            res.push(y0.to_vec());
            continue;
        }
        while solver.t() < t_out {
            solver.step(t_end)?;
        }
        if solver.t() == t_out {
            res.push(solver.y().to_vec());
        } else {
            solver.interpolate(t_out, &mut buf);
            res.push(buf.clone());
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let opts = OdeOptions { rtol: 1e-11, atol: 1e-14, ..Default::default() };
        let ts = [0.0, 0.3, 1.0, 2.5];
        let ys = integrate(|_, y, dy| dy[0] = -2.0 * y[0], 0.0, &[1.0], &ts, opts).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - (-2.0 * t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.37).collect();
        let ys = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &ts,
            opts,
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-7, "t={t} {}", y[0]);
        }
    }

    #[test]
    fn t0_output_is_exact() {
        let ys = integrate(|_, _, dy| dy[0] = 1.0, 0.0, &[0.123], &[0.0], OdeOptions::default())
            .unwrap();
        assert_eq!(ys[0][0], 0.123);
    }
}
