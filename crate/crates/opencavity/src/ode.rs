//! Adaptive Dormand–Prince 5(4) integrator for complex linear ODE systems.
//! Used for second-moment evolution and the discretized-bath amplitude
//! equations, where the right-hand side is a cheap matrix-vector product.

use ndarray::Array1;

use crate::{C64, Error, Result};

pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 50_000_000,
        }
    }
}

// Dormand–Prince coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights coincide with the last A row; 4th-order weights below.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Stepper<'a, F> {
    f: &'a mut F,
    opts: &'a OdeOptions,
    k: Vec<Array1<C64>>,
    steps_taken: usize,
}

impl<'a, F> Stepper<'a, F>
where
    F: FnMut(f64, &Array1<C64>) -> Array1<C64>,
{
    fn new(f: &'a mut F, opts: &'a OdeOptions, dim: usize) -> Self {
        Stepper {
            f,
            opts,
            k: vec![Array1::zeros(dim); 7],
            steps_taken: 0,
        }
    }

    /// One accepted adaptive step from (t, y); returns (t_new, y_new, h_next).
    fn step(&mut self, t: f64, y: &Array1<C64>, h_try: f64, t_end: f64) -> Result<(f64, Array1<C64>, f64)> {
        let mut h = h_try.min(t_end - t);
        loop {
            self.steps_taken += 1;
            if self.steps_taken > self.opts.max_steps {
                return Err(Error::StepSize(format!(
                    "adaptive integrator exceeded {} steps",
                    self.opts.max_steps
                )));
            }
            self.k[0] = (self.f)(t, y);
            for s in 1..7 {
                let mut ys = y.clone();
                for (j, kj) in self.k[..s].iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        ys.zip_mut_with(kj, |yi, ki| *yi += ki * (a * h));
                    }
                }
                self.k[s] = (self.f)(t + C[s] * h, &ys);
            }
            // 5th-order solution (FSAL structure: weights = A[6]).
            let mut y5 = y.clone();
            for (j, kj) in self.k[..6].iter().enumerate() {
                let a = A[6][j];
                if a != 0.0 {
                    y5.zip_mut_with(kj, |yi, ki| *yi += ki * (a * h));
                }
            }
            // Embedded 4th-order error estimate; the 5th-order weight of the
            // last stage is 0 (FSAL).
            let mut err_max = 0.0f64;
            for i in 0..y.len() {
                let mut e = C64::new(0.0, 0.0);
                for (j, kj) in self.k.iter().enumerate() {
                    let w5 = if j < 6 { A[6][j] } else { 0.0 };
                    e += kj[i] * ((w5 - B4[j]) * h);
                }
                let scale = self.opts.atol
                    + self.opts.rtol * y[i].norm().max(y5[i].norm());
                err_max = err_max.max(e.norm() / scale);
            }
            if err_max <= 1.0 {
                let factor = if err_max == 0.0 {
                    5.0
                } else {
                    (0.9 * err_max.powf(-0.2)).clamp(0.2, 5.0)
                };
                let h_next = h * factor;
                return Ok((t + h, y5, h_next));
            }
            h *= (0.9 * err_max.powf(-0.2)).clamp(0.1, 0.9);
            if h.abs() < 1e-15 * (1.0 + t.abs()) {
                return Err(Error::StepSize(
                    "adaptive integrator step size underflow".into(),
                ));
            }
        }
    }
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end`, returning the final state.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: Array1<C64>,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Array1<C64>>
where
    F: FnMut(f64, &Array1<C64>) -> Array1<C64>,
{
    let dim = y0.len();
    let mut stepper = Stepper::new(&mut f, opts, dim);
    let mut t = t0;
    let mut y = y0;
    let mut h = (t_end - t0) * 1e-4;
    while t < t_end - 1e-14 * (1.0 + t_end.abs()) {
        let (t_new, y_new, h_next) = stepper.step(t, &y, h, t_end)?;
        t = t_new;
        y = y_new;
        h = h_next;
    }
    Ok(y)
}

/// Integrate and record the state at each requested sample time (must be
/// ascending, all ≥ t0). Steps are clipped to land exactly on sample times.
pub fn integrate_sampled<F>(
    mut f: F,
    t0: f64,
    y0: Array1<C64>,
    samples: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Array1<C64>>>
where
    F: FnMut(f64, &Array1<C64>) -> Array1<C64>,
{
    let dim = y0.len();
    let mut stepper = Stepper::new(&mut f, opts, dim);
    let mut out = Vec::with_capacity(samples.len());
    let mut t = t0;
    let mut y = y0;
    let mut h = samples
        .last()
        .map(|&te| (te - t0) * 1e-4)
        .unwrap_or(1e-4)
        .max(1e-12);
    for &ts in samples {
        if ts < t - 1e-12 {
            return Err(Error::StepSize(
                "sample times must be ascending and ≥ t0".into(),
            ));
        }
        while t < ts - 1e-14 * (1.0 + ts.abs()) {
            let (t_new, y_new, h_next) = stepper.step(t, &y, h, ts)?;
            t = t_new;
            y = y_new;
            h = h_next;
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exponential_decay_is_exact_to_tolerance() {
        let lambda = C64::new(-0.7, 1.3);
        let y = integrate(
            |_t, y: &Array1<C64>| y.mapv(|v| v * lambda),
            0.0,
            array![C64::new(1.0, 0.0)],
            2.5,
            &OdeOptions::default(),
        )
        .unwrap();
        let exact = (lambda * 2.5).exp();
        assert!((y[0] - exact).norm() < 1e-9, "err {}", (y[0] - exact).norm());
    }

    #[test]
    fn sampled_integration_matches_closed_form_along_the_way() {
        let lambda = C64::new(0.0, -2.0);
        let ts: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64).collect();
        let ys = integrate_sampled(
            |_t, y: &Array1<C64>| y.mapv(|v| v * lambda),
            0.0,
            array![C64::new(1.0, 0.0)],
            &ts,
            &OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            let exact = (lambda * *t).exp();
            assert!((y[0] - exact).norm() < 1e-9);
        }
    }

    #[test]
    fn coupled_oscillator_conserves_norm() {
        // y' = -i H y with Hermitian H conserves ‖y‖.
        let h01 = C64::new(0.3, 0.1);
        let f = move |_t: f64, y: &Array1<C64>| {
            array![
                -C64::i() * (C64::new(1.0, 0.0) * y[0] + h01 * y[1]),
                -C64::i() * (h01.conj() * y[0] + C64::new(2.0, 0.0) * y[1]),
            ]
        };
        let y0 = array![C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let y = integrate(f, 0.0, y0, 10.0, &OdeOptions::default()).unwrap();
        let norm: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}
