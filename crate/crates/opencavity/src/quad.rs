//! Adaptive quadrature and principal-value integrals for the level-shift
//! matrix. The integrands are smooth matrix-valued functions of frequency;
//! the Cauchy singularity is removed exactly by pairing symmetric
//! evaluations around it, so no subtraction constants or explicit log terms
//! appear in the numerics.

use ndarray::Array2;

use crate::{C64, Error, Result};

/// Value types the adaptive rule can accumulate.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, factor: f64);
    fn max_abs_diff(&self, other: &Self) -> f64;
    fn scale(&mut self, factor: f64);
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, factor: f64) {
        *self += other * factor;
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn scale(&mut self, factor: f64) {
        *self *= factor;
    }
}

impl QuadValue for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, factor: f64) {
        *self += other * factor;
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn scale(&mut self, factor: f64) {
        *self *= factor;
    }
}

impl QuadValue for Array2<C64> {
    fn zero_like(&self) -> Self {
        Array2::zeros(self.raw_dim())
    }
    fn add_scaled(&mut self, other: &Self, factor: f64) {
        self.zip_mut_with(other, |a, b| *a += b * factor);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm()))
    }
    fn scale(&mut self, factor: f64) {
        self.mapv_inplace(|z| z * factor);
    }
}

fn simpson<T: QuadValue>(fa: &T, fm: &T, fb: &T, h: f64) -> T {
    let mut s = fa.zero_like();
    s.add_scaled(fa, h / 6.0);
    s.add_scaled(fm, 4.0 * h / 6.0);
    s.add_scaled(fb, h / 6.0);
    s
}

struct Adaptive<'a, T, F> {
    f: &'a F,
    max_depth: u32,
    evals: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<'a, T: QuadValue, F: Fn(f64) -> T> Adaptive<'a, T, F> {
    fn recurse(&mut self, a: f64, b: f64, fa: &T, fm: &T, fb: &T, whole: &T, tol: f64, depth: u32) -> Result<T> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        self.evals += 2;
        let left = simpson(fa, &flm, fm, m - a);
        let right = simpson(fm, &frm, fb, b - m);
        let mut refined = left.clone();
        refined.add_scaled(&right, 1.0);
        let err = refined.max_abs_diff(whole) / 15.0;
        if err <= tol || depth >= self.max_depth {
            if depth >= self.max_depth && err > tol {
                return Err(Error::Quadrature(format!(
                    "max refinement depth {} reached on [{a}, {b}] with error {err:.3e} > {tol:.3e}",
                    self.max_depth
                )));
            }
            // Richardson correction of the accepted panel.
            let mut out = refined.clone();
            out.add_scaled(&refined, 1.0 / 15.0);
            out.add_scaled(whole, -1.0 / 15.0);
            return Ok(out);
        }
        let half = tol / 2.0;
        let l = self.recurse(a, m, fa, &flm, fm, &left, half, depth + 1)?;
        let mut r = self.recurse(m, b, fm, &frm, fb, &right, half, depth + 1)?;
        r.add_scaled(&l, 1.0);
        Ok(r)
    }
}

/// Adaptive Simpson quadrature of a smooth function on [a, b] to absolute
/// tolerance `tol`.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<T> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::Quadrature(format!("bad interval [{a}, {b}]")));
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(&fa, &fm, &fb, b - a);
    let mut ad = Adaptive {
        f: &f,
        max_depth,
        evals: 3,
        _marker: std::marker::PhantomData,
    };
    ad.recurse(a, b, &fa, &fm, &fb, &whole, tol, 0)
}

/// Cauchy principal value  P∫_a^b f(x) / (x − x0) dx  for x0 strictly inside
/// (a, b).
///
/// The interval is split at the symmetric window [x0 − d, x0 + d] with
/// d = min(x0 − a, b − x0)/2. On the window the odd part of the kernel is
/// integrated as ∫_0^d [f(x0+u) − f(x0−u)]/u du, which is regular (→ 2f′ as
/// u → 0); outside the window the integrand is smooth and handled directly.
pub fn principal_value<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    x0: f64,
    tol: f64,
    max_depth: u32,
) -> Result<T> {
    if !(x0 > a && x0 < b) {
        return Err(Error::Quadrature(format!(
            "principal value point {x0} must lie strictly inside [{a}, {b}]"
        )));
    }
    let d = (x0 - a).min(b - x0) * 0.5;
    if d <= 0.0 || !d.is_finite() {
        return Err(Error::Quadrature(format!(
            "principal value point {x0} too close to interval edge"
        )));
    }

    // Regularized odd-part integrand on (0, d].
    let span = b - a;
    let center = |u: f64| -> T {
        let u_eff = u.max(1e-7 * span); // below this the difference quotient is pure noise
        let fp = f(x0 + u_eff);
        let fmn = f(x0 - u_eff);
        let mut g = fp.clone();
        g.add_scaled(&fmn, -1.0);
        g.scale(1.0 / u_eff);
        g
    };
    let central = integrate(&center, 0.0, d, tol / 3.0, max_depth)?;

    let kernel = |x: f64| -> T {
        let mut v = f(x);
        v.scale(1.0 / (x - x0));
        v
    };
    let left = integrate(&kernel, a, x0 - d, tol / 3.0, max_depth)?;
    let right = integrate(&kernel, x0 + d, b, tol / 3.0, max_depth)?;

    let mut out = central;
    out.add_scaled(&left, 1.0);
    out.add_scaled(&right, 1.0);
    Ok(out)
}
