//! The half-space kernel `K_y(x) = C_{n,s} y^{2s} / (|x|^2 + y^2)^{n/2+s}`
//! and the extension `U = K_y * u` by deterministic adaptive quadrature.
//!
//! All integrals reduce to a radial one,
//!
//! ```text
//! U(x0, y) = integral_0^inf  w(r) Sbar(r) dr,
//! w(r)     = omega_{n-1} C_{n,s} y^{2s} r^{n-1} (r^2 + y^2)^{-(n/2+s)},
//! Sbar(r)  = spherical mean of u over the sphere |x - x0| = r,
//! ```
//!
//! evaluated in three pieces chosen so every panel is well conditioned:
//!
//! - `r in [0, y]` via `r = y tan(theta)`, which resolves the kernel
//!   peak at scale y (the integrand becomes
//!   `omega C sin^{n-1}(theta) cos^{2s-1}(theta) Sbar`);
//! - `r in [y, R]` via `r = y cot(phi)`, the same substitution from the
//!   far side, parameterized so sin(phi) = y/sqrt(r^2+y^2) is computed
//!   without cancellation however large r/y gets;
//! - `r > R` analytically, using the tail metadata of `u`: a plain
//!   envelope bound for decaying data, or two terms of integration by
//!   parts against the kernel profile for cosine data, whose remainder
//!   is bounded by |k'(R)| / freq^2.
//!
//! The truncation radius R is solved from the requested tolerance, and
//! every analytic remainder is folded into the reported error estimate.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_4, PI};

use crate::boundary::{BoundaryFunction, Tail};
use crate::error::{FracError, Result};
use crate::params::{FracParams, HalfSpacePoint};
use crate::quad::{adaptive_segments, QuadResult};
use crate::special::{gamma, kernel_constant};

/// Surface area of the unit sphere in R^n (omega_{n-1} = 2 pi^{n/2} / Gamma(n/2)).
pub(crate) fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(0.5 * n as f64) / gamma(0.5 * n as f64).expect("n >= 1")
}

/// Evaluates the kernel at the given horizontal offset and height.
///
/// Switches to log-domain evaluation when the direct power would
/// overflow or underflow (extreme offsets or heights).
pub fn poisson_kernel(offset: &[f64], y: f64, p: &FracParams) -> Result<f64> {
    if offset.len() != p.n() {
        return Err(FracError::InvalidInput(format!(
            "poisson_kernel: offset has {} coordinates but n = {}",
            offset.len(),
            p.n()
        )));
    }
    if offset.iter().any(|v| !v.is_finite()) {
        return Err(FracError::InvalidInput(
            "poisson_kernel: offset must be finite".into(),
        ));
    }
    if !(y > 0.0) || !y.is_finite() {
        return Err(FracError::InvalidInput(format!(
            "poisson_kernel requires y > 0, got {y}"
        )));
    }
    let s = p.s();
    let a = 0.5 * p.n() as f64 + s;
    let c = kernel_constant(p);
    let d: f64 = offset.iter().map(|v| v * v).sum::<f64>() + y * y;

    // Direct evaluation in the comfortable range, log-domain outside it.
    // The log path rescales by the largest coordinate so |x|^2 + y^2
    // never over/underflows before its logarithm is taken.
    let direct_safe = (1e-100..1e100).contains(&d) && (1e-100..1e100).contains(&y);
    if direct_safe {
        Ok(c * y.powf(2.0 * s) / d.powf(a))
    } else {
        let m = offset
            .iter()
            .fold(y.abs(), |acc, v| acc.max(v.abs()));
        let scaled: f64 =
            offset.iter().map(|v| (v / m) * (v / m)).sum::<f64>() + (y / m) * (y / m);
        let ln_d = 2.0 * m.ln() + scaled.ln();
        Ok((c.ln() + 2.0 * s * y.ln() - a * ln_d).exp())
    }
}

/// Total mass of K_y over R^n by adaptive radial quadrature; the exact
/// answer is 1 for every y, n, s.
pub fn kernel_mass(y: f64, p: &FracParams, tol: f64) -> Result<QuadResult> {
    p.require_low_dim("kernel_mass")?;
    if !(y > 0.0) || !y.is_finite() {
        return Err(FracError::InvalidInput(format!(
            "kernel_mass requires y > 0, got {y}"
        )));
    }
    if !(tol > 0.0) {
        return Err(FracError::InvalidInput("kernel_mass: tol must be > 0".into()));
    }
    let n = p.n();
    let s = p.s();
    let wc = sphere_area(n) * kernel_constant(p);

    // Truncate where the analytic tail bound drops below tol/2.
    let tail_budget = 0.5 * tol;
    let phi_min = phi_for_tail_mass(tail_budget, 1.0, s, wc);
    let tail_bound = tail_mass_bound(phi_min, s, wc);

    let theta_part = adaptive_segments(
        |t: f64| wc * t.sin().powi(n as i32 - 1) * t.cos().powf(2.0 * s - 1.0),
        &[(0.0, FRAC_PI_4)],
        0.25 * tol,
        200_000,
    )?;
    let phi_part = adaptive_segments(
        |f: f64| wc * f.cos().powi(n as i32 - 1) * f.sin().powf(2.0 * s - 1.0),
        &log_breakpoints(phi_min, FRAC_PI_4),
        0.25 * tol,
        400_000,
    )?;

    let mut out = QuadResult::zero();
    out.absorb(&theta_part);
    out.absorb(&phi_part);
    out.add_err(tail_bound);
    Ok(out)
}

/// The extension U(x0, y0) = (K_{y0} * u)(x0), with a posteriori error
/// at most `tol` (quadrature estimate plus analytic tail and angular
/// bounds). At y = 0 the boundary condition gives U = u(x0) exactly.
pub fn extension_quadrature(
    u: &BoundaryFunction,
    at: &HalfSpacePoint,
    p: &FracParams,
    tol: f64,
) -> Result<QuadResult> {
    p.require_low_dim("extension_quadrature")?;
    at.check(p, false, "extension_quadrature")?;
    if !(tol > 0.0) {
        return Err(FracError::InvalidInput(
            "extension_quadrature: tol must be > 0".into(),
        ));
    }
    if at.y() == 0.0 {
        return Ok(QuadResult {
            value: u.eval(at.x()),
            err_estimate: 0.0,
            evaluations: 1,
        });
    }

    let n = p.n();
    let s = p.s();
    let y = at.y();
    let x0 = at.x();
    let c = kernel_constant(p);
    let wc = sphere_area(n) * c;

    // Error budget: half to radial quadrature, the rest split between
    // the analytic tail and (for n >= 2) the angular means.
    let (tol_quad, tol_tail, tol_ang) = if n == 1 {
        (0.5 * tol, 0.5 * tol, 0.0)
    } else {
        (0.5 * tol, 0.3 * tol, 0.2 * tol)
    };

    let mean = AngularMean::new(u, x0, n, tol_ang);

    // Resolve the truncation radius and the analytic tail treatment.
    let tail = plan_tail(u, x0, y, n, s, c, wc, tol_tail)?;

    let mut result = QuadResult::zero();

    // r in [0, y]:  theta parameterization.
    let near = adaptive_segments(
        |t: f64| {
            let r = y * t.tan();
            wc * t.sin().powi(n as i32 - 1) * t.cos().powf(2.0 * s - 1.0) * mean.mean(r)
        },
        &[(0.0, FRAC_PI_4)],
        0.5 * tol_quad,
        200_000,
    )?;
    result.absorb(&near);

    // r in [y, r_mid]: phi parameterization (r = y cot(phi)).
    let phi_lo = (y / tail.r_mid).atan();
    if phi_lo < FRAC_PI_4 {
        let mid = adaptive_segments(
            |f: f64| {
                let r = y * f.cos() / f.sin();
                wc * f.cos().powi(n as i32 - 1) * f.sin().powf(2.0 * s - 1.0) * mean.mean(r)
            },
            &log_breakpoints(phi_lo, FRAC_PI_4),
            0.3 * tol_quad,
            600_000,
        )?;
        result.absorb(&mid);
    }

    // Oscillatory data: finish [r_mid, R] in the radial variable, where
    // the oscillation is uniform and the adaptive rule can track it.
    if tail.radius > tail.r_mid {
        let far = adaptive_segments(
            |r: f64| {
                wc * y.powf(2.0 * s) * r.powi(n as i32 - 1)
                    / (r * r + y * y).powf(0.5 * n as f64 + s)
                    * mean.mean(r)
            },
            &octave_breakpoints(tail.r_mid, tail.radius),
            0.2 * tol_quad,
            600_000,
        )?;
        result.absorb(&far);
    }

    result.value += tail.correction;
    result.add_err(tail.err_bound);
    result.add_err(mean.worst_residual());
    result.evaluations = mean.eval_count();

    if result.err_estimate > tol {
        return Err(FracError::QuadratureNonConvergence {
            requested: tol,
            achieved: result.err_estimate,
            evaluations: result.evaluations,
        });
    }
    Ok(result)
}

/// Analytic tail plan for the radial integral beyond the truncation
/// radius.
struct TailPlan {
    /// Upper end of the phi-parameterized section.
    r_mid: f64,
    /// Truncation radius R.
    radius: f64,
    /// Value of the analytic tail correction added to the integral
    /// (integration-by-parts boundary terms; zero for envelope bounds).
    correction: f64,
    /// Bound on everything beyond R not captured by `correction`.
    err_bound: f64,
}

#[allow(clippy::too_many_arguments)]
fn plan_tail(
    u: &BoundaryFunction,
    x0: &[f64],
    y: f64,
    n: usize,
    s: f64,
    c: f64,
    wc: f64,
    tol_tail: f64,
) -> Result<TailPlan> {
    let bound = u.bound();
    match u.tail() {
        Tail::Oscillatory { amp, freq, phase } if n == 1 => {
            // Two integration-by-parts terms against the kernel profile
            // k(r) = C y^{2s} (r^2+y^2)^{-(1/2+s)}:
            //   int_R^inf k(r) cos(fr + b) dr
            //     = -k(R) sin(fR + b)/f - k'(R) cos(fR + b)/f^2
            //       - (1/f^2) int_R^inf k''(r) cos(fr + b) dr,
            // and k'' >= 0 on r >= y, so the remainder is bounded by
            // |k'(R)|/f^2.
            let f = freq.abs();
            let k = |r: f64| c * y.powf(2.0 * s) * (r * r + y * y).powf(-(0.5 + s));
            let kp = |r: f64| {
                -(1.0 + 2.0 * s) * c * y.powf(2.0 * s) * r * (r * r + y * y).powf(-(1.5 + s))
            };
            // Solve 2 amp |k'(R)| / f^2 <= tol_tail by doubling.
            let mut radius = (2.0 * y).max(4.0 / f).max(4.0);
            while 2.0 * amp * kp(radius).abs() / (f * f) > tol_tail {
                radius *= 2.0;
                if radius > 1e12 {
                    return Err(FracError::ToleranceUnattainable {
                        requested: tol_tail,
                        reason: "oscillatory tail bound stalled".into(),
                    });
                }
            }
            let beta_plus = freq * x0[0] + phase;
            let beta_minus = -(freq * x0[0] + phase);
            let ibp = |beta: f64| {
                -k(radius) * (f * radius + beta).sin() / f
                    - kp(radius) * (f * radius + beta).cos() / (f * f)
            };
            let correction = amp * (ibp(beta_plus) + ibp(beta_minus));
            let err_bound = 2.0 * amp * kp(radius).abs() / (f * f);
            let r_mid = (8.0 * y).max(16.0 / f).min(radius);
            Ok(TailPlan {
                r_mid,
                radius,
                correction,
                err_bound,
            })
        }
        Tail::Oscillatory { amp, freq, .. } => {
            // n >= 2: the spherical mean of a plane-wave cosine decays
            // like (freq r)^{-(n-1)/2}; bound the tail by that envelope
            // times the kernel tail mass.
            let f = freq.abs();
            let env = |r: f64| {
                let t = f * r;
                match n {
                    2 => (2.0 / (PI * t)).sqrt().min(1.0),
                    _ => (1.0 / t).min(1.0),
                }
            };
            let mut radius = (2.0 * y).max(4.0 / f).max(4.0);
            loop {
                let phi = (y / radius).atan();
                let b = amp * env(radius) * tail_mass_bound(phi, s, wc);
                if b <= tol_tail {
                    return Ok(TailPlan {
                        r_mid: (8.0 * y).max(16.0 / f).min(radius),
                        radius,
                        correction: 0.0,
                        err_bound: b,
                    });
                }
                radius *= 2.0;
                if radius > 1e9 {
                    return Err(FracError::ToleranceUnattainable {
                        requested: tol_tail,
                        reason: format!(
                            "oscillatory tail envelope in n = {n} needs radius > 1e9; \
                             loosen tol or use the Monte Carlo route"
                        ),
                    });
                }
            }
        }
        tail => {
            // Decaying or plain bounded data: sup |u| beyond R times the
            // kernel mass beyond R.
            let mut radius = (2.0 * y).max(4.0);
            loop {
                let phi = (y / radius).atan();
                let b = tail.envelope(x0, radius, bound) * tail_mass_bound(phi, s, wc);
                if b <= tol_tail {
                    return Ok(TailPlan {
                        r_mid: radius,
                        radius,
                        correction: 0.0,
                        err_bound: b,
                    });
                }
                if radius > 1e290 {
                    return Err(FracError::ToleranceUnattainable {
                        requested: tol_tail,
                        reason: "bounded-tail truncation radius exceeds f64 range".into(),
                    });
                }
                radius *= 4.0;
            }
        }
    }
}

/// Upper bound for the kernel mass beyond the radius r = y cot(phi),
/// i.e. over phi' in (0, phi): integrand <= wc kappa phi'^{2s-1} with
/// kappa = max(1, (pi/2)^{1-2s}) from sin(phi) >= (2/pi) phi.
fn tail_mass_bound(phi: f64, s: f64, wc: f64) -> f64 {
    let kappa = (PI / 2.0).powf((1.0 - 2.0 * s).max(0.0));
    wc * kappa * phi.powf(2.0 * s) / (2.0 * s)
}

/// Solves tail_mass_bound(phi) * factor <= budget for phi.
fn phi_for_tail_mass(budget: f64, factor: f64, s: f64, wc: f64) -> f64 {
    let kappa = (PI / 2.0).powf((1.0 - 2.0 * s).max(0.0));
    let phi = (budget * 2.0 * s / (factor * wc * kappa)).powf(1.0 / (2.0 * s));
    phi.clamp(1e-290, FRAC_PI_4 * 0.5)
}

/// Geometric breakpoints between a and b (both > 0), ratio ~100, so the
/// initial panels of a many-decade range are already balanced.
fn log_breakpoints(a: f64, b: f64) -> Vec<(f64, f64)> {
    debug_assert!(a > 0.0 && b > a);
    let mut pts = vec![a];
    let mut t = a;
    while t * 100.0 < b {
        t *= 100.0;
        pts.push(t);
    }
    pts.push(b);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Octave breakpoints for the linear far section.
fn octave_breakpoints(a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![a];
    let mut t = a;
    while t * 2.0 < b {
        t *= 2.0;
        pts.push(t);
    }
    pts.push(b);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Spherical averaging of a function of the offset z = r * omega over
/// directions omega, with adaptive angular resolution (exact in n = 1).
/// Shared by the extension (averaging u(x0 + z)) and the singular
/// integral (averaging second differences).
pub(crate) struct SphereAverager {
    n: usize,
    tol: f64,
    freq: Option<f64>,
    evals: Cell<usize>,
    worst: Cell<f64>,
}

impl SphereAverager {
    pub(crate) fn new(n: usize, tol: f64, freq: Option<f64>) -> Self {
        SphereAverager {
            n,
            tol: if tol > 0.0 { tol } else { 1e-13 },
            freq,
            evals: Cell::new(0),
            worst: Cell::new(0.0),
        }
    }

    pub(crate) fn eval_count(&self) -> usize {
        self.evals.get()
    }

    pub(crate) fn worst_residual(&self) -> f64 {
        self.worst.get()
    }

    /// Mean of `g(z)` over |z| = r.
    pub(crate) fn average<G: Fn(&[f64]) -> f64>(&self, r: f64, g: G) -> f64 {
        let count = |k: usize| self.evals.set(self.evals.get() + k);
        match self.n {
            1 => {
                count(2);
                0.5 * (g(&[r]) + g(&[-r]))
            }
            2 => self.average_circle(r, g),
            _ => self.average_sphere(r, g),
        }
    }

    /// Periodic trapezoid with doubling; spectrally accurate for the
    /// smooth data used here. Point counts start above the Nyquist
    /// scale of oscillatory data.
    fn average_circle<G: Fn(&[f64]) -> f64>(&self, r: f64, g: G) -> f64 {
        let m0 = match self.freq {
            Some(f) => 16 + (1.7 * f * r) as usize,
            None => 16,
        };
        let mut m = m0.next_power_of_two().min(1 << 20);
        let mut sum = 0.0;
        for j in 0..m {
            let a = 2.0 * PI * j as f64 / m as f64;
            sum += g(&[r * a.cos(), r * a.sin()]);
        }
        self.evals.set(self.evals.get() + m);
        let mut value = sum / m as f64;
        loop {
            // midpoints of the existing grid
            let mut mid = 0.0;
            for j in 0..m {
                let a = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                mid += g(&[r * a.cos(), r * a.sin()]);
            }
            self.evals.set(self.evals.get() + m);
            let refined = 0.5 * (value + mid / m as f64);
            let resid = (refined - value).abs();
            value = refined;
            m *= 2;
            if resid <= self.tol || m >= (1 << 22) {
                self.worst.set(self.worst.get().max(resid));
                return value;
            }
        }
    }

    /// Gauss–Legendre in the polar cosine times trapezoid in azimuth,
    /// doubled until stable.
    fn average_sphere<G: Fn(&[f64]) -> f64>(&self, r: f64, g: G) -> f64 {
        let mut m = match self.freq {
            Some(f) => (8 + (f * r) as usize).next_power_of_two(),
            None => 8,
        };
        let mut prev: Option<f64> = None;
        loop {
            let glq = gauss_legendre(m);
            let mut total = 0.0;
            for &(mu, wmu) in &glq {
                let rho = (1.0 - mu * mu).sqrt();
                let k = 2 * m;
                let mut ring = 0.0;
                for j in 0..k {
                    let a = 2.0 * PI * j as f64 / k as f64;
                    ring += g(&[r * rho * a.cos(), r * rho * a.sin(), r * mu]);
                }
                self.evals.set(self.evals.get() + k);
                total += wmu * ring / k as f64;
            }
            let value = 0.5 * total;
            if let Some(p) = prev {
                let resid = (value - p).abs();
                if resid <= self.tol || m >= 4096 {
                    self.worst.set(self.worst.get().max(resid));
                    return value;
                }
            }
            prev = Some(value);
            m *= 2;
        }
    }
}

/// Spherical mean of boundary data over |x - x0| = r.
pub(crate) struct AngularMean<'a> {
    u: &'a BoundaryFunction,
    x0: &'a [f64],
    averager: SphereAverager,
}

impl<'a> AngularMean<'a> {
    pub(crate) fn new(u: &'a BoundaryFunction, x0: &'a [f64], n: usize, tol: f64) -> Self {
        let freq = match u.tail() {
            Tail::Oscillatory { freq, .. } => Some(freq.abs()),
            _ => None,
        };
        AngularMean {
            u,
            x0,
            averager: SphereAverager::new(n, tol, freq),
        }
    }

    pub(crate) fn eval_count(&self) -> usize {
        self.averager.eval_count()
    }

    pub(crate) fn worst_residual(&self) -> f64 {
        self.averager.worst_residual()
    }

    pub(crate) fn mean(&self, r: f64) -> f64 {
        self.averager.average(r, |z: &[f64]| {
            let pt: Vec<f64> = self.x0.iter().zip(z).map(|(c, zi)| c + zi).collect();
            self.u.eval(&pt)
        })
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on
/// the Legendre recurrence.
pub(crate) fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, s: f64) -> FracParams {
        FracParams::new(n, s).unwrap()
    }

    fn point(x: &[f64], y: f64) -> HalfSpacePoint {
        HalfSpacePoint::new(x.to_vec(), y).unwrap()
    }

    #[test]
    fn kernel_classical_half_plane() {
        // n = 1, s = 1/2 reduces to (1/pi) y / (x^2 + y^2).
        let p = params(1, 0.5);
        for i in 0..100 {
            let x = -5.0 + 0.1 * i as f64;
            let y = 0.3 + 0.02 * i as f64;
            let got = poisson_kernel(&[x], y, &p).unwrap();
            let want = y / (PI * (x * x + y * y));
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "x={x}, y={y}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn kernel_point_values() {
        let p = params(1, 0.5);
        assert!((poisson_kernel(&[0.0], 1.0, &p).unwrap() - 1.0 / PI).abs() < 1e-14);
        assert!((poisson_kernel(&[1.0], 1.0, &p).unwrap() - 0.5 / PI).abs() < 1e-14);
        // (0, y=2, n=2, s=3/4): C_{2,3/4} 2^{3/2} / 2^{7/2} = C / 4 with C = (3/4)/pi.
        let p = params(2, 0.75);
        let want = 0.75 / PI / 4.0;
        assert!((poisson_kernel(&[0.0, 0.0], 2.0, &p).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn kernel_scaling_law() {
        // K_{ly}(lx) = l^{-n} K_y(x)
        for &(n, s) in &[(1, 0.3), (2, 0.7), (3, 0.5)] {
            let p = params(n, s);
            let x: Vec<f64> = (0..n).map(|i| 0.4 + 0.3 * i as f64).collect();
            for &l in &[0.5, 2.0, 10.0] {
                let lx: Vec<f64> = x.iter().map(|v| v * l).collect();
                let lhs = poisson_kernel(&lx, l * 0.8, &p).unwrap();
                let rhs = l.powi(-(n as i32)) * poisson_kernel(&x, 0.8, &p).unwrap();
                assert!(((lhs - rhs) / rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_log_domain_extremes() {
        let p = params(1, 0.25);
        let v = poisson_kernel(&[1e200], 1.0, &p).unwrap();
        assert!(v > 0.0 && v.is_finite());
        let v2 = poisson_kernel(&[0.0], 1e-180, &p).unwrap();
        assert!(v2.is_finite());
    }

    #[test]
    fn kernel_domain_errors() {
        let p = params(1, 0.5);
        assert!(poisson_kernel(&[0.0], 0.0, &p).is_err());
        assert!(poisson_kernel(&[0.0], -1.0, &p).is_err());
        assert!(poisson_kernel(&[f64::NAN], 1.0, &p).is_err());
        assert!(poisson_kernel(&[0.0, 0.0], 1.0, &p).is_err());
    }

    #[test]
    fn mass_is_one_sample_grid() {
        for &(y, n, s, tol) in &[
            (1.0, 1, 0.5, 1e-8),
            (0.1, 2, 0.3, 1e-6),
            (5.0, 3, 0.9, 1e-4),
            (10.0, 1, 0.1, 1e-6),
        ] {
            let r = kernel_mass(y, &params(n, s), tol).unwrap();
            assert!(
                (r.value - 1.0).abs() <= tol,
                "mass(y={y}, n={n}, s={s}) = {} (err est {})",
                r.value,
                r.err_estimate
            );
            assert!(r.err_estimate <= tol);
        }
    }

    #[test]
    fn mass_rejects_bad_inputs() {
        assert!(kernel_mass(0.0, &params(1, 0.5), 1e-6).is_err());
        assert!(kernel_mass(1.0, &params(4, 0.5), 1e-6).is_err());
        assert!(kernel_mass(1.0, &params(1, 0.5), -1.0).is_err());
    }

    #[test]
    fn extension_of_constants() {
        let p = params(1, 0.3);
        let u = BoundaryFunction::constant(3.0);
        let r = extension_quadrature(&u, &point(&[0.0], 1.0), &p, 1e-8).unwrap();
        assert!((r.value - 3.0).abs() < 1e-8);
    }

    #[test]
    fn extension_classical_cosine() {
        // s = 1/2: U = e^{-y} cos x; at (0, 1) the value is e^{-1}.
        let p = params(1, 0.5);
        let u = BoundaryFunction::cosine(1.0).unwrap();
        let r = extension_quadrature(&u, &point(&[0.0], 1.0), &p, 1e-8).unwrap();
        assert!(
            (r.value - (-1.0_f64).exp()).abs() < 1e-8,
            "got {} (err {})",
            r.value,
            r.err_estimate
        );
    }

    #[test]
    fn extension_cosine_general_s() {
        // Reference values from the closed form cos(x0) phi_s(|xi| y),
        // phi_s(t) = 2^{1-s}/Gamma(s) t^s K_s(t), evaluated in 40-digit
        // arithmetic.
        let cases = [
            (0.25, 0.199_805_021_174_296_679),
            (0.3, 0.236_258_327_797_351_562),
            (0.5, 0.367_879_441_171_442_322),
            (0.7, 0.476_693_663_411_730_877),
            (0.75, 0.500_534_761_845_784_571),
        ];
        let u = BoundaryFunction::cosine(1.0).unwrap();
        for (s, want) in cases {
            let r = extension_quadrature(&u, &point(&[0.0], 1.0), &params(1, s), 1e-9).unwrap();
            assert!(
                (r.value - want).abs() < 1e-9,
                "s={s}: {} vs {want} (err {})",
                r.value,
                r.err_estimate
            );
        }
    }

    #[test]
    fn extension_gaussian_and_rational_oracles() {
        // Kernel-convolution reference values (40-digit quadrature).
        let u = BoundaryFunction::gaussian();
        let cases = [
            (0.0, 0.5, 0.3, 0.466_528_455_185_123_315),
            (0.0, 1.0, 0.5, 0.427_583_576_155_807_004),
            (1.0, 2.0, 0.75, 0.270_909_792_255_221_141),
            (0.0, 0.1, 0.25, 0.709_337_307_074_306_819),
        ];
        for (x0, y, s, want) in cases {
            let r = extension_quadrature(&u, &point(&[x0], y), &params(1, s), 1e-9).unwrap();
            assert!(
                (r.value - want).abs() < 1e-9,
                "gauss ({x0},{y},s={s}): {} vs {want}",
                r.value
            );
        }
        let u = BoundaryFunction::rational();
        // s = 1/2: harmonic extension of 1/(1+x^2) is (1+y)/(x^2+(1+y)^2).
        let r = extension_quadrature(&u, &point(&[0.0], 1.0), &params(1, 0.5), 1e-10).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
        let cases = [
            (0.5, 0.5, 0.25, 0.431_763_785_517_175_692),
            (1.0, 0.2, 0.75, 0.507_807_896_957_820_916),
        ];
        for (x0, y, s, want) in cases {
            let r = extension_quadrature(&u, &point(&[x0], y), &params(1, s), 1e-9).unwrap();
            assert!(
                (r.value - want).abs() < 1e-9,
                "rational ({x0},{y},s={s}): {} vs {want}",
                r.value
            );
        }
    }

    #[test]
    fn extension_boundary_value_and_recovery() {
        let p = params(1, 0.4);
        let u = BoundaryFunction::gaussian();
        // y = 0 returns the boundary data exactly
        let r = extension_quadrature(&u, &point(&[0.3], 0.0), &p, 1e-8).unwrap();
        assert_eq!(r.value, u.eval(&[0.3]));
        // |U(x0, 10^-k) - u(x0)| decreasing in k
        let mut prev = f64::INFINITY;
        for k in 1..=4 {
            let y = 10f64.powi(-k);
            let r = extension_quadrature(&u, &point(&[0.3], y), &p, 1e-10).unwrap();
            let gap = (r.value - u.eval(&[0.3])).abs();
            assert!(gap < prev, "k={k}: gap {gap} vs prev {prev}");
            prev = gap;
        }
    }

    #[test]
    fn extension_translation_equivariance_of_cosine() {
        // U_cos(x0, y) = cos(x0) U_cos(0, y) for every s.
        let u = BoundaryFunction::cosine(1.0).unwrap();
        for &s in &[0.25, 0.6] {
            let p = params(1, s);
            let base = extension_quadrature(&u, &point(&[0.0], 0.7), &p, 1e-10)
                .unwrap()
                .value;
            for &x0 in &[0.5, -1.2, 2.0] {
                let v = extension_quadrature(&u, &point(&[x0], 0.7), &p, 1e-10)
                    .unwrap()
                    .value;
                assert!(
                    (v - x0.cos() * base).abs() < 5e-10,
                    "x0={x0}, s={s}: {v} vs {}",
                    x0.cos() * base
                );
            }
        }
    }

    #[test]
    fn extension_maximum_principle() {
        for u in [
            BoundaryFunction::cosine(2.0).unwrap(),
            BoundaryFunction::gaussian(),
            BoundaryFunction::rational(),
        ] {
            for &s in &[0.25, 0.75] {
                let r =
                    extension_quadrature(&u, &point(&[0.4], 0.9), &params(1, s), 1e-8).unwrap();
                assert!(
                    r.value >= -u.bound() - 1e-8 && r.value <= u.bound() + 1e-8,
                    "{}: {}",
                    u.label(),
                    r.value
                );
            }
        }
    }

    #[test]
    fn extension_2d_gaussian_oracle() {
        // Radially symmetric data: reference value 0.315238086251469892
        // for u = exp(-|x|^2) at (0, y=0.5), s = 0.3.
        let u = BoundaryFunction::gaussian();
        let r = extension_quadrature(
            &u,
            &point(&[0.0, 0.0], 0.5),
            &params(2, 0.3),
            1e-7,
        )
        .unwrap();
        assert!(
            (r.value - 0.315_238_086_251_469_892).abs() < 1e-7,
            "got {}",
            r.value
        );
    }

    #[test]
    fn extension_3d_constant() {
        let u = BoundaryFunction::constant(2.0);
        let r = extension_quadrature(
            &u,
            &point(&[0.0, 0.0, 0.0], 1.5),
            &params(3, 0.6),
            1e-6,
        )
        .unwrap();
        assert!((r.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre(8);
        let sum: f64 = gl.iter().map(|(_, w)| w).sum();
        assert!((sum - 2.0).abs() < 1e-13);
        let int_x6: f64 = gl.iter().map(|(x, w)| w * x.powi(6)).sum();
        assert!((int_x6 - 2.0 / 7.0).abs() < 1e-13);
    }
}
