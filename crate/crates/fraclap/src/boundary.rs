//! Boundary data: bounded C^2 functions on R^n with the metadata the
//! quadrature engines need to stay both fast and honest.
//!
//! Beyond the evaluation closure and the global bound, an entry may
//! carry:
//!
//! - a *stable second difference* `2u(x0) - u(x0+z) - u(x0-z)` in a form
//!   free of subtractive cancellation (the naive difference loses all
//!   accuracy for |z| below ~1e-8, which caps the attainable tolerance
//!   of the singular integral);
//! - a global Hessian bound, used for inner-ball Taylor estimates;
//! - a tail profile describing how |u| decays (or oscillates) far out,
//!   which fixes truncation radii and analytic tail bounds;
//! - closed-form extension / fractional-Laplacian oracles when known,
//!   used only by tests and reports, never by the solvers themselves.

use std::fmt;
use std::sync::Arc;

use crate::error::{FracError, Result};
use crate::params::FracParams;

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type SecondDiffFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type ExtensionOracleFn = dyn Fn(&[f64], f64, &FracParams) -> Option<f64> + Send + Sync;
type FracLapOracleFn = dyn Fn(&[f64], &FracParams) -> Option<f64> + Send + Sync;

/// Far-field profile of a boundary function.
#[derive(Debug, Clone)]
pub enum Tail {
    /// No structure beyond |u| <= bound.
    Bounded,
    /// |u(x)| <= amp * exp(-rate * |x - center|^2).
    GaussianDecay {
        amp: f64,
        rate: f64,
        center: Vec<f64>,
    },
    /// |u(x)| <= amp / (1 + scale^2 |x - center|^2).
    QuadraticDecay {
        amp: f64,
        scale: f64,
        center: Vec<f64>,
    },
    /// u(x) = amp * cos(freq * x_1 + phase) exactly (n = 1 tail
    /// integration uses integration by parts against the kernel).
    Oscillatory { amp: f64, freq: f64, phase: f64 },
}

impl Tail {
    /// Upper bound for sup |u(x)| over |x - x0| >= r.
    pub(crate) fn envelope(&self, x0: &[f64], r: f64, bound: f64) -> f64 {
        match self {
            Tail::Bounded | Tail::Oscillatory { .. } => bound,
            Tail::GaussianDecay { amp, rate, center } => {
                let gap = (r - dist(x0, center)).max(0.0);
                (amp * (-rate * gap * gap).exp()).min(bound)
            }
            Tail::QuadraticDecay { amp, scale, center } => {
                let gap = (r - dist(x0, center)).max(0.0);
                (amp / (1.0 + scale * scale * gap * gap)).min(bound)
            }
        }
    }
}

/// Euclidean distance; the shorter vector is zero-padded, so an empty
/// center means the origin.
fn dist(a: &[f64], b: &[f64]) -> f64 {
    (0..a.len().max(b.len()))
        .map(|i| {
            let d = a.get(i).unwrap_or(&0.0) - b.get(i).unwrap_or(&0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// A bounded boundary function together with its numerical metadata.
/// C^2 smoothness is assumed per entry, not checked.
#[derive(Clone)]
pub struct BoundaryFunction {
    label: String,
    bound: f64,
    eval: Arc<EvalFn>,
    second_diff: Option<Arc<SecondDiffFn>>,
    /// Global bound on the spectral norm of the Hessian, if known.
    curvature: Option<f64>,
    tail: Tail,
    extension_oracle: Option<Arc<ExtensionOracleFn>>,
    frac_lap_oracle: Option<Arc<FracLapOracleFn>>,
}

impl fmt::Debug for BoundaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryFunction")
            .field("label", &self.label)
            .field("bound", &self.bound)
            .field("tail", &self.tail)
            .field("curvature", &self.curvature)
            .finish()
    }
}

impl BoundaryFunction {
    /// Wraps an arbitrary bounded closure. Only the generic machinery
    /// (bounded tail, finite-difference second differences) will be
    /// available, which limits attainable tolerances.
    pub fn from_fn<F>(label: &str, bound: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(FracError::InvalidInput(format!(
                "boundary function bound must be positive and finite, got {bound}"
            )));
        }
        Ok(Self {
            label: label.to_string(),
            bound,
            eval: Arc::new(f),
            second_diff: None,
            curvature: None,
            tail: Tail::Bounded,
            extension_oracle: None,
            frac_lap_oracle: None,
        })
    }

    /// u = c. Bound is |c| (or 1 when c = 0, any positive bound works).
    pub fn constant(c: f64) -> Self {
        let bound = if c == 0.0 { 1.0 } else { c.abs() };
        Self {
            label: format!("const:c={c}"),
            bound,
            eval: Arc::new(move |_| c),
            second_diff: Some(Arc::new(|_, _| 0.0)),
            curvature: Some(0.0),
            tail: Tail::Bounded,
            extension_oracle: Some(Arc::new(move |_, _, _| Some(c))),
            frac_lap_oracle: Some(Arc::new(|_, _| Some(0.0))),
        }
    }

    /// u(x) = cos(xi * x_1). Fourier symbol gives the closed-form
    /// fractional Laplacian |xi|^{2s} cos(xi x_1) in every dimension;
    /// the closed-form extension is known for s = 1/2 (classical
    /// harmonic extension e^{-|xi| y} cos(xi x_1)).
    pub fn cosine(xi: f64) -> Result<Self> {
        if !xi.is_finite() || xi == 0.0 {
            return Err(FracError::InvalidInput(format!(
                "cosine frequency must be finite and nonzero, got {xi}"
            )));
        }
        Ok(Self {
            label: format!("cos:xi={xi}"),
            bound: 1.0,
            eval: Arc::new(move |x: &[f64]| (xi * x[0]).cos()),
            // 2cos(c) - cos(c+t) - cos(c-t) = 4 cos(c) sin^2(t/2), exact.
            second_diff: Some(Arc::new(move |x0: &[f64], z: &[f64]| {
                let half = 0.5 * xi * z[0];
                4.0 * (xi * x0[0]).cos() * half.sin() * half.sin()
            })),
            curvature: Some(xi * xi),
            tail: Tail::Oscillatory {
                amp: 1.0,
                freq: xi,
                phase: 0.0,
            },
            extension_oracle: Some(Arc::new(move |x: &[f64], y: f64, p: &FracParams| {
                if (p.s() - 0.5).abs() < 1e-15 {
                    Some((-xi.abs() * y).exp() * (xi * x[0]).cos())
                } else {
                    None
                }
            })),
            frac_lap_oracle: Some(Arc::new(move |x: &[f64], p: &FracParams| {
                Some(xi.abs().powf(2.0 * p.s()) * (xi * x[0]).cos())
            })),
        })
    }

    /// u(x) = exp(-|x|^2).
    pub fn gaussian() -> Self {
        Self {
            label: "gauss".to_string(),
            bound: 1.0,
            eval: Arc::new(|x: &[f64]| (-sq_norm(x)).exp()),
            // With a = |z|^2 and w = 2<x0, z>:
            //   2u(x0) - u(x0+z) - u(x0-z)
            //     = 2 e^{-|x0|^2} (1 - e^{-a} cosh w)
            //     = 2 e^{-|x0|^2} (-expm1(-a) cosh w - 2 sinh^2(w/2)),
            // every factor evaluated with full relative accuracy at
            // small |z|.
            second_diff: Some(Arc::new(|x0: &[f64], z: &[f64]| {
                let a = sq_norm(z);
                let w = 2.0 * dot(x0, z);
                if a > 1.0 || w.abs() > 1.0 {
                    // No cancellation out here, but cosh(w) would
                    // overflow; w - a <= |x0|^2 keeps these exponents
                    // tame.
                    let c = 0.5 * ((w - a).exp() + (-w - a).exp());
                    2.0 * (-sq_norm(x0)).exp() * (1.0 - c)
                } else {
                    let sh = (0.5 * w).sinh();
                    2.0 * (-sq_norm(x0)).exp() * (-(-a).exp_m1() * w.cosh() - 2.0 * sh * sh)
                }
            })),
            curvature: Some(2.0),
            tail: Tail::GaussianDecay {
                amp: 1.0,
                rate: 1.0,
                center: Vec::new(),
            },
            extension_oracle: None,
            frac_lap_oracle: None,
        }
    }

    /// u(x) = 1 / (1 + |x|^2).
    pub fn rational() -> Self {
        Self {
            label: "rational".to_string(),
            bound: 1.0,
            eval: Arc::new(|x: &[f64]| 1.0 / (1.0 + sq_norm(x))),
            // With p = 1 + |x0|^2, a = |z|^2, w = 2<x0, z>:
            //   2/p - 1/(p+a+w) - 1/(p+a-w)
            //     = 2 (p a + a^2 - w^2) / (p (p+a+w)(p+a-w)).
            second_diff: Some(Arc::new(|x0: &[f64], z: &[f64]| {
                let p = 1.0 + sq_norm(x0);
                let a = sq_norm(z);
                let w = 2.0 * dot(x0, z);
                2.0 * (p * a + a * a - w * w) / (p * (p + a + w) * (p + a - w))
            })),
            curvature: Some(2.0),
            tail: Tail::QuadraticDecay {
                amp: 1.0,
                scale: 1.0,
                center: Vec::new(),
            },
            extension_oracle: None,
            frac_lap_oracle: None,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    #[inline]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn has_stable_second_diff(&self) -> bool {
        self.second_diff.is_some()
    }

    /// Hessian sup-norm bound, if the entry declares one.
    pub fn curvature(&self) -> Option<f64> {
        self.curvature
    }

    /// Second difference `2u(x0) - u(x0+z) - u(x0-z)`, using the stable
    /// form when available and the naive one otherwise.
    pub fn second_difference(&self, x0: &[f64], z: &[f64]) -> f64 {
        match &self.second_diff {
            Some(f) => f(x0, z),
            None => {
                let plus: Vec<f64> = x0.iter().zip(z).map(|(a, b)| a + b).collect();
                let minus: Vec<f64> = x0.iter().zip(z).map(|(a, b)| a - b).collect();
                2.0 * self.eval(x0) - self.eval(&plus) - self.eval(&minus)
            }
        }
    }

    /// Closed-form extension value, when this entry knows one for the
    /// given order. Test/report oracle only.
    pub fn known_extension(&self, x: &[f64], y: f64, p: &FracParams) -> Option<f64> {
        self.extension_oracle.as_ref().and_then(|f| f(x, y, p))
    }

    /// Closed-form fractional Laplacian, when known. Test/report oracle
    /// only.
    pub fn known_frac_laplacian(&self, x: &[f64], p: &FracParams) -> Option<f64> {
        self.frac_lap_oracle.as_ref().and_then(|f| f(x, p))
    }

    /// The translate x -> u(x - a), with metadata carried along.
    pub fn shifted(&self, a: &[f64]) -> Self {
        let a1: Vec<f64> = a.to_vec();
        let a2 = a1.clone();
        let eval = self.eval.clone();
        let sd = self.second_diff.clone();
        let tail = match &self.tail {
            Tail::Bounded => Tail::Bounded,
            Tail::GaussianDecay { amp, rate, center } => Tail::GaussianDecay {
                amp: *amp,
                rate: *rate,
                center: shift_center(center, a),
            },
            Tail::QuadraticDecay { amp, scale, center } => Tail::QuadraticDecay {
                amp: *amp,
                scale: *scale,
                center: shift_center(center, a),
            },
            Tail::Oscillatory { amp, freq, phase } => Tail::Oscillatory {
                amp: *amp,
                freq: *freq,
                phase: phase - freq * a[0],
            },
        };
        Self {
            label: format!("{}<<shift", self.label),
            bound: self.bound,
            eval: Arc::new(move |x: &[f64]| {
                let xs: Vec<f64> = x.iter().zip(&a1).map(|(v, w)| v - w).collect();
                eval(&xs)
            }),
            second_diff: sd.map(|f| {
                Arc::new(move |x0: &[f64], z: &[f64]| {
                    let xs: Vec<f64> = x0.iter().zip(&a2).map(|(v, w)| v - w).collect();
                    f(&xs, z)
                }) as Arc<SecondDiffFn>
            }),
            curvature: self.curvature,
            tail,
            extension_oracle: None,
            frac_lap_oracle: None,
        }
    }

    /// The dilation x -> u(lambda x).
    pub fn dilated(&self, lambda: f64) -> Self {
        let eval = self.eval.clone();
        let sd = self.second_diff.clone();
        let tail = match &self.tail {
            Tail::Bounded => Tail::Bounded,
            Tail::GaussianDecay { amp, rate, center } => Tail::GaussianDecay {
                amp: *amp,
                rate: rate * lambda * lambda,
                center: center.iter().map(|c| c / lambda).collect(),
            },
            Tail::QuadraticDecay { amp, scale, center } => Tail::QuadraticDecay {
                amp: *amp,
                scale: scale * lambda,
                center: center.iter().map(|c| c / lambda).collect(),
            },
            Tail::Oscillatory { amp, freq, phase } => Tail::Oscillatory {
                amp: *amp,
                freq: freq * lambda,
                phase: *phase,
            },
        };
        let l2 = lambda;
        Self {
            label: format!("{}<<dilate", self.label),
            bound: self.bound,
            eval: Arc::new(move |x: &[f64]| {
                let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
                eval(&xs)
            }),
            second_diff: sd.map(|f| {
                Arc::new(move |x0: &[f64], z: &[f64]| {
                    let xs: Vec<f64> = x0.iter().map(|v| v * l2).collect();
                    let zs: Vec<f64> = z.iter().map(|v| v * l2).collect();
                    f(&xs, &zs)
                }) as Arc<SecondDiffFn>
            }),
            curvature: self.curvature.map(|c| c * lambda * lambda),
            tail,
            extension_oracle: None,
            frac_lap_oracle: None,
        }
    }

    /// a*u + b*v. The combined tail keeps only boundedness.
    pub fn combine(a: f64, u: &Self, b: f64, v: &Self) -> Self {
        let (eu, ev) = (u.eval.clone(), v.eval.clone());
        let (su, sv) = (u.second_diff.clone(), v.second_diff.clone());
        Self {
            label: format!("{}*{}+{}*{}", a, u.label, b, v.label),
            bound: (a.abs() * u.bound + b.abs() * v.bound).max(f64::MIN_POSITIVE),
            eval: Arc::new(move |x: &[f64]| a * eu(x) + b * ev(x)),
            second_diff: match (su, sv) {
                (Some(fu), Some(fv)) => Some(Arc::new(move |x0: &[f64], z: &[f64]| {
                    a * fu(x0, z) + b * fv(x0, z)
                })),
                _ => None,
            },
            curvature: match (u.curvature, v.curvature) {
                (Some(cu), Some(cv)) => Some(a.abs() * cu + b.abs() * cv),
                _ => None,
            },
            tail: Tail::Bounded,
            extension_oracle: None,
            frac_lap_oracle: None,
        }
    }
}

fn shift_center(center: &[f64], a: &[f64]) -> Vec<f64> {
    center
        .iter()
        .zip(a.iter().chain(std::iter::repeat(&0.0)))
        .map(|(c, v)| c + v)
        .collect()
}

#[inline]
fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Labels the registry understands.
pub const REGISTRY_LABELS: [&str; 4] = ["const", "cos", "gauss", "rational"];

/// Parses a registry expression such as `"const:c=2"`, `"cos:xi=2"`,
/// `"gauss"`, or `"rational"` into a boundary function with its
/// parameters bound.
pub fn parse_function(expr: &str) -> Result<BoundaryFunction> {
    let (label, params) = match expr.split_once(':') {
        Some((l, p)) => (l.trim(), Some(p.trim())),
        None => (expr.trim(), None),
    };

    let mut kv = std::collections::BTreeMap::new();
    if let Some(params) = params {
        for piece in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = piece.split_once('=').ok_or_else(|| {
                FracError::InvalidInput(format!(
                    "malformed parameter '{piece}' in '{expr}' (expected key=value)"
                ))
            })?;
            let value: f64 = v.trim().parse().map_err(|_| {
                FracError::InvalidInput(format!("parameter '{k}' in '{expr}' is not a number"))
            })?;
            kv.insert(k.trim().to_string(), value);
        }
    }

    let take = |kv: &mut std::collections::BTreeMap<String, f64>, key: &str, default: f64| {
        kv.remove(key).unwrap_or(default)
    };

    let built = match label {
        "const" => Ok(BoundaryFunction::constant(take(&mut kv, "c", 1.0))),
        "cos" => BoundaryFunction::cosine(take(&mut kv, "xi", 1.0)),
        "gauss" => Ok(BoundaryFunction::gaussian()),
        "rational" => Ok(BoundaryFunction::rational()),
        other => Err(FracError::InvalidInput(format!(
            "unknown boundary function '{other}'; available: {}",
            REGISTRY_LABELS.join(", ")
        ))),
    }?;

    if let Some(unknown) = kv.keys().next() {
        return Err(FracError::InvalidInput(format!(
            "unknown parameter '{unknown}' for '{label}'"
        )));
    }
    Ok(built)
}
