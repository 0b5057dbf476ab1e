//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7-point Gauss / 15-point Kronrod pair is applied per panel; panels
//! are kept in a max-heap keyed by their error estimate and the worst
//! panel is bisected until the summed estimate meets the tolerance or
//! the evaluation budget runs out. After refinement stops, panels are
//! summed in left-to-right order so the result does not depend on the
//! refinement history.

use serde::Serialize;

use crate::error::{FracError, Result};

/// Value plus a posteriori error estimate of a quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadResult {
    pub value: f64,
    /// A posteriori bound on the absolute error (quadrature estimate
    /// plus any analytic tail/remainder bounds folded in by the caller).
    pub err_estimate: f64,
    /// Number of integrand evaluations spent.
    pub evaluations: usize,
}

impl QuadResult {
    pub(crate) fn zero() -> Self {
        QuadResult {
            value: 0.0,
            err_estimate: 0.0,
            evaluations: 0,
        }
    }

    /// Accumulates another partial result (values and error bounds add).
    pub(crate) fn absorb(&mut self, other: &QuadResult) {
        self.value += other.value;
        self.err_estimate += other.err_estimate;
        self.evaluations += other.evaluations;
    }

    /// Folds an analytic remainder bound into the error estimate.
    pub(crate) fn add_err(&mut self, err: f64) {
        self.err_estimate += err;
    }
}

// 15-point Kronrod nodes on [-1, 1] (positive half; symmetric) and the
// matching weights, with the embedded 7-point Gauss weights. Standard
// QUADPACK values.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_33,
];

/// One Gauss–Kronrod pass over [a, b]. Returns (kronrod value, error
/// estimate). 15 evaluations.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];

    let mut fv = [0.0_f64; 15];
    fv[7] = fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[i] = f1;
        fv[14 - i] = f2;
        kronrod += WGK[i] * (f1 + f2);
        res_abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            // Kronrod nodes with odd index are the embedded Gauss nodes.
            gauss += WG[i / 2] * (f1 + f2);
        }
    }

    if !kronrod.is_finite() {
        return Err(FracError::NonFinite("quadrature integrand".into()));
    }

    // QUADPACK-style rescaled error estimate.
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (fv[7] - mean).abs();
    for i in 0..7 {
        res_asc += WGK[i] * ((fv[i] - mean).abs() + (fv[14 - i] - mean).abs());
    }
    let raw_err = ((kronrod - gauss) * half).abs();
    res_asc *= half.abs();
    res_abs *= half.abs();
    let mut err = raw_err;
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }

    Ok((kronrod * half, err))
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Integrates `f` over the union of `segments`, refining adaptively
/// until the total error estimate is at most `tol_abs` or `max_evals`
/// integrand calls have been spent.
///
/// Segment endpoints double as forced breakpoints, so callers place
/// them at known kinks, peaks, or scale changes.
pub fn adaptive_segments<F: FnMut(f64) -> f64>(
    mut f: F,
    segments: &[(f64, f64)],
    tol_abs: f64,
    max_evals: usize,
) -> Result<QuadResult> {
    if !(tol_abs > 0.0) {
        return Err(FracError::InvalidInput(format!(
            "quadrature tolerance must be positive, got {tol_abs}"
        )));
    }
    let mut heap: Vec<Panel> = Vec::new();
    let mut evals = 0usize;

    for &(a, b) in segments {
        if !(a.is_finite() && b.is_finite()) {
            return Err(FracError::InvalidInput(
                "quadrature segment endpoints must be finite".into(),
            ));
        }
        if a == b {
            continue;
        }
        let (value, err) = gk15(&mut f, a, b)?;
        evals += 15;
        heap_push(&mut heap, Panel { a, b, value, err });
    }
    if heap.is_empty() {
        return Ok(QuadResult {
            value: 0.0,
            err_estimate: 0.0,
            evaluations: 0,
        });
    }

    let mut total_err: f64 = heap.iter().map(|p| p.err).sum();
    while total_err > tol_abs && evals + 30 <= max_evals {
        let worst = heap_pop(&mut heap);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel narrower than f64 spacing; cannot refine further.
            heap_push(&mut heap, worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        evals += 30;
        total_err += e1 + e2 - worst.err;
        heap_push(
            &mut heap,
            Panel {
                a: worst.a,
                b: mid,
                value: v1,
                err: e1,
            },
        );
        heap_push(
            &mut heap,
            Panel {
                a: mid,
                b: worst.b,
                value: v2,
                err: e2,
            },
        );
    }

    // Fixed summation order: left to right regardless of how refinement
    // proceeded.
    heap.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let err_estimate: f64 = heap.iter().map(|p| p.err).sum();

    if err_estimate > tol_abs {
        return Err(FracError::QuadratureNonConvergence {
            requested: tol_abs,
            achieved: err_estimate,
            evaluations: evals,
        });
    }
    Ok(QuadResult {
        value,
        err_estimate,
        evaluations: evals,
    })
}

/// Convenience wrapper for a single interval.
pub fn adaptive<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol_abs: f64,
    max_evals: usize,
) -> Result<QuadResult> {
    adaptive_segments(f, &[(a, b)], tol_abs, max_evals)
}

// Minimal binary max-heap on Panel.err; std BinaryHeap needs Ord and
// f64 keys are easier to handle by hand.
fn heap_push(heap: &mut Vec<Panel>, p: Panel) {
    heap.push(p);
    let mut i = heap.len() - 1;
    while i > 0 {
        let parent = (i - 1) / 2;
        if heap[parent].err < heap[i].err {
            heap.swap(parent, i);
            i = parent;
        } else {
            break;
        }
    }
}

fn heap_pop(heap: &mut Vec<Panel>) -> Panel {
    let last = heap.len() - 1;
    heap.swap(0, last);
    let top = heap.pop().expect("heap_pop on empty heap");
    let mut i = 0;
    loop {
        let (l, r) = (2 * i + 1, 2 * i + 2);
        let mut largest = i;
        if l < heap.len() && heap[l].err > heap[largest].err {
            largest = l;
        }
        if r < heap.len() && heap[r].err > heap[largest].err {
            largest = r;
        }
        if largest == i {
            break;
        }
        heap.swap(i, largest);
        i = largest;
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_consistent() {
        // Both rules integrate the constant 1 exactly on [-1, 1].
        let sum_gk: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let sum_g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((sum_gk - 2.0).abs() < 1e-15);
        assert!((sum_g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        // The 15-point Kronrod rule is exact up to degree 22.
        for k in [2usize, 8, 14, 20] {
            let r = adaptive(|x: f64| x.powi(k as i32), -1.0, 1.0, 1e-12, 1000).unwrap();
            let exact = 2.0 / (k as f64 + 1.0);
            assert!(
                (r.value - exact).abs() < 1e-13,
                "x^{k}: {} vs {exact}",
                r.value
            );
        }
    }

    #[test]
    fn arctangent_integral() {
        // integral of 1/(1+x^2) over [-50, 50] = 2 atan(50)
        let r = adaptive(|x: f64| 1.0 / (1.0 + x * x), -50.0, 50.0, 1e-12, 100_000).unwrap();
        let exact = 2.0 * 50.0_f64.atan();
        assert!((r.value - exact).abs() < 1e-12);
        assert!(r.err_estimate <= 1e-12);
    }

    #[test]
    fn endpoint_algebraic_singularity() {
        // integral_0^1 x^{-1/2} dx = 2; integrable singularity at 0.
        let r = adaptive(|x: f64| x.sqrt().recip(), 1e-300, 1.0, 1e-9, 200_000).unwrap();
        assert!((r.value - 2.0).abs() < 2e-9, "got {}", r.value);
    }

    #[test]
    fn oscillatory_integral() {
        // integral_0^{20 pi} sin x dx = 0
        let r = adaptive(|x: f64| x.sin(), 0.0, 20.0 * std::f64::consts::PI, 1e-11, 100_000)
            .unwrap();
        assert!(r.value.abs() < 1e-11);
    }

    #[test]
    fn segments_add_up() {
        let whole = adaptive(|x: f64| x.exp(), 0.0, 2.0, 1e-12, 10_000).unwrap();
        let split =
            adaptive_segments(|x: f64| x.exp(), &[(0.0, 0.7), (0.7, 2.0)], 1e-12, 10_000).unwrap();
        assert!((whole.value - split.value).abs() < 1e-12);
        assert!((whole.value - (2.0_f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_reports_failure() {
        // A nasty spike with an absurd tolerance and tiny budget.
        let res = adaptive(
            |x: f64| 1.0 / ((x - 0.5).abs() + 1e-14),
            0.0,
            1.0,
            1e-14,
            300,
        );
        match res {
            Err(FracError::QuadratureNonConvergence { evaluations, .. }) => {
                assert!(evaluations <= 300);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(adaptive(|x: f64| x, 0.0, 1.0, 0.0, 100).is_err());
        assert!(adaptive(|x: f64| x, 0.0, f64::INFINITY, 1e-6, 100).is_err());
        assert!(adaptive(|_| f64::NAN, 0.0, 1.0, 1e-6, 100).is_err());
    }
}
