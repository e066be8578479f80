//! Time-dependent coefficient families `a_ij, b_j, c_j, d` of the sesquilinear
//! forms, with their Hölder exponent and `t = inf` limits.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::Point;

/// A point of the closed time axis `[t0, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Time {
    At(f64),
    Infinity,
}

impl Time {
    pub fn finite(self) -> Option<f64> {
        match self {
            Time::At(t) => Some(t),
            Time::Infinity => None,
        }
    }

    /// Stable key usable in caches (`inf` maps to `f64::INFINITY`).
    pub fn key(self) -> u64 {
        match self {
            Time::At(t) => t.to_bits(),
            Time::Infinity => f64::INFINITY.to_bits(),
        }
    }
}

impl From<f64> for Time {
    fn from(t: f64) -> Self {
        if t == f64::INFINITY {
            Time::Infinity
        } else {
            Time::At(t)
        }
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Time::At(t) => write!(f, "{t}"),
            Time::Infinity => f.write_str("inf"),
        }
    }
}

/// Coefficient values at one `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffSample {
    /// Principal part; entry `(i, j)` multiplies `d_j u * d_i v`.
    pub a: Matrix2<f64>,
    /// Multiplies `d_j u * v`.
    pub b: Vector2<f64>,
    /// Multiplies `u * d_j v`.
    pub c: Vector2<f64>,
    pub d: f64,
}

impl CoeffSample {
    pub fn max_abs_diff(&self, other: &CoeffSample) -> f64 {
        (self.a - other.a)
            .amax()
            .max((self.b - other.b).amax())
            .max((self.c - other.c).amax())
            .max((self.d - other.d).abs())
    }

    /// Coefficients of the adjoint form `a*(u, v) = conj(a(v, u))`.
    pub fn adjoint(&self) -> CoeffSample {
        CoeffSample {
            a: self.a.transpose(),
            b: self.c,
            c: self.b,
            d: self.d,
        }
    }
}

/// Pure, re-entrant evaluator of the coefficient fields.
pub trait CoefficientField: Send + Sync {
    fn eval(&self, t: Time, x: &Point) -> Result<CoeffSample>;
}

impl<F> CoefficientField for F
where
    F: Fn(Time, &Point) -> CoeffSample + Send + Sync,
{
    fn eval(&self, t: Time, x: &Point) -> Result<CoeffSample> {
        Ok(self(t, x))
    }
}

/// Coefficient family with metadata.
#[derive(Clone)]
pub struct CoefficientFamily {
    name: String,
    field: Arc<dyn CoefficientField>,
    alpha: f64,
    coercivity_floor: f64,
    time_constant: bool,
    symmetric: bool,
}

impl fmt::Debug for CoefficientFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientFamily")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("coercivity_floor", &self.coercivity_floor)
            .field("time_constant", &self.time_constant)
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

/// Builder-style metadata for [`CoefficientFamily::new`].
#[derive(Debug, Clone)]
pub struct FamilyInfo {
    pub name: String,
    pub alpha: f64,
    pub coercivity_floor: f64,
    pub time_constant: bool,
    pub symmetric: bool,
}

impl CoefficientFamily {
    pub fn new(info: FamilyInfo, field: Arc<dyn CoefficientField>) -> Result<Self> {
        if !(info.alpha > 0.0 && info.alpha <= 1.0) {
            return Err(Error::invalid("alpha", "Hölder exponent must lie in ]0, 1]"));
        }
        if !(info.coercivity_floor > 0.0) {
            return Err(Error::invalid("coercivity_floor", "must be positive"));
        }
        Ok(CoefficientFamily {
            name: info.name,
            field,
            alpha: info.alpha,
            coercivity_floor: info.coercivity_floor,
            time_constant: info.time_constant,
            symmetric: info.symmetric,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Claimed coercivity constant; checked at runtime by `verify::coercivity_constant`.
    pub fn coercivity_floor(&self) -> f64 {
        self.coercivity_floor
    }

    pub fn is_time_constant(&self) -> bool {
        self.time_constant
    }

    /// Declared symmetry (`a` symmetric and `b = c`).
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn eval(&self, t: Time, x: &Point) -> Result<CoeffSample> {
        self.field.eval(t, x)
    }

    /// Family of the adjoint forms `a*_t(u, v) = conj(a_t(v, u))`.
    pub fn adjoint(&self) -> CoefficientFamily {
        let inner = self.field.clone();
        CoefficientFamily {
            name: format!("adjoint({})", self.name),
            field: Arc::new(AdjointField(inner)),
            ..self.clone()
        }
    }

    /// Fails with the L2-pipeline requirement `alpha > 1/2`.
    pub fn require_l2_exponent(&self) -> Result<()> {
        if self.alpha > 0.5 {
            Ok(())
        } else {
            Err(Error::invalid("alpha", "the L2 setting needs alpha in ]1/2, 1]"))
        }
    }
}

struct AdjointField(Arc<dyn CoefficientField>);

impl CoefficientField for AdjointField {
    fn eval(&self, t: Time, x: &Point) -> Result<CoeffSample> {
        Ok(self.0.eval(t, x)?.adjoint())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda < 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("lambda", "must be negative for the forms to be coercive"))
    }
}

/// `a = I, b = c = 0, d = -lambda`: the form of `-(lambda + Laplacian)`.
pub fn preset_laplace_shift(lambda: f64) -> Result<CoefficientFamily> {
    check_lambda(lambda)?;
    let sample = CoeffSample {
        a: Matrix2::identity(),
        b: Vector2::zeros(),
        c: Vector2::zeros(),
        d: -lambda,
    };
    CoefficientFamily::new(
        FamilyInfo {
            name: format!("laplace_shift({lambda})"),
            alpha: 1.0,
            coercivity_floor: 1.0f64.min(-lambda),
            time_constant: true,
            symmetric: true,
        },
        Arc::new(move |_: Time, _: &Point| sample),
    )
}

/// `a = (1 + eps e^{-decay t} sin t) I, b = c = 0, d = -lambda`.
///
/// The deviation from the limit is bounded by the monotone envelope
/// `|eps| e^{-decay t}` (see [`oscillating_envelope`]).
pub fn preset_oscillating(lambda: f64, eps: f64, decay: f64) -> Result<CoefficientFamily> {
    check_lambda(lambda)?;
    if !(eps.abs() < 1.0) {
        return Err(Error::invalid("eps", "|eps| < 1 is needed for uniform coercivity"));
    }
    if !(decay > 0.0) {
        return Err(Error::invalid("decay", "must be positive"));
    }
    let field = move |t: Time, _: &Point| {
        let scale = match t {
            Time::At(t) => 1.0 + eps * (-decay * t).exp() * t.sin(),
            Time::Infinity => 1.0,
        };
        CoeffSample {
            a: Matrix2::identity() * scale,
            b: Vector2::zeros(),
            c: Vector2::zeros(),
            d: -lambda,
        }
    };
    CoefficientFamily::new(
        FamilyInfo {
            name: format!("oscillating({lambda}, {eps}, {decay})"),
            alpha: 1.0,
            coercivity_floor: (1.0 - eps.abs()).min(-lambda),
            time_constant: eps == 0.0,
            symmetric: true,
        },
        Arc::new(field),
    )
}

/// Upper bound of `||coef(t) - coef(inf)||_inf` for [`preset_oscillating`].
pub fn oscillating_envelope(eps: f64, decay: f64, t: f64) -> f64 {
    eps.abs() * (-decay * t).exp()
}

/// `a = I, b = beta, c = -beta, d = -lambda`: a non-symmetric family whose
/// symmetric part is the Laplace shift, so its coercivity constant stays 1.
pub fn preset_skew_advection(lambda: f64, beta: [f64; 2]) -> Result<CoefficientFamily> {
    check_lambda(lambda)?;
    let beta = Vector2::new(beta[0], beta[1]);
    let sample = CoeffSample {
        a: Matrix2::identity(),
        b: beta,
        c: -beta,
        d: -lambda,
    };
    CoefficientFamily::new(
        FamilyInfo {
            name: format!("skew_advection({lambda}, [{}, {}])", beta.x, beta.y),
            alpha: 1.0,
            coercivity_floor: 1.0f64.min(-lambda),
            time_constant: true,
            symmetric: beta == Vector2::zeros(),
        },
        Arc::new(move |_: Time, _: &Point| sample),
    )
}

/// Fixed spatial sample set used by [`holder_modulus_estimate`].
pub fn spatial_samples() -> Vec<Point> {
    let mut pts = Vec::with_capacity(49);
    for i in 0..7 {
        for j in 0..7 {
            pts.push(Point::new(-1.0 + i as f64 / 3.0, -1.0 + j as f64 / 3.0));
        }
    }
    pts
}

/// `max_{pairs, x} |coef(t, x) - coef(s, x)| / |t - s|^alpha` over the fixed sample set.
pub fn holder_modulus_estimate(family: &CoefficientFamily, times: &[f64]) -> Result<f64> {
    let mut distinct: Vec<f64> = times.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::invalid("times", "need at least two distinct times"));
    }
    let points = spatial_samples();
    let samples: Vec<Vec<CoeffSample>> = distinct
        .iter()
        .map(|&t| points.iter().map(|x| family.eval(Time::At(t), x)).collect())
        .collect::<Result<_>>()?;
    let mut best = 0.0f64;
    for i in 0..distinct.len() {
        for j in i + 1..distinct.len() {
            let gap = (distinct[j] - distinct[i]).abs().powf(family.alpha);
            let diff = samples[i]
                .iter()
                .zip(&samples[j])
                .map(|(p, q)| p.max_abs_diff(q))
                .fold(0.0, f64::max);
            best = best.max(diff / gap);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t_max: f64) -> Vec<f64> {
        (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
    }

    #[test]
    fn laplace_shift_values() {
        let fam = preset_laplace_shift(-1.0).unwrap();
        for t in [Time::At(0.0), Time::At(3.5), Time::Infinity] {
            let s = fam.eval(t, &Point::new(0.3, -0.2)).unwrap();
            assert_eq!(s.d, 1.0);
            assert_eq!(s.a, Matrix2::identity());
            assert_eq!(s.b, Vector2::zeros());
        }
        assert_eq!(holder_modulus_estimate(&fam, &[0.0, 0.5, 7.0]).unwrap(), 0.0);
        assert!(matches!(preset_laplace_shift(0.0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn oscillating_degenerates_to_laplace_shift() {
        let osc = preset_oscillating(-2.0, 0.0, 1.0).unwrap();
        let lap = preset_laplace_shift(-2.0).unwrap();
        let x = Point::new(0.1, 0.9);
        for t in [0.0, 1.0, 4.2] {
            assert_eq!(osc.eval(Time::At(t), &x).unwrap(), lap.eval(Time::At(t), &x).unwrap());
        }
        assert!(osc.is_time_constant());
    }

    #[test]
    fn oscillating_infinity_sentinel_is_the_limit() {
        let osc = preset_oscillating(-1.0, 0.5, 1.0).unwrap();
        let s = osc.eval(Time::Infinity, &Point::zeros()).unwrap();
        assert_eq!(s.a, Matrix2::identity());
        assert_eq!(s.d, 1.0);
        assert!(matches!(preset_oscillating(-1.0, 1.0, 1.0), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn oscillating_lipschitz_bound() {
        // |d/dt eps e^{-decay t} sin t| <= |eps| sqrt(1 + decay^2) <= |eps| (1 + decay)
        let (eps, decay) = (0.5, 1.0);
        let osc = preset_oscillating(-1.0, eps, decay).unwrap();
        let x = Point::zeros();
        let ts = grid(200, 10.0);
        for &t in &ts {
            for &s in &ts {
                let d = osc.eval(Time::At(t), &x).unwrap().max_abs_diff(&osc.eval(Time::At(s), &x).unwrap());
                assert!(d <= eps.abs() * (1.0 + decay) * (t - s).abs() + 1e-15);
            }
        }
        let est = holder_modulus_estimate(&osc, &grid(100, 10.0)).unwrap();
        assert!(est <= 1.0 && est > 0.4, "{est}");
    }

    #[test]
    fn single_pair_reduces_to_sup_difference() {
        let osc = preset_oscillating(-1.0, 0.5, 1.0).unwrap();
        let est = holder_modulus_estimate(&osc, &[0.0, 1.0]).unwrap();
        let direct = spatial_samples()
            .iter()
            .map(|x| osc.eval(Time::At(0.0), x).unwrap().max_abs_diff(&osc.eval(Time::At(1.0), x).unwrap()))
            .fold(0.0, f64::max);
        assert_eq!(est, direct);
    }

    #[test]
    fn limit_is_approached_under_the_envelope() {
        let (eps, decay) = (0.3, 1.0);
        let osc = preset_oscillating(-1.0, eps, decay).unwrap();
        let x = Point::new(0.5, 0.5);
        let inf = osc.eval(Time::Infinity, &x).unwrap();
        let mut last = f64::INFINITY;
        for t in grid(80, 20.0) {
            let dev = osc.eval(Time::At(t), &x).unwrap().max_abs_diff(&inf);
            let env = oscillating_envelope(eps, decay, t);
            assert!(dev <= env + 1e-15);
            assert!(env <= last);
            last = env;
        }
    }

    #[test]
    fn adjoint_swaps_first_order_terms() {
        let fam = preset_skew_advection(-1.0, [0.5, -0.25]).unwrap();
        let adj = fam.adjoint();
        let s = fam.eval(Time::At(0.0), &Point::zeros()).unwrap();
        let a = adj.eval(Time::At(0.0), &Point::zeros()).unwrap();
        assert_eq!(a.b, s.c);
        assert_eq!(a.c, s.b);
        assert!(!fam.is_symmetric());
    }
}
