//! Non-cylindrical domains `Omega_t = h(t, Omega)` over a fixed disk of
//! radius `R`: diffeomorphism families, the normal extension `N(t, y)`, the
//! transformed coefficient family on the fixed domain and data transport.
//!
//! All presets use the normal field `nu(y) = y/|y|` and the cutoff `chi`, a
//! quintic smoothstep in `r/R` rising from 0 at `r = R/2` to 1 at `r = 3R/4`.

use std::sync::Arc;

use nalgebra::{DVector, Matrix2, Vector2};

use crate::assembly::{BoundaryDual, BoundaryField, BoundaryMass};
use crate::coeffs::{CoeffSample, CoefficientFamily, FamilyInfo, Time};
use crate::error::{Error, Result};
use crate::evolution::{Forcing, TimeProfile};
use crate::mesh::{Point, TriMesh};

const CHI_INNER: f64 = 0.5;
const CHI_OUTER: f64 = 0.75;
const FD_RELATIVE_STEP: f64 = 1e-6;
const MAX_NORMAL_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionKind {
    Identity,
    /// `h(t, y) = rho(t) y` with `rho(t) = rho0 + amp e^{-rate t}`.
    RadialDilation { rho0: f64, amp: f64, rate: f64 },
    /// `h(t, y) = y + f(t) chi(|y|) y/|y|` with `f(t) = eps t^{-beta} sin(t^alpha)`.
    Collar { eps: f64, alpha: f64, beta: f64 },
}

#[derive(Debug, Clone)]
pub struct DomainMotion {
    kind: MotionKind,
    radius: f64,
    alpha: f64,
    t_star: f64,
}

fn smoothstep(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0)
    } else {
        let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let dv = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        (v, dv)
    }
}

impl DomainMotion {
    pub fn identity(radius: f64) -> Result<Self> {
        Self::build(MotionKind::Identity, radius)
    }

    pub fn radial_dilation(radius: f64, rho0: f64, amp: f64, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !(rho0 > 0.0) || !(rho0 + amp.min(0.0) > 0.0) {
            return Err(Error::invalid("radial_dilation", "need rho0 > 0, rate >= 0 and rho(t) > 0"));
        }
        Self::build(MotionKind::RadialDilation { rho0, amp, rate }, radius)
    }

    pub fn collar(radius: f64, eps: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::invalid("collar", "exponents must be positive"));
        }
        if !(2.0 * (alpha - 1.0) < beta) {
            return Err(Error::invalid("collar", "need 2(alpha - 1) < beta"));
        }
        Self::build(MotionKind::Collar { eps, alpha, beta }, radius)
    }

    fn build(kind: MotionKind, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", "must be positive"));
        }
        let mut motion = DomainMotion { kind, radius, alpha: 1.0, t_star: 0.0 };
        motion.t_star = motion.find_t_star()?;
        Ok(motion)
    }

    /// Smallest `t` on a 0.05 grid with `|c| <= 0.5` and a small collar
    /// displacement on the sampled horizon `[t, t + 100]`.
    fn find_t_star(&self) -> Result<f64> {
        let ok = |t: f64| {
            let disp = match self.kind {
                MotionKind::Collar { .. } => self.collar_offset(t).0.abs() <= 0.25 * self.radius,
                _ => true,
            };
            self.normal_speed(t).abs() <= MAX_NORMAL_SPEED && disp && self.min_scale(t) > 0.0
        };
        let start = match self.kind {
            MotionKind::Collar { .. } => 0.05,
            _ => 0.0,
        };
        let grid: Vec<f64> = (0..=40_000).map(|i| start + 0.005 * i as f64).collect();
        let mut last_bad = None;
        for (i, &t) in grid.iter().enumerate() {
            if !ok(t) {
                last_bad = Some(i);
            }
        }
        match last_bad {
            None => Ok(start),
            Some(i) if i + 1 < grid.len() => Ok(((grid[i + 1] / 0.05).ceil() * 0.05 * 1e9).round() / 1e9),
            Some(_) => Err(Error::Geometry("no admissible start time on the sampled horizon".into())),
        }
    }

    fn min_scale(&self, t: f64) -> f64 {
        match self.kind {
            MotionKind::RadialDilation { .. } => self.rho(t).0,
            _ => 1.0,
        }
    }

    pub fn kind(&self) -> MotionKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Earliest admissible start time.
    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn is_identity(&self) -> bool {
        self.kind == MotionKind::Identity
    }

    pub fn name(&self) -> String {
        match self.kind {
            MotionKind::Identity => "identity".into(),
            MotionKind::RadialDilation { rho0, amp, rate } => {
                format!("radial_dilation({rho0}, {amp}, {rate})")
            }
            MotionKind::Collar { eps, alpha, beta } => format!("collar({eps}, {alpha}, {beta})"),
        }
    }

    fn rho(&self, t: f64) -> (f64, f64) {
        match self.kind {
            MotionKind::RadialDilation { rho0, amp, rate } => {
                let e = (-rate * t).exp();
                (rho0 + amp * e, -amp * rate * e)
            }
            _ => (1.0, 0.0),
        }
    }

    /// `(f(t), f'(t))` of the collar preset.
    fn collar_offset(&self, t: f64) -> (f64, f64) {
        match self.kind {
            MotionKind::Collar { eps, alpha, beta } => {
                let ta = t.powf(alpha);
                let f = eps * t.powf(-beta) * ta.sin();
                let df = eps
                    * (-beta * t.powf(-beta - 1.0) * ta.sin()
                        + alpha * t.powf(alpha - 1.0 - beta) * ta.cos());
                (f, df)
            }
            _ => (0.0, 0.0),
        }
    }

    /// `chi(y)` and its gradient.
    pub fn chi(&self, y: &Point) -> (f64, Vector2<f64>) {
        let r = y.norm();
        let s = (r / self.radius - CHI_INNER) / (CHI_OUTER - CHI_INNER);
        let (v, dv) = smoothstep(s);
        if dv == 0.0 || r == 0.0 {
            return (v, Vector2::zeros());
        }
        (v, y * (dv / ((CHI_OUTER - CHI_INNER) * self.radius * r)))
    }

    /// Extension `nu(y) = y/|y|` of the outward normal (zero at the origin,
    /// which lies outside the support of `chi`).
    pub fn nu_normal(&self, y: &Point) -> Vector2<f64> {
        let r = y.norm();
        if r == 0.0 {
            Vector2::zeros()
        } else {
            y / r
        }
    }

    pub fn h(&self, t: f64, y: &Point) -> Point {
        match self.kind {
            MotionKind::Identity => *y,
            MotionKind::RadialDilation { .. } => y * self.rho(t).0,
            MotionKind::Collar { .. } => {
                let (chi, _) = self.chi(y);
                if chi == 0.0 {
                    return *y;
                }
                y + self.nu_normal(y) * (self.collar_offset(t).0 * chi)
            }
        }
    }

    /// Jacobian `(dh_i / dy_j)`.
    pub fn jac(&self, t: f64, y: &Point) -> Matrix2<f64> {
        match self.kind {
            MotionKind::Identity => Matrix2::identity(),
            MotionKind::RadialDilation { .. } => Matrix2::identity() * self.rho(t).0,
            MotionKind::Collar { .. } => {
                let (chi, dchi) = self.chi(y);
                if chi == 0.0 && dchi == Vector2::zeros() {
                    return Matrix2::identity();
                }
                let r = y.norm();
                let f = self.collar_offset(t).0;
                let nu = y / r;
                // h = g(r) y with g = 1 + f chi / r, so J = g I + r g' nu nu^T
                let chi_r = dchi.dot(&nu);
                let g = 1.0 + f * chi / r;
                let dg = f * (chi_r / r - chi / (r * r));
                Matrix2::identity() * g + nu * nu.transpose() * (r * dg)
            }
        }
    }

    pub fn dh_dt(&self, t: f64, y: &Point) -> Vector2<f64> {
        match self.kind {
            MotionKind::Identity => Vector2::zeros(),
            MotionKind::RadialDilation { .. } => y * self.rho(t).1,
            MotionKind::Collar { .. } => {
                let (chi, _) = self.chi(y);
                self.nu_normal(y) * (self.collar_offset(t).1 * chi)
            }
        }
    }

    /// Scalar normal speed `c(t)` with `dh/dt = c n` on the boundary.
    pub fn normal_speed(&self, t: f64) -> f64 {
        match self.kind {
            MotionKind::Identity => 0.0,
            MotionKind::RadialDilation { .. } => self.rho(t).1 * self.radius,
            MotionKind::Collar { .. } => self.collar_offset(t).1,
        }
    }

    /// `G = (dh/dy)^{-1}`.
    pub fn inverse_jacobian(&self, t: f64, y: &Point) -> Result<Matrix2<f64>> {
        if self.is_identity() {
            return Ok(Matrix2::identity());
        }
        let j = self.jac(t, y);
        let det = j.determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::Geometry(format!(
                "Jacobian is singular at t = {t}, y = ({}, {})",
                y.x, y.y
            )));
        }
        Ok(Matrix2::new(j[(1, 1)], -j[(0, 1)], -j[(1, 0)], j[(0, 0)]) / det)
    }

    /// `N(t, y) = chi |G^T nu|^{-1} + 1 - chi`, written as
    /// `1 + chi (|nu| / |G^T nu| - 1)` (`|nu| = 1` on the support of `chi`).
    pub fn normal_extension(&self, t: f64, y: &Point) -> Result<f64> {
        let (chi, _) = self.chi(y);
        if chi == 0.0 {
            return Ok(1.0);
        }
        let nu = self.nu_normal(y);
        let gtnu = self.inverse_jacobian(t, y)?.transpose() * nu;
        let denom = gtnu.norm();
        if !(denom > 0.0) {
            return Err(Error::Geometry(format!(
                "G^T nu vanishes at y = ({}, {})",
                y.x, y.y
            )));
        }
        Ok(1.0 + chi * (nu.norm() / denom - 1.0))
    }

    /// `n(t, h(t, y)) = G^T nu / |G^T nu|`.
    pub fn moving_normal(&self, t: f64, y: &Point) -> Result<Vector2<f64>> {
        let nu = self.nu_normal(y);
        let gtnu = self.inverse_jacobian(t, y)?.transpose() * nu;
        let len = gtnu.norm();
        if !(len > 0.0) {
            return Err(Error::Geometry("normal is undefined at the origin".into()));
        }
        Ok(gtnu / len)
    }

    /// `sum_l d_l (G_lj N)` for `j = 1, 2`.
    fn divergence_gn(&self, t: f64, y: &Point) -> Result<Vector2<f64>> {
        match self.kind {
            MotionKind::Identity => Ok(Vector2::zeros()),
            MotionKind::RadialDilation { .. } => {
                // G = I / rho and N = 1 + chi (rho - 1)
                let rho = self.rho(t).0;
                let (_, dchi) = self.chi(y);
                Ok(dchi * ((rho - 1.0) / rho))
            }
            MotionKind::Collar { .. } => {
                let step = FD_RELATIVE_STEP * 2.0 * self.radius;
                let gn = |p: &Point| -> Result<Matrix2<f64>> {
                    Ok(self.inverse_jacobian(t, p)? * self.normal_extension(t, p)?)
                };
                let mut out = Vector2::zeros();
                for l in 0..2 {
                    let mut e = Vector2::zeros();
                    e[l] = step;
                    let diff = (gn(&(y + e))? - gn(&(y - e))?) / (2.0 * step);
                    for j in 0..2 {
                        out[j] += diff[(l, j)];
                    }
                }
                Ok(out)
            }
        }
    }

    /// Coefficients of the transformed form at a finite time.
    pub fn transformed_sample(&self, t: f64, y: &Point, lambda: f64) -> Result<CoeffSample> {
        let g = self.inverse_jacobian(t, y)?;
        let n = self.normal_extension(t, y)?;
        let c = self.normal_speed(t);
        let scale = (1.0 - c) * n;
        let div = self.divergence_gn(t, y)?;
        Ok(CoeffSample {
            a: g * g.transpose() * scale,
            b: g * div * (1.0 - c),
            c: Vector2::zeros(),
            d: -lambda * scale,
        })
    }
}

/// `N(t, y)` at each point.
pub fn normal_extension_n(motion: &DomainMotion, t: f64, points: &[Point]) -> Result<Vec<f64>> {
    points.iter().map(|y| motion.normal_extension(t, y)).collect()
}

/// Family of the transformed forms on the fixed domain; its `inf` snapshot
/// is `a = I, b = 0, d = -lambda`.
pub fn transformed_family(motion: &DomainMotion, lambda: f64) -> Result<CoefficientFamily> {
    if !(lambda < 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be negative"));
    }
    let m = motion.clone();
    let field = move |t: Time, y: &Point| -> Result<CoeffSample> {
        match t {
            Time::Infinity => Ok(CoeffSample {
                a: Matrix2::identity(),
                b: Vector2::zeros(),
                c: Vector2::zeros(),
                d: -lambda,
            }),
            Time::At(t) => m.transformed_sample(t, y, lambda),
        }
    };
    let stat = motion.is_identity();
    CoefficientFamily::new(
        FamilyInfo {
            name: format!("transformed({}, {lambda})", motion.name()),
            alpha: motion.alpha(),
            coercivity_floor: 0.25f64.min(-lambda),
            time_constant: stat,
            symmetric: stat,
        },
        Arc::new(FallibleField(field)),
    )
}

struct FallibleField<F>(F);

impl<F> crate::coeffs::CoefficientField for FallibleField<F>
where
    F: Fn(Time, &Point) -> Result<CoeffSample> + Send + Sync,
{
    fn eval(&self, t: Time, x: &Point) -> Result<CoeffSample> {
        (self.0)(t, x)
    }
}

/// Area-weighted average of the P1 gradients around each boundary vertex.
fn boundary_gradients(mesh: &TriMesh, v: &DVector<f64>) -> Vec<Vector2<f64>> {
    let mut sums = vec![Vector2::zeros(); mesh.num_vertices()];
    let mut weights = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let grads = mesh.hat_gradients(t);
        let grad: Vector2<f64> = (0..3).map(|k| grads[k] * v[tri[k]]).sum();
        let area = mesh.signed_area(t);
        for &p in tri {
            sums[p] += grad * area;
            weights[p] += area;
        }
    }
    mesh.boundary_vertices()
        .iter()
        .map(|&p| sums[p] / weights[p])
        .collect()
}

/// Pointwise `C v = (1 - c) grad v . (G n)` at the boundary vertices.
pub fn strong_conormal_eval(
    motion: &DomainMotion,
    mesh: &TriMesh,
    t: f64,
    v: &DVector<f64>,
) -> Result<BoundaryField> {
    let grads = boundary_gradients(mesh, v);
    let c = motion.normal_speed(t);
    let mut out = DVector::zeros(mesh.num_boundary());
    for (b, &p) in mesh.boundary_vertices().iter().enumerate() {
        let y = mesh.vertices()[p];
        let g = motion.inverse_jacobian(t, &y)?;
        let n = motion.moving_normal(t, &y)?;
        out[b] = (1.0 - c) * grads[b].dot(&(g * n));
    }
    Ok(BoundaryField(out))
}

/// `M (f(h(t, y_b)))_b`: boundary data on the moving boundary pulled back
/// to the reference boundary.
pub fn pullback_boundary_data(
    motion: &DomainMotion,
    mesh: &TriMesh,
    mass: &BoundaryMass,
    t: f64,
    f: &dyn Fn(&Point) -> f64,
) -> BoundaryDual {
    mass.to_dual(&pullback_samples(motion, mesh, t, f))
}

/// Samples `f(h(t, y_b))` at the boundary vertices.
pub fn pullback_samples(
    motion: &DomainMotion,
    mesh: &TriMesh,
    t: f64,
    f: &dyn Fn(&Point) -> f64,
) -> BoundaryField {
    BoundaryField(DVector::from_iterator(
        mesh.num_boundary(),
        mesh.boundary_vertices()
            .iter()
            .map(|&p| f(&motion.h(t, &mesh.vertices()[p]))),
    ))
}

/// Moving-domain vertex positions `h(t, y_i)` with the nodal values.
pub fn pushforward_field(
    motion: &DomainMotion,
    mesh: &TriMesh,
    t: f64,
    v: &DVector<f64>,
) -> (Vec<Point>, Vec<f64>) {
    let positions = mesh.vertices().iter().map(|y| motion.h(t, y)).collect();
    (positions, v.iter().copied().collect())
}

/// Spatial boundary function paired with a time profile.
pub type SpaceFunction = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// `f(t, x) = sum_i profile_i(t) f_i(x)` evaluated on the moving boundary
/// and pulled back; the limit uses `h(inf, y) = y`.
pub struct PulledBackForcing {
    motion: DomainMotion,
    mesh: Arc<TriMesh>,
    mass: Arc<BoundaryMass>,
    terms: Vec<(SpaceFunction, TimeProfile)>,
}

impl PulledBackForcing {
    pub fn new(
        motion: DomainMotion,
        mesh: Arc<TriMesh>,
        mass: Arc<BoundaryMass>,
        terms: Vec<(SpaceFunction, TimeProfile)>,
    ) -> Self {
        PulledBackForcing { motion, mesh, mass, terms }
    }

    fn combine(&self, at: Option<f64>) -> BoundaryDual {
        let mut out = DVector::zeros(self.mesh.num_boundary());
        for (f, p) in &self.terms {
            let (weight, samples) = match at {
                Some(t) => (p.value(t), pullback_samples(&self.motion, &self.mesh, t, f.as_ref())),
                None => (p.limit(), pullback_samples(&DomainMotion::identity_unchecked(), &self.mesh, 0.0, f.as_ref())),
            };
            out.axpy(weight, self.mass.to_dual(&samples).values(), 1.0);
        }
        BoundaryDual(out)
    }
}

impl DomainMotion {
    fn identity_unchecked() -> Self {
        DomainMotion { kind: MotionKind::Identity, radius: 1.0, alpha: 1.0, t_star: 0.0 }
    }
}

impl Forcing for PulledBackForcing {
    fn at(&self, t: f64) -> Result<BoundaryDual> {
        Ok(self.combine(Some(t)))
    }

    fn limit(&self) -> Result<BoundaryDual> {
        Ok(self.combine(None))
    }
}

/// Sampled maxima of the quantities constrained by the motion assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSample {
    pub t: f64,
    pub jacobian_deviation: f64,
    pub second_difference: f64,
    pub dh_dt_max: f64,
    pub normal_speed: f64,
    pub normal_residual: f64,
    pub min_det: f64,
    pub min_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionReport {
    pub samples: Vec<MotionSample>,
    pub holder_h: f64,
    pub holder_dh_dt: f64,
    pub max_normal_residual: f64,
    pub max_normal_speed: f64,
    pub diffeomorphic: bool,
    pub positive_n: bool,
    pub speed_below_one: bool,
    pub starts_after_t_star: bool,
}

impl MotionReport {
    pub fn passed(&self) -> bool {
        self.diffeomorphic
            && self.positive_n
            && self.speed_below_one
            && self.starts_after_t_star
            && self.max_normal_residual <= crate::config::TOLERANCES.motion_normal_residual
            && self.holder_h.is_finite()
            && self.holder_dh_dt.is_finite()
    }
}

fn sample_points(radius: f64) -> (Vec<Point>, Vec<Point>) {
    let mut interior = vec![Point::zeros()];
    for ring in 1..=8 {
        let r = radius * ring as f64 / 8.0;
        for k in 0..16 {
            let a = std::f64::consts::TAU * (k as f64 + 0.5 * (ring % 2) as f64) / 16.0;
            interior.push(Point::new(r * a.cos(), r * a.sin()));
        }
    }
    let boundary = (0..64)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 64.0;
            Point::new(radius * a.cos(), radius * a.sin())
        })
        .collect();
    (interior, boundary)
}

/// Checks the motion assumptions on sampled times and points.
pub fn verify_motion_assumptions(motion: &DomainMotion, times: &[f64]) -> Result<MotionReport> {
    if times.is_empty() {
        return Err(Error::invalid("times", "need at least one time"));
    }
    let (interior, boundary) = sample_points(motion.radius());
    let step = 1e-4 * motion.radius();
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let mut s = MotionSample {
            t,
            jacobian_deviation: 0.0,
            second_difference: 0.0,
            dh_dt_max: 0.0,
            normal_speed: motion.normal_speed(t),
            normal_residual: 0.0,
            min_det: f64::INFINITY,
            min_n: f64::INFINITY,
        };
        for y in interior.iter().chain(&boundary) {
            let j = motion.jac(t, y);
            s.jacobian_deviation = s.jacobian_deviation.max((j - Matrix2::identity()).amax());
            s.min_det = s.min_det.min(j.determinant());
            s.dh_dt_max = s.dh_dt_max.max(motion.dh_dt(t, y).amax());
            for l in 0..2 {
                let mut e = Vector2::zeros();
                e[l] = step;
                let second = (motion.jac(t, &(y + e)) - motion.jac(t, &(y - e))) / (2.0 * step);
                s.second_difference = s.second_difference.max(second.amax());
            }
            if s.min_det > 0.0 {
                s.min_n = s.min_n.min(motion.normal_extension(t, y)?);
            }
        }
        for y in &boundary {
            let n = motion.moving_normal(t, y)?;
            let residual = motion.dh_dt(t, y) - n * s.normal_speed;
            s.normal_residual = s.normal_residual.max(residual.amax());
        }
        samples.push(s);
    }

    let alpha = motion.alpha();
    let mut holder_h: f64 = 0.0;
    let mut holder_dh_dt: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        for &s in &times[i + 1..] {
            let gap = (s - t).abs();
            if gap == 0.0 {
                continue;
            }
            let scale = gap.powf(alpha);
            for y in interior.iter().chain(&boundary) {
                holder_h = holder_h.max((motion.h(s, y) - motion.h(t, y)).amax() / scale);
                holder_dh_dt = holder_dh_dt.max((motion.dh_dt(s, y) - motion.dh_dt(t, y)).amax() / scale);
            }
        }
    }

    Ok(MotionReport {
        holder_h,
        holder_dh_dt,
        max_normal_residual: samples.iter().map(|s| s.normal_residual).fold(0.0, f64::max),
        max_normal_speed: samples.iter().map(|s| s.normal_speed.abs()).fold(0.0, f64::max),
        diffeomorphic: samples.iter().all(|s| s.min_det > 0.0),
        positive_n: samples.iter().all(|s| s.min_n > 0.0),
        speed_below_one: samples.iter().all(|s| s.normal_speed < 1.0),
        starts_after_t_star: times.iter().all(|&t| t >= motion.t_star()),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_form;
    use crate::coeffs::preset_laplace_shift;
    use crate::elliptic::EllipticSolver;
    use crate::mesh::generate_disk_mesh;

    fn dilation() -> DomainMotion {
        DomainMotion::radial_dilation(1.0, 1.0, 0.1, 1.0).unwrap()
    }

    fn probe_points() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(0.3, -0.2),
            Point::new(0.6, 0.1),
            Point::new(-0.5, 0.5),
            Point::new(0.8, 0.0),
            Point::new(0.0, -1.0),
            Point::new(0.6, 0.8),
        ]
    }

    #[test]
    fn identity_motion_is_trivial() {
        let m = DomainMotion::identity(1.0).unwrap();
        assert_eq!(m.t_star(), 0.0);
        for y in probe_points() {
            assert_eq!(m.normal_extension(2.0, &y).unwrap(), 1.0);
        }
        let fam = transformed_family(&m, -1.0).unwrap();
        let reference = preset_laplace_shift(-1.0).unwrap();
        for y in probe_points() {
            for t in [0.0, 1.0, 7.5] {
                assert_eq!(fam.eval(Time::At(t), &y).unwrap(), reference.eval(Time::At(t), &y).unwrap());
            }
        }
        let report = verify_motion_assumptions(&m, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(report.max_normal_residual, 0.0);
        assert_eq!(report.holder_h, 0.0);
        assert!(report.passed());
    }

    #[test]
    fn dilation_normal_extension_on_the_boundary() {
        let m = dilation();
        for t in [0.0f64, 0.5, 3.0] {
            let rho = 1.0 + 0.1 * (-t).exp();
            for a in [0.0f64, 1.0, 2.5] {
                let y = Point::new(a.cos(), a.sin());
                assert!((m.normal_extension(t, &y).unwrap() - rho).abs() < 1e-14);
            }
        }
        let far = normal_extension_n(&m, 30.0, &probe_points()).unwrap();
        assert!(far.iter().all(|&n| (n - 1.0).abs() < 1e-12 && n > 0.0));
    }

    #[test]
    fn dilation_coefficients_match_closed_form() {
        let rho0 = 1.3;
        let m = DomainMotion::radial_dilation(1.0, rho0, 0.0, 0.0).unwrap();
        assert_eq!(m.normal_speed(2.0), 0.0);
        for y in probe_points() {
            let s = m.transformed_sample(2.0, &y, -1.0).unwrap();
            let (chi, dchi) = m.chi(&y);
            let n = 1.0 + chi * (rho0 - 1.0);
            assert!((s.a - Matrix2::identity() * (n / (rho0 * rho0))).amax() < 1e-14);
            assert!((s.b - dchi * ((rho0 - 1.0) / (rho0 * rho0))).amax() < 1e-14);
            assert!((s.d - n).abs() < 1e-14);
        }
    }

    #[test]
    fn collar_divergence_matches_extrapolated_differences() {
        let m = DomainMotion::collar(1.0, 0.1, 1.5, 1.5).unwrap();
        let t = m.t_star() + 1.0;
        let central = |y: &Point, h: f64| {
            let mut out = Vector2::zeros();
            for l in 0..2 {
                let mut e = Vector2::zeros();
                e[l] = h;
                let plus = m.inverse_jacobian(t, &(y + e)).unwrap() * m.normal_extension(t, &(y + e)).unwrap();
                let minus = m.inverse_jacobian(t, &(y - e)).unwrap() * m.normal_extension(t, &(y - e)).unwrap();
                for j in 0..2 {
                    out[j] += (plus[(l, j)] - minus[(l, j)]) / (2.0 * h);
                }
            }
            out
        };
        for y in probe_points() {
            let div = m.divergence_gn(t, &y).unwrap();
            let reference = (central(&y, 1e-3) * 4.0 - central(&y, 2e-3)) / 3.0;
            assert!((div - reference).amax() < 1e-6, "{div} vs {reference}");
        }
    }

    #[test]
    fn transformed_family_converges_to_the_limit() {
        let mesh = generate_disk_mesh(1.0, 0.25).unwrap();
        let fam = transformed_family(&dilation(), -1.0).unwrap();
        let k_inf = assemble_form(&mesh, &fam, Time::Infinity).unwrap().to_dense();
        let reference = assemble_form(&mesh, &preset_laplace_shift(-1.0).unwrap(), Time::At(0.0)).unwrap().to_dense();
        assert!((&k_inf - &reference).amax() < 1e-14);
        let mut prev = f64::INFINITY;
        for t in [0.0, 2.0, 4.0, 8.0] {
            let k = assemble_form(&mesh, &fam, Time::At(t)).unwrap().to_dense();
            let diff = (k - &k_inf).amax();
            assert!(diff < prev);
            prev = diff;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn strong_conormal_cases() {
        let mesh = generate_disk_mesh(1.0, 0.2).unwrap();
        let id = DomainMotion::identity(1.0).unwrap();
        let x1 = DVector::from_iterator(mesh.num_vertices(), mesh.vertices().iter().map(|p| p.x));
        let c = strong_conormal_eval(&id, &mesh, 0.0, &x1).unwrap();
        for (b, &p) in mesh.boundary_vertices().iter().enumerate() {
            let y = mesh.vertices()[p];
            assert!((c[b] - y.x / y.norm()).abs() < 1e-10);
        }
        let ones = DVector::from_element(mesh.num_vertices(), 3.0);
        assert!(strong_conormal_eval(&dilation(), &mesh, 0.0, &ones).unwrap().amax() < 1e-12);
    }

    #[test]
    fn strong_and_weak_conormals_converge() {
        let m = dilation();
        let fam = transformed_family(&m, -1.0).unwrap();
        let mut errors = Vec::new();
        for h in [0.2, 0.1, 0.05] {
            let mesh = generate_disk_mesh(1.0, h).unwrap();
            let k = assemble_form(&mesh, &fam, Time::At(0.0)).unwrap();
            let solver = EllipticSolver::new(&mesh, k);
            let g = BoundaryField(DVector::from_iterator(
                mesh.num_boundary(),
                mesh.boundary_vertices().iter().map(|&p| {
                    let y = mesh.vertices()[p];
                    y.x + 0.5 * y.y * y.y
                }),
            ));
            let v = solver.solve_dirichlet(&g).unwrap();
            let mass = BoundaryMass::new(&mesh).unwrap();
            let weak = mass.to_field(&solver.weak_conormal(&v));
            let strong = strong_conormal_eval(&m, &mesh, 0.0, &v).unwrap();
            let diff = BoundaryField(weak.values() - strong.values());
            errors.push(mass.l2_norm(&diff) / mass.l2_norm(&strong));
        }
        assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
        assert!(errors[0] / errors[2] > 2.0, "{errors:?}");
    }

    #[test]
    fn pullback_cases() {
        let mesh = generate_disk_mesh(1.0, 0.3).unwrap();
        let mass = BoundaryMass::new(&mesh).unwrap();
        let id = DomainMotion::identity(1.0).unwrap();
        let f = |p: &Point| p.x * p.y + 1.0;
        let pulled = pullback_boundary_data(&id, &mesh, &mass, 1.0, &f);
        let direct = mass.to_dual(&BoundaryField(DVector::from_iterator(
            mesh.num_boundary(),
            mesh.boundary_vertices().iter().map(|&p| f(&mesh.vertices()[p])),
        )));
        assert_eq!(pulled, direct);
        let one = |_: &Point| 1.0;
        let ones = mass.to_dual(&BoundaryField(DVector::from_element(mesh.num_boundary(), 1.0)));
        assert_eq!(pullback_boundary_data(&dilation(), &mesh, &mass, 0.3, &one), ones);
        let double = DomainMotion::radial_dilation(1.0, 2.0, 0.0, 0.0).unwrap();
        let s = pullback_samples(&double, &mesh, 0.0, &|p: &Point| p.norm_squared());
        assert!(s.iter().all(|&v| (v - 4.0).abs() < 1e-12));
        let (pos, vals) = pushforward_field(&double, &mesh, 0.0, &DVector::from_element(mesh.num_vertices(), 1.5));
        assert_eq!(pos[mesh.boundary_vertices()[0]], mesh.vertices()[mesh.boundary_vertices()[0]] * 2.0);
        assert!(vals.iter().all(|&v| v == 1.5));
    }

    #[test]
    fn dilation_assumptions_hold() {
        let m = dilation();
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let report = verify_motion_assumptions(&m, &times).unwrap();
        assert!(report.max_normal_residual <= 1e-10);
        assert!((report.samples[2].normal_speed + 0.1 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(report.passed());
    }

    #[test]
    fn collar_motion_settles() {
        let m = DomainMotion::collar(1.0, 0.1, 1.5, 1.5).unwrap();
        let t0 = m.t_star();
        assert!(t0 > 0.0);
        let times: Vec<f64> = (0..40).map(|i| t0 + i as f64 * 2.5).collect();
        let report = verify_motion_assumptions(&m, &times).unwrap();
        assert!(report.passed(), "{:?}", report.max_normal_residual);
        let early: f64 = report.samples[..5].iter().map(|s| s.dh_dt_max).fold(0.0, f64::max);
        let late: f64 = report.samples[35..].iter().map(|s| s.dh_dt_max).fold(0.0, f64::max);
        assert!(late < 0.5 * early, "{early} {late}");
        assert!(DomainMotion::collar(1.0, 0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn transformed_identity_family_coercive_flags() {
        let fam = transformed_family(&DomainMotion::identity(1.0).unwrap(), -1.0).unwrap();
        assert!(fam.is_symmetric() && fam.is_time_constant());
        assert!(transformed_family(&dilation(), 0.5).is_err());
    }
}
