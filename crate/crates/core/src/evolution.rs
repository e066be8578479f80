//! Time integration of `du/dt + A(t) u = f(t)` on the boundary and the
//! stationary limit problem `A(inf) u_inf = f_inf`.
//!
//! Every step is one bulk solve of the shifted form `a_t - lambda (.,.)_{L2}`
//! with `lambda = -1/dt` (implicit Euler) or `lambda = -2/dt` (Crank-Nicolson),
//! so the discrete harmonic extension of the new state comes for free and is
//! used for the H1 diagnostics.

use std::sync::Arc;

use nalgebra::DVector;

use crate::assembly::{
    add_boundary_mass, assemble_form, assemble_h1_gram, embed_k, trace, BoundaryDual,
    BoundaryField, BoundaryMass, SparseOperator,
};
use crate::coeffs::{CoefficientFamily, Time};
use crate::elliptic::EllipticSolver;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn parse(name: &str) -> Result<Scheme> {
        match name {
            "implicit-euler" => Ok(Scheme::ImplicitEuler),
            "crank-nicolson" => Ok(Scheme::CrankNicolson),
            other => Err(Error::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Right-hand side `f(t)` given as boundary duals, with its `t -> inf` limit.
pub trait Forcing: Send + Sync {
    fn at(&self, t: f64) -> Result<BoundaryDual>;
    fn limit(&self) -> Result<BoundaryDual>;
}

/// Scalar time factor of a separable forcing term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    Zero,
    Const(f64),
    /// `exp(-gamma t)`, `gamma > 0`.
    DecayExp(f64),
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Const(c) => c,
            TimeProfile::DecayExp(gamma) => (-gamma * t).exp(),
        }
    }

    pub fn limit(&self) -> f64 {
        match *self {
            TimeProfile::Const(c) => c,
            TimeProfile::Zero | TimeProfile::DecayExp(_) => 0.0,
        }
    }
}

/// `f(t) = sum_i profile_i(t) F_i`.
#[derive(Debug, Clone)]
pub struct SeparableForcing {
    size: usize,
    terms: Vec<(BoundaryDual, TimeProfile)>,
}

impl SeparableForcing {
    pub fn zero(size: usize) -> Self {
        SeparableForcing { size, terms: Vec::new() }
    }

    pub fn new(size: usize, terms: Vec<(BoundaryDual, TimeProfile)>) -> Result<Self> {
        if terms.iter().any(|(f, _)| f.len() != size) {
            return Err(Error::Size("forcing term does not match the boundary size".into()));
        }
        if terms
            .iter()
            .any(|(_, p)| matches!(p, TimeProfile::DecayExp(g) if !(*g > 0.0)))
        {
            return Err(Error::invalid("forcing", "decay rate must be positive"));
        }
        Ok(SeparableForcing { size, terms })
    }

    fn combine(&self, weight: impl Fn(&TimeProfile) -> f64) -> BoundaryDual {
        let mut out = DVector::zeros(self.size);
        for (f, p) in &self.terms {
            out.axpy(weight(p), f.values(), 1.0);
        }
        BoundaryDual(out)
    }
}

impl Forcing for SeparableForcing {
    fn at(&self, t: f64) -> Result<BoundaryDual> {
        Ok(self.combine(|p| p.value(t)))
    }

    fn limit(&self) -> Result<BoundaryDual> {
        Ok(self.combine(TimeProfile::limit))
    }
}

/// Evolution parameters on the uniform grid `t0 + n dt`, `n = 0..=N`.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    /// Keep the bulk harmonic representatives of every state.
    pub keep_bulk: bool,
}

impl EvolutionConfig {
    /// Number of steps; `T - t0` must be an integer multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push("dt: must be positive".to_string());
        }
        if !(self.t_end >= self.t0) {
            problems.push("T: must satisfy T >= t0".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Scenario(problems));
        }
        let ratio = (self.t_end - self.t0) / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Scenario(vec![format!(
                "dt: T - t0 = {} is not a multiple of dt = {}",
                self.t_end - self.t0,
                self.dt
            )]));
        }
        Ok(n as usize)
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub u_l2_boundary: f64,
    pub u_h1_bulk: f64,
    pub dist_h1_to_uinf: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolutionSeries {
    pub times: Vec<f64>,
    pub states: Vec<BoundaryField>,
    pub bulk: Option<Vec<DVector<f64>>>,
    pub diagnostics: Vec<Diagnostics>,
}

impl EvolutionSeries {
    pub fn last(&self) -> &BoundaryField {
        self.states.last().expect("series holds the initial state")
    }

    /// CSV with header `t,u_l2_boundary,u_h1_bulk,dist_h1_to_uinf`; the
    /// distance column is empty when no stationary target was supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u_l2_boundary,u_h1_bulk,dist_h1_to_uinf\n");
        for d in &self.diagnostics {
            let dist = d.dist_h1_to_uinf.map(|v| format!("{v:.15e}")).unwrap_or_default();
            out.push_str(&format!(
                "{:.15e},{:.15e},{:.15e},{}\n",
                d.t, d.u_l2_boundary, d.u_h1_bulk, dist
            ));
        }
        out
    }
}

/// `u_inf` with `A(inf) u_inf = f_inf` and its bulk harmonic representative.
#[derive(Debug, Clone)]
pub struct StationaryTarget {
    pub field: BoundaryField,
    pub bulk: DVector<f64>,
}

/// Neumann solve of the `t = inf` snapshot.
pub fn stationary_target(
    mesh: &TriMesh,
    family: &CoefficientFamily,
    f_inf: &BoundaryDual,
) -> Result<StationaryTarget> {
    let k = assemble_form(mesh, family, Time::Infinity)?;
    let bulk = EllipticSolver::new(mesh, k).solve_neumann(f_inf)?;
    Ok(StationaryTarget { field: trace(mesh, &bulk), bulk })
}

pub fn stationary_solve(
    mesh: &TriMesh,
    family: &CoefficientFamily,
    f_inf: &BoundaryDual,
) -> Result<BoundaryField> {
    Ok(stationary_target(mesh, family, f_inf)?.field)
}

/// Shifted bulk solver `K(t) + (scale/dt) T^T M T`.
fn shifted_solver(mesh: &TriMesh, k: &SparseOperator, shift: f64) -> EllipticSolver<f64> {
    EllipticSolver::new(mesh, add_boundary_mass(mesh, k, shift))
}

/// One implicit Euler step `(A(t_next) + 1/dt) u = u_n/dt + f_next`.
pub fn step_implicit_euler(
    mesh: &TriMesh,
    family: &CoefficientFamily,
    u_n: &BoundaryField,
    t_next: f64,
    dt: f64,
    f_next: &BoundaryDual,
) -> Result<BoundaryField> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let mass = BoundaryMass::new(mesh)?;
    let k = assemble_form(mesh, family, Time::At(t_next))?;
    let solver = shifted_solver(mesh, &k, 1.0 / dt);
    let rhs = BoundaryDual(mass.to_dual(u_n).values() / dt + f_next.values());
    Ok(trace(mesh, &solver.solve_bulk(&embed_k(mesh, &rhs))?))
}

/// One Crank-Nicolson step
/// `(1/dt + A(t_next)/2) u = (1/dt - A(t_n)/2) u_n + f_mid`.
pub fn step_crank_nicolson(
    mesh: &TriMesh,
    family: &CoefficientFamily,
    u_n: &BoundaryField,
    t_n: f64,
    t_next: f64,
    dt: f64,
    f_mid: &BoundaryDual,
) -> Result<BoundaryField> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let mass = BoundaryMass::new(mesh)?;
    let k_n = assemble_form(mesh, family, Time::At(t_n))?;
    let prev = EllipticSolver::new(mesh, k_n);
    let a_un = prev.weak_conormal(&prev.solve_dirichlet(u_n)?);
    let k = assemble_form(mesh, family, Time::At(t_next))?;
    let solver = shifted_solver(mesh, &k, 2.0 / dt);
    let rhs = crank_nicolson_rhs(&mass, u_n, &a_un, f_mid, dt);
    Ok(trace(mesh, &solver.solve_bulk(&embed_k(mesh, &rhs))?))
}

fn crank_nicolson_rhs(
    mass: &BoundaryMass,
    u_n: &BoundaryField,
    a_un: &BoundaryDual,
    f_mid: &BoundaryDual,
    dt: f64,
) -> BoundaryDual {
    let mu = mass.to_dual(u_n);
    BoundaryDual((mu.values() / dt - a_un.values() * 0.5 + f_mid.values()) * 2.0)
}

/// Time stepper with factorizations reused across steps when the family is
/// time-constant.
struct Stepper<'a> {
    mesh: &'a TriMesh,
    family: &'a CoefficientFamily,
    scheme: Scheme,
    dt: f64,
    constant: Option<(SparseOperator, EllipticSolver<f64>)>,
}

impl<'a> Stepper<'a> {
    fn new(mesh: &'a TriMesh, family: &'a CoefficientFamily, scheme: Scheme, dt: f64) -> Result<Self> {
        let constant = if family.is_time_constant() {
            let k = assemble_form(mesh, family, Time::At(0.0))?;
            let solver = shifted_solver(mesh, &k, Self::shift(scheme, dt));
            Some((k, solver))
        } else {
            None
        };
        Ok(Stepper { mesh, family, scheme, dt, constant })
    }

    fn shift(scheme: Scheme, dt: f64) -> f64 {
        match scheme {
            Scheme::ImplicitEuler => 1.0 / dt,
            Scheme::CrankNicolson => 2.0 / dt,
        }
    }

    fn bulk_matrix(&self, t: f64) -> Result<SparseOperator> {
        match &self.constant {
            Some((k, _)) => Ok(k.clone()),
            None => assemble_form(self.mesh, self.family, Time::At(t)),
        }
    }

    /// Solves for the bulk harmonic representative of the next state, and
    /// returns it with the matrix `K(t_next)`.
    fn advance(&self, rhs: &BoundaryDual, t_next: f64) -> Result<(DVector<f64>, Option<SparseOperator>)> {
        let bulk_rhs = embed_k(self.mesh, rhs);
        match &self.constant {
            Some((_, solver)) => Ok((solver.solve_bulk(&bulk_rhs)?, None)),
            None => {
                let k = assemble_form(self.mesh, self.family, Time::At(t_next))?;
                let solver = shifted_solver(self.mesh, &k, Self::shift(self.scheme, self.dt));
                Ok((solver.solve_bulk(&bulk_rhs)?, Some(k)))
            }
        }
    }
}

/// Runs the scheme over `[t0, T]`, recording diagnostics after every step.
pub fn run_evolution(
    mesh: &Arc<TriMesh>,
    family: &CoefficientFamily,
    u0: &BoundaryField,
    forcing: &dyn Forcing,
    config: &EvolutionConfig,
    target: Option<&StationaryTarget>,
) -> Result<EvolutionSeries> {
    let steps = config.steps()?;
    if u0.len() != mesh.num_boundary() {
        return Err(Error::Size(format!(
            "initial state has {} entries, mesh has {} boundary vertices",
            u0.len(),
            mesh.num_boundary()
        )));
    }
    let mass = BoundaryMass::new(mesh)?;
    let gram = assemble_h1_gram(mesh);
    let stepper = Stepper::new(mesh, family, config.scheme, config.dt)?;

    let mut k_current = stepper.bulk_matrix(config.t0)?;
    let mut w = EllipticSolver::new(mesh, k_current.clone()).solve_dirichlet(u0)?;
    let mut u = u0.clone();

    let diagnose = |t: f64, u: &BoundaryField, w: &DVector<f64>| {
        let h1 = w.dot(&gram.apply(w)).max(0.0).sqrt();
        let dist = target.map(|tg| {
            let d = w - &tg.bulk;
            d.dot(&gram.apply(&d)).max(0.0).sqrt()
        });
        Diagnostics {
            t,
            u_l2_boundary: mass.l2_norm(u),
            u_h1_bulk: h1,
            dist_h1_to_uinf: dist,
        }
    };

    let mut series = EvolutionSeries {
        times: vec![config.t0],
        states: vec![u.clone()],
        bulk: config.keep_bulk.then(|| vec![w.clone()]),
        diagnostics: vec![diagnose(config.t0, &u, &w)],
    };

    for n in 0..steps {
        let t_n = config.time(n);
        let t_next = config.time(n + 1);
        let step = || -> Result<(DVector<f64>, Option<SparseOperator>)> {
            let rhs = match config.scheme {
                Scheme::ImplicitEuler => {
                    let f = forcing.at(t_next)?;
                    BoundaryDual(mass.to_dual(&u).values() / config.dt + f.values())
                }
                Scheme::CrankNicolson => {
                    let f = forcing.at(0.5 * (t_n + t_next))?;
                    let ku = k_current.apply(&w);
                    let a_un = BoundaryDual(DVector::from_iterator(
                        mesh.num_boundary(),
                        mesh.boundary_vertices().iter().map(|&v| ku[v]),
                    ));
                    crank_nicolson_rhs(&mass, &u, &a_un, &f, config.dt)
                }
            };
            stepper.advance(&rhs, t_next)
        };
        let (w_next, k_next) = step().map_err(|e| Error::Step {
            step: n + 1,
            source: Box::new(e),
        })?;
        w = w_next;
        if let Some(k) = k_next {
            k_current = k;
        }
        u = trace(mesh, &w);
        series.times.push(t_next);
        series.diagnostics.push(diagnose(t_next, &u, &w));
        series.states.push(u.clone());
        if let Some(bulk) = series.bulk.as_mut() {
            bulk.push(w.clone());
        }
    }
    Ok(series)
}

/// `(t, dist_H1(u(t), u_inf))` for every recorded step that carries a distance.
pub fn asymptotic_report(series: &EvolutionSeries) -> Vec<(f64, f64)> {
    series
        .diagnostics
        .iter()
        .filter_map(|d| d.dist_h1_to_uinf.map(|dist| (d.t, dist)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{preset_laplace_shift, preset_oscillating};
    use crate::dtn::DtnOperator;
    use crate::mesh::generate_disk_mesh;
    use crate::oracle::disk_dtn_eigenvalue;

    fn disk(h: f64) -> Arc<TriMesh> {
        Arc::new(generate_disk_mesh(1.0, h).unwrap())
    }

    fn cos_theta(mesh: &TriMesh) -> BoundaryField {
        BoundaryField(DVector::from_iterator(
            mesh.num_boundary(),
            mesh.boundary_vertices().iter().map(|&v| {
                let p = mesh.vertices()[v];
                p.y.atan2(p.x).cos()
            }),
        ))
    }

    #[test]
    fn implicit_euler_fixed_point_and_zero() {
        let mesh = disk(0.2);
        let fam = preset_oscillating(-1.0, 0.3, 1.0).unwrap();
        let op = DtnOperator::new(mesh.clone(), fam.clone(), Time::At(1.5)).unwrap();
        let u = cos_theta(&mesh);
        let f = op.apply(&u).unwrap();
        let next = step_implicit_euler(&mesh, &fam, &u, 1.5, 0.1, &f).unwrap();
        assert!((next.values() - u.values()).amax() < 1e-10);
        let nb = mesh.num_boundary();
        let zero = step_implicit_euler(&mesh, &fam, &BoundaryField::zeros(nb), 1.0, 0.1, &BoundaryDual::zeros(nb)).unwrap();
        assert_eq!(zero.amax(), 0.0);
        assert!(step_implicit_euler(&mesh, &fam, &u, 1.0, 0.0, &f).is_err());
    }

    #[test]
    fn eigenmode_recurrences() {
        let mesh = disk(0.2);
        let fam = preset_laplace_shift(-1.0).unwrap();
        let op = DtnOperator::new(mesh.clone(), fam.clone(), Time::At(0.0)).unwrap();
        let sp = op.spectrum().unwrap();
        let v = BoundaryField(sp.vectors.column(2).into_owned());
        let mu = sp.values[2];
        let dt = 0.1;
        let nb = mesh.num_boundary();
        let ie = step_implicit_euler(&mesh, &fam, &v, dt, dt, &BoundaryDual::zeros(nb)).unwrap();
        assert!((ie.values() - v.values() / (1.0 + dt * mu)).amax() < 1e-10);
        let cn = step_crank_nicolson(&mesh, &fam, &v, 0.0, dt, dt, &BoundaryDual::zeros(nb)).unwrap();
        let factor = (1.0 - dt * mu / 2.0) / (1.0 + dt * mu / 2.0);
        assert!((cn.values() - v.values() * factor).amax() < 1e-10);
        let zero = step_crank_nicolson(&mesh, &fam, &BoundaryField::zeros(nb), 0.0, dt, dt, &BoundaryDual::zeros(nb)).unwrap();
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn run_matches_single_steps() {
        let mesh = disk(0.25);
        let fam = preset_oscillating(-1.0, 0.3, 1.0).unwrap();
        let u0 = cos_theta(&mesh);
        let forcing = SeparableForcing::zero(mesh.num_boundary());
        for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
            let cfg = EvolutionConfig { t0: 0.5, t_end: 0.7, dt: 0.1, scheme, keep_bulk: true };
            let series = run_evolution(&mesh, &fam, &u0, &forcing, &cfg, None).unwrap();
            assert_eq!(series.times.len(), 3);
            let zero = BoundaryDual::zeros(mesh.num_boundary());
            let mut u = u0.clone();
            for n in 0..2 {
                let (t, tn) = (cfg.time(n), cfg.time(n + 1));
                u = match scheme {
                    Scheme::ImplicitEuler => step_implicit_euler(&mesh, &fam, &u, tn, 0.1, &zero).unwrap(),
                    Scheme::CrankNicolson => step_crank_nicolson(&mesh, &fam, &u, t, tn, 0.1, &zero).unwrap(),
                };
            }
            assert!((series.last().values() - u.values()).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_length_run_holds_only_the_initial_state() {
        let mesh = disk(0.3);
        let fam = preset_laplace_shift(-1.0).unwrap();
        let cfg = EvolutionConfig { t0: 1.0, t_end: 1.0, dt: 0.1, scheme: Scheme::ImplicitEuler, keep_bulk: false };
        let series = run_evolution(&mesh, &fam, &cos_theta(&mesh), &SeparableForcing::zero(mesh.num_boundary()), &cfg, None).unwrap();
        assert_eq!(series.states.len(), 1);
        assert!(asymptotic_report(&series).is_empty());
    }

    #[test]
    fn stationary_data_is_a_fixed_point() {
        let mesh = disk(0.25);
        let fam = preset_laplace_shift(-1.0).unwrap();
        let g = cos_theta(&mesh);
        let op = DtnOperator::new(mesh.clone(), fam.clone(), Time::Infinity).unwrap();
        let f_inf = op.apply(&g).unwrap();
        let forcing = SeparableForcing::new(mesh.num_boundary(), vec![(f_inf.clone(), TimeProfile::Const(1.0))]).unwrap();
        let target = stationary_target(&mesh, &fam, &forcing.limit().unwrap()).unwrap();
        let cfg = EvolutionConfig { t0: 0.0, t_end: 1.0, dt: 0.1, scheme: Scheme::ImplicitEuler, keep_bulk: false };
        let series = run_evolution(&mesh, &fam, &g, &forcing, &cfg, Some(&target)).unwrap();
        for s in &series.states {
            assert!((s.values() - g.values()).amax() < 1e-10);
        }
        assert!(asymptotic_report(&series).iter().all(|&(_, d)| d < 1e-9));
    }

    #[test]
    fn stationary_solve_cases() {
        let mesh = disk(0.05);
        let fam = preset_laplace_shift(-1.0).unwrap();
        let mass = BoundaryMass::new(&mesh).unwrap();
        let nb = mesh.num_boundary();
        assert_eq!(stationary_solve(&mesh, &fam, &BoundaryDual::zeros(nb)).unwrap().amax(), 0.0);
        let cos = cos_theta(&mesh);
        let f = mass.to_dual(&cos);
        let u = stationary_solve(&mesh, &fam, &f).unwrap();
        let expected = BoundaryField(cos.values() / disk_dtn_eigenvalue(-1.0, 1).unwrap());
        let diff = BoundaryField(u.values() - expected.values());
        assert!(mass.l2_norm(&diff) <= 0.02 * mass.l2_norm(&expected));
        let op = DtnOperator::new(mesh.clone(), fam, Time::Infinity).unwrap();
        assert!((op.apply(&u).unwrap().values() - f.values()).amax() <= 1e-10 * f.amax());
    }

    #[test]
    fn decay_distances_decrease_and_norms_are_stable() {
        let mesh = disk(0.2);
        let fam = preset_laplace_shift(-1.0).unwrap();
        let nb = mesh.num_boundary();
        let target = stationary_target(&mesh, &fam, &BoundaryDual::zeros(nb)).unwrap();
        let cfg = EvolutionConfig { t0: 0.0, t_end: 2.0, dt: 0.05, scheme: Scheme::ImplicitEuler, keep_bulk: false };
        let series = run_evolution(&mesh, &fam, &cos_theta(&mesh), &SeparableForcing::zero(nb), &cfg, Some(&target)).unwrap();
        let report = asymptotic_report(&series);
        assert_eq!(report.len(), series.times.len());
        for pair in report.windows(2) {
            assert!(pair[1].1 < pair[0].1);
        }
        for pair in series.diagnostics.windows(2) {
            assert!(pair[1].u_l2_boundary <= pair[0].u_l2_boundary);
        }
    }

    #[test]
    fn config_validation() {
        let bad = EvolutionConfig { t0: 0.0, t_end: 1.0, dt: 0.0, scheme: Scheme::ImplicitEuler, keep_bulk: false };
        match bad.steps() {
            Err(Error::Scenario(list)) => assert!(list[0].starts_with("dt")),
            other => panic!("{other:?}"),
        }
        let uneven = EvolutionConfig { dt: 0.3, ..bad.clone() };
        assert!(uneven.steps().is_err());
        let ok = EvolutionConfig { dt: 0.01, ..bad };
        assert_eq!(ok.steps().unwrap(), 100);
        assert_eq!(Scheme::parse("crank-nicolson").unwrap(), Scheme::CrankNicolson);
        assert!(Scheme::parse("rk4").is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let mesh = disk(0.25);
        let fam = preset_oscillating(-1.0, 0.3, 1.0).unwrap();
        let nb = mesh.num_boundary();
        let mass = BoundaryMass::new(&mesh).unwrap();
        let forcing = SeparableForcing::new(nb, vec![(mass.to_dual(&cos_theta(&mesh)), TimeProfile::DecayExp(1.0))]).unwrap();
        let cfg = EvolutionConfig { t0: 0.0, t_end: 0.5, dt: 0.05, scheme: Scheme::CrankNicolson, keep_bulk: false };
        let a = run_evolution(&mesh, &fam, &cos_theta(&mesh), &forcing, &cfg, None).unwrap();
        let b = run_evolution(&mesh, &fam, &cos_theta(&mesh), &forcing, &cfg, None).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("t,u_l2_boundary,u_h1_bulk,dist_h1_to_uinf\n"));
    }
}
