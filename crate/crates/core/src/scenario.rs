//! JSON scenarios: parsing with field-level validation, and the drivers that
//! turn a scenario into CSV tables, VTK snapshots and a pass/fail summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::assembly::{BoundaryField, BoundaryMass};
use crate::coeffs::{
    preset_laplace_shift, preset_oscillating, preset_skew_advection, CoefficientFamily, Time,
};
use crate::dtn::{DtnOperator, FractionalMethod};
use crate::error::{Error, Result};
use crate::evolution::{
    run_evolution, stationary_target, EvolutionConfig, EvolutionSeries, Forcing, Scheme,
    StationaryTarget, TimeProfile,
};
use crate::mesh::{generate_disk_mesh, generate_square_mesh, load_mesh, Point, TriMesh};
use crate::motion::{
    pullback_samples, pushforward_field, transformed_family, verify_motion_assumptions,
    DomainMotion, PulledBackForcing, SpaceFunction,
};
use crate::output::write_vtk;
use crate::verify::{
    adjoint_fractional_identity_check, coercivity_constant, default_lambda_grid,
    operator_holder_estimate, relative_change, sectoriality_sweep, yagi_condition_check, NormKind,
    NormSystem, PairEstimate,
};

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Disk { radius: f64, h: f64 },
    Square { side: f64, n: usize },
    File { path: PathBuf },
}

impl MeshSpec {
    pub fn build(&self) -> Result<TriMesh> {
        match self {
            MeshSpec::Disk { radius, h } => generate_disk_mesh(*radius, *h),
            MeshSpec::Square { side, n } => generate_square_mesh(*side, *n),
            MeshSpec::File { path } => {
                let mesh = load_mesh(&fs::read_to_string(path)?)?;
                mesh.validate()?;
                Ok(mesh)
            }
        }
    }

    /// The same generator with the mesh size halved; file meshes cannot be refined.
    pub fn refined(&self) -> Option<MeshSpec> {
        match self {
            MeshSpec::Disk { radius, h } => Some(MeshSpec::Disk { radius: *radius, h: h / 2.0 }),
            MeshSpec::Square { side, n } => Some(MeshSpec::Square { side: *side, n: 2 * n }),
            MeshSpec::File { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    LaplaceShift { lambda: f64 },
    Oscillating { lambda: f64, eps: f64, decay: f64 },
    SkewAdvection { lambda: f64, beta: [f64; 2] },
    /// The transformed family of the scenario's motion.
    Motion { lambda: f64 },
}

impl FamilySpec {
    pub fn lambda(&self) -> f64 {
        match *self {
            FamilySpec::LaplaceShift { lambda }
            | FamilySpec::Oscillating { lambda, .. }
            | FamilySpec::SkewAdvection { lambda, .. }
            | FamilySpec::Motion { lambda } => lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionSpec {
    Identity,
    RadialDilation { rho0: f64, amp: f64, rate: f64 },
    Collar { eps: f64, alpha: f64, beta: f64 },
}

impl MotionSpec {
    pub fn build(&self, radius: f64) -> Result<DomainMotion> {
        match *self {
            MotionSpec::Identity => DomainMotion::identity(radius),
            MotionSpec::RadialDilation { rho0, amp, rate } => {
                DomainMotion::radial_dilation(radius, rho0, amp, rate)
            }
            MotionSpec::Collar { eps, alpha, beta } => DomainMotion::collar(radius, eps, alpha, beta),
        }
    }
}

/// A named spatial function paired with a time profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTerm {
    pub space: String,
    pub time: TimeProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub csv: String,
    pub snapshot_every: usize,
    pub vtk: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySpec {
    pub sectoriality: bool,
    pub holder: bool,
    pub yagi: bool,
    pub adjoint: bool,
    pub coercivity: bool,
    pub motion: bool,
    /// Snapshot times for the sectoriality and coercivity checks.
    pub times: Vec<Time>,
    /// Repeat the sectoriality sweep on the refined mesh.
    pub refine: bool,
    /// Pair checks run on `[t0, t0 + pair_span]` with spacings `pair_spacing`
    /// and `pair_spacing / 2`.
    pub pair_span: f64,
    pub pair_spacing: f64,
    pub nu_exponent: f64,
    pub thetas: Vec<f64>,
    pub trials: usize,
}

impl VerifySpec {
    pub fn any(&self) -> bool {
        self.sectoriality || self.holder || self.yagi || self.adjoint || self.coercivity || self.motion
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub dist_h1_to_uinf: Option<f64>,
    /// Distances must decrease monotonically from this time on.
    pub monotone_after: Option<f64>,
    pub coercivity: f64,
    pub refinement_change: f64,
    pub pair_change: f64,
    pub adjoint: f64,
    pub fractional_agreement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mesh: MeshSpec,
    pub family: FamilySpec,
    pub motion: Option<MotionSpec>,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub initial: String,
    pub forcing: Vec<ForcingTerm>,
    pub output: OutputSpec,
    pub verify: VerifySpec,
    pub thresholds: Thresholds,
}

// ---------------------------------------------------------------------------
// parsing

struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, field: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], path: &str, errs: &mut Errors) {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            errs.push(&join(path, key), "unknown field");
        }
    }
}

fn get_num(obj: &Map<String, Value>, key: &str, path: &str, default: Option<f64>, errs: &mut Errors) -> Option<f64> {
    match obj.get(key) {
        None => {
            if default.is_none() {
                errs.push(&join(path, key), "missing");
            }
            default
        }
        Some(v) => match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                errs.push(&join(path, key), "must be a finite number");
                None
            }
        },
    }
}

fn get_str<'a>(obj: &'a Map<String, Value>, key: &str, path: &str, errs: &mut Errors) -> Option<&'a str> {
    match obj.get(key) {
        None => {
            errs.push(&join(path, key), "missing");
            None
        }
        Some(Value::String(s)) => Some(s),
        Some(_) => {
            errs.push(&join(path, key), "must be a string");
            None
        }
    }
}

fn get_bool(obj: &Map<String, Value>, key: &str, path: &str, errs: &mut Errors) -> bool {
    match obj.get(key) {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            errs.push(&join(path, key), "must be a boolean");
            false
        }
    }
}

fn get_count(obj: &Map<String, Value>, key: &str, path: &str, default: usize, errs: &mut Errors) -> usize {
    match obj.get(key) {
        None => default,
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 => n as usize,
            _ => {
                errs.push(&join(path, key), "must be a positive integer");
                default
            }
        },
    }
}

fn as_object<'a>(v: &'a Value, path: &str, errs: &mut Errors) -> Option<&'a Map<String, Value>> {
    let obj = v.as_object();
    if obj.is_none() {
        errs.push(path, "must be an object");
    }
    obj
}

fn parse_mesh(v: &Value, errs: &mut Errors) -> Option<MeshSpec> {
    let path = "mesh";
    let obj = as_object(v, path, errs)?;
    match get_str(obj, "generator", path, errs)? {
        "disk" => {
            check_keys(obj, &["generator", "radius", "h"], path, errs);
            let radius = get_num(obj, "radius", path, Some(1.0), errs);
            let h = get_num(obj, "h", path, None, errs);
            let (radius, h) = (radius?, h?);
            if !(radius > 0.0) {
                errs.push("mesh.radius", "must be positive");
            }
            if !(h > 0.0 && h < radius) {
                errs.push("mesh.h", "must satisfy 0 < h < radius");
            }
            Some(MeshSpec::Disk { radius, h })
        }
        "square" => {
            check_keys(obj, &["generator", "side", "n"], path, errs);
            let side = get_num(obj, "side", path, Some(1.0), errs)?;
            if !(side > 0.0) {
                errs.push("mesh.side", "must be positive");
            }
            if !obj.contains_key("n") {
                errs.push("mesh.n", "missing");
                return None;
            }
            let n = get_count(obj, "n", path, 1, errs);
            Some(MeshSpec::Square { side, n })
        }
        "file" => {
            check_keys(obj, &["generator", "path"], path, errs);
            let p = get_str(obj, "path", path, errs)?;
            Some(MeshSpec::File { path: PathBuf::from(p) })
        }
        other => {
            errs.push("mesh.generator", format!("unknown generator `{other}` (disk, square, file)"));
            None
        }
    }
}

fn parse_family(v: &Value, errs: &mut Errors) -> Option<FamilySpec> {
    let path = "family";
    let obj = as_object(v, path, errs)?;
    let preset = get_str(obj, "preset", path, errs)?;
    let lambda = get_num(obj, "lambda", path, None, errs);
    if let Some(l) = lambda {
        if !(l < 0.0) {
            errs.push("family.lambda", "must be negative");
        }
    }
    let spec = match preset {
        "laplace_shift" => {
            check_keys(obj, &["preset", "lambda"], path, errs);
            FamilySpec::LaplaceShift { lambda: lambda? }
        }
        "oscillating" => {
            check_keys(obj, &["preset", "lambda", "eps", "decay"], path, errs);
            let eps = get_num(obj, "eps", path, None, errs);
            let decay = get_num(obj, "decay", path, Some(1.0), errs);
            if let Some(e) = eps {
                if !(e.abs() < 1.0) {
                    errs.push("family.eps", "must satisfy |eps| < 1");
                }
            }
            if let Some(d) = decay {
                if !(d > 0.0) {
                    errs.push("family.decay", "must be positive");
                }
            }
            FamilySpec::Oscillating { lambda: lambda?, eps: eps?, decay: decay? }
        }
        "skew_advection" => {
            check_keys(obj, &["preset", "lambda", "beta"], path, errs);
            let beta = match obj.get("beta").and_then(Value::as_array) {
                Some(a) if a.len() == 2 && a.iter().all(|x| x.as_f64().is_some_and(f64::is_finite)) => {
                    [a[0].as_f64().unwrap(), a[1].as_f64().unwrap()]
                }
                _ => {
                    errs.push("family.beta", "must be an array of two finite numbers");
                    return None;
                }
            };
            FamilySpec::SkewAdvection { lambda: lambda?, beta }
        }
        "motion" => {
            check_keys(obj, &["preset", "lambda"], path, errs);
            FamilySpec::Motion { lambda: lambda? }
        }
        other => {
            errs.push(
                "family.preset",
                format!("unknown preset `{other}` (laplace_shift, oscillating, skew_advection, motion)"),
            );
            return None;
        }
    };
    Some(spec)
}

fn parse_motion(v: &Value, errs: &mut Errors) -> Option<MotionSpec> {
    let path = "motion";
    let obj = as_object(v, path, errs)?;
    let spec = match get_str(obj, "preset", path, errs)? {
        "identity" => {
            check_keys(obj, &["preset"], path, errs);
            MotionSpec::Identity
        }
        "radial_dilation" => {
            check_keys(obj, &["preset", "rho0", "amp", "rate"], path, errs);
            let rho0 = get_num(obj, "rho0", path, Some(1.0), errs);
            let amp = get_num(obj, "amp", path, None, errs);
            let rate = get_num(obj, "rate", path, Some(1.0), errs);
            MotionSpec::RadialDilation { rho0: rho0?, amp: amp?, rate: rate? }
        }
        "collar" => {
            check_keys(obj, &["preset", "eps", "alpha", "beta"], path, errs);
            let eps = get_num(obj, "eps", path, None, errs);
            let alpha = get_num(obj, "alpha", path, None, errs);
            let beta = get_num(obj, "beta", path, None, errs);
            MotionSpec::Collar { eps: eps?, alpha: alpha?, beta: beta? }
        }
        other => {
            errs.push(
                "motion.preset",
                format!("unknown preset `{other}` (identity, radial_dilation, collar)"),
            );
            return None;
        }
    };
    Some(spec)
}

/// Spatial functions of a point, selected by name.
pub fn named_function(name: &str) -> Result<SpaceFunction> {
    let bad = |reason: &str| Error::invalid("function", format!("`{name}`: {reason}"));
    let theta = |p: &Point| p.y.atan2(p.x);
    let f: SpaceFunction = match name {
        "zero" => Arc::new(|_: &Point| 0.0),
        "cos_theta" => Arc::new(move |p: &Point| theta(p).cos()),
        "sin_theta" => Arc::new(move |p: &Point| theta(p).sin()),
        "r2" => Arc::new(|p: &Point| p.x * p.x + p.y * p.y),
        "x1" => Arc::new(|p: &Point| p.x),
        "x2" => Arc::new(|p: &Point| p.y),
        _ => match name.split_once(':') {
            Some(("const", c)) => {
                let c: f64 = c.parse().map_err(|_| bad("constant is not a number"))?;
                if !c.is_finite() {
                    return Err(bad("constant must be finite"));
                }
                Arc::new(move |_: &Point| c)
            }
            Some(("cos_ktheta", k)) => {
                let k: u32 = k.parse().map_err(|_| bad("k must be a non-negative integer"))?;
                Arc::new(move |p: &Point| (k as f64 * theta(p)).cos())
            }
            _ => {
                return Err(bad(
                    "unknown (zero, const:c, cos_theta, sin_theta, cos_ktheta:k, r2, x1, x2)",
                ))
            }
        },
    };
    Ok(f)
}

/// Time profiles `zero`, `const:c` and `decay_exp:gamma`.
pub fn parse_time_profile(name: &str) -> Result<TimeProfile> {
    let bad = |reason: &str| Error::invalid("profile", format!("`{name}`: {reason}"));
    let number = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad("parameter is not a finite number"))
    };
    match name.split_once(':') {
        None if name == "zero" => Ok(TimeProfile::Zero),
        Some(("const", c)) => Ok(TimeProfile::Const(number(c)?)),
        Some(("decay_exp", g)) => {
            let g = number(g)?;
            if g > 0.0 {
                Ok(TimeProfile::DecayExp(g))
            } else {
                Err(bad("decay rate must be positive"))
            }
        }
        _ => Err(bad("unknown (zero, const:c, decay_exp:gamma)")),
    }
}

fn parse_forcing(v: &Value, errs: &mut Errors) -> Vec<ForcingTerm> {
    let Some(items) = v.as_array() else {
        errs.push("forcing", "must be an array of {space, time} terms");
        return Vec::new();
    };
    let mut terms = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("forcing[{i}]");
        let Some(obj) = as_object(item, &path, errs) else { continue };
        check_keys(obj, &["space", "time"], &path, errs);
        let space = get_str(obj, "space", &path, errs);
        if let Some(s) = space {
            if let Err(e) = named_function(s) {
                errs.push(&join(&path, "space"), e);
            }
        }
        let time = match obj.get("time") {
            None => Some(TimeProfile::Const(1.0)),
            Some(Value::String(s)) => parse_time_profile(s).map_err(|e| errs.push(&join(&path, "time"), e)).ok(),
            Some(_) => {
                errs.push(&join(&path, "time"), "must be a string");
                None
            }
        };
        if let (Some(space), Some(time)) = (space, time) {
            terms.push(ForcingTerm { space: space.to_string(), time });
        }
    }
    terms
}

fn parse_output(v: Option<&Value>, errs: &mut Errors) -> OutputSpec {
    let mut out = OutputSpec { csv: "series.csv".into(), snapshot_every: 10, vtk: None };
    let Some(v) = v else { return out };
    let Some(obj) = as_object(v, "output", errs) else { return out };
    check_keys(obj, &["csv", "snapshot_every", "vtk"], "output", errs);
    if obj.contains_key("csv") {
        if let Some(s) = get_str(obj, "csv", "output", errs) {
            out.csv = s.to_string();
        }
    }
    out.snapshot_every = get_count(obj, "snapshot_every", "output", 10, errs);
    if obj.contains_key("vtk") {
        out.vtk = get_str(obj, "vtk", "output", errs).map(str::to_string);
    }
    out
}

fn parse_time_value(v: &Value) -> Option<Time> {
    match v {
        Value::String(s) if s == "inf" => Some(Time::Infinity),
        _ => v.as_f64().filter(|t| t.is_finite()).map(Time::At),
    }
}

fn parse_verify(v: Option<&Value>, t0: f64, errs: &mut Errors) -> VerifySpec {
    let mut spec = VerifySpec {
        sectoriality: false,
        holder: false,
        yagi: false,
        adjoint: false,
        coercivity: false,
        motion: false,
        times: vec![Time::At(t0), Time::At(t0 + 1.0), Time::At(t0 + 10.0), Time::Infinity],
        refine: false,
        pair_span: 2.0,
        pair_spacing: 0.5,
        nu_exponent: 0.4,
        thetas: vec![0.25, 0.5, 0.75],
        trials: 20,
    };
    let Some(v) = v else { return spec };
    let path = "verify";
    let Some(obj) = as_object(v, path, errs) else { return spec };
    check_keys(
        obj,
        &[
            "sectoriality", "holder", "yagi", "adjoint", "coercivity", "motion", "times", "refine",
            "pair_span", "pair_spacing", "nu_exponent", "thetas", "trials",
        ],
        path,
        errs,
    );
    spec.sectoriality = get_bool(obj, "sectoriality", path, errs);
    spec.holder = get_bool(obj, "holder", path, errs);
    spec.yagi = get_bool(obj, "yagi", path, errs);
    spec.adjoint = get_bool(obj, "adjoint", path, errs);
    spec.coercivity = get_bool(obj, "coercivity", path, errs);
    spec.motion = get_bool(obj, "motion", path, errs);
    spec.refine = get_bool(obj, "refine", path, errs);
    if let Some(times) = obj.get("times") {
        match times.as_array().map(|a| a.iter().map(parse_time_value).collect::<Option<Vec<_>>>()) {
            Some(Some(t)) if !t.is_empty() => spec.times = t,
            _ => errs.push("verify.times", "must be a non-empty array of numbers or \"inf\""),
        }
    }
    for t in &spec.times {
        if let Time::At(t) = t {
            if *t < t0 {
                errs.push("verify.times", format!("time {t} precedes t0 = {t0}"));
            }
        }
    }
    if let Some(x) = get_num(obj, "pair_span", path, Some(spec.pair_span), errs) {
        spec.pair_span = x;
        if !(x > 0.0) {
            errs.push("verify.pair_span", "must be positive");
        }
    }
    if let Some(x) = get_num(obj, "pair_spacing", path, Some(spec.pair_spacing), errs) {
        spec.pair_spacing = x;
        if !(x > 0.0 && x <= spec.pair_span / 2.0) {
            errs.push("verify.pair_spacing", "must satisfy 0 < pair_spacing <= pair_span / 2");
        }
    }
    if let Some(x) = get_num(obj, "nu_exponent", path, Some(spec.nu_exponent), errs) {
        spec.nu_exponent = x;
        if !(x > 0.0 && x < 0.5) {
            errs.push("verify.nu_exponent", "must lie in ]0, 1/2[");
        }
    }
    if let Some(thetas) = obj.get("thetas") {
        match thetas.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>()) {
            Some(Some(t)) if !t.is_empty() && t.iter().all(|&x| x > 0.0 && x < 1.0) => spec.thetas = t,
            _ => errs.push("verify.thetas", "must be a non-empty array of numbers in ]0, 1["),
        }
    }
    spec.trials = get_count(obj, "trials", path, spec.trials, errs);
    spec
}

fn parse_thresholds(v: Option<&Value>, has_motion: bool, errs: &mut Errors) -> Thresholds {
    let mut th = Thresholds {
        dist_h1_to_uinf: None,
        monotone_after: None,
        coercivity: if has_motion { 0.25 } else { 0.5 },
        refinement_change: 0.10,
        pair_change: 0.5,
        adjoint: 1e-6,
        fractional_agreement: 1e-6,
    };
    let Some(v) = v else { return th };
    let path = "thresholds";
    let Some(obj) = as_object(v, path, errs) else { return th };
    check_keys(
        obj,
        &[
            "dist_h1_to_uinf", "monotone_after", "coercivity", "refinement_change", "pair_change",
            "adjoint", "fractional_agreement",
        ],
        path,
        errs,
    );
    if obj.contains_key("dist_h1_to_uinf") {
        th.dist_h1_to_uinf = get_num(obj, "dist_h1_to_uinf", path, None, errs);
    }
    if obj.contains_key("monotone_after") {
        th.monotone_after = get_num(obj, "monotone_after", path, None, errs);
    }
    let mut set = |key: &str, slot: &mut f64| {
        if let Some(x) = get_num(obj, key, path, Some(*slot), errs) {
            *slot = x;
        }
    };
    set("coercivity", &mut th.coercivity);
    set("refinement_change", &mut th.refinement_change);
    set("pair_change", &mut th.pair_change);
    set("adjoint", &mut th.adjoint);
    set("fractional_agreement", &mut th.fractional_agreement);
    th
}

/// Parses and validates a scenario; every violated field is reported.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let root: Value = serde_json::from_str(text)?;
    let mut errs = Errors(Vec::new());
    let Some(obj) = root.as_object() else {
        return Err(Error::Scenario(vec!["scenario: must be a JSON object".into()]));
    };
    check_keys(
        obj,
        &[
            "mesh", "family", "motion", "t0", "T", "dt", "scheme", "initial", "forcing", "output",
            "verify", "thresholds",
        ],
        "",
        &mut errs,
    );
    let mesh = match obj.get("mesh") {
        Some(v) => parse_mesh(v, &mut errs),
        None => {
            errs.push("mesh", "missing");
            None
        }
    };
    let family = match obj.get("family") {
        Some(v) => parse_family(v, &mut errs),
        None => {
            errs.push("family", "missing");
            None
        }
    };
    let motion = obj.get("motion").and_then(|v| parse_motion(v, &mut errs));
    let t0 = get_num(obj, "t0", "", Some(0.0), &mut errs).unwrap_or(0.0);
    let t_end = get_num(obj, "T", "", None, &mut errs);
    let dt = get_num(obj, "dt", "", None, &mut errs);
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            errs.push("dt", "must be positive");
        }
    }
    if let Some(t) = t_end {
        if !(t >= t0) {
            errs.push("T", format!("must satisfy T >= t0 = {t0}"));
        }
    }
    if let (Some(t), Some(dt)) = (t_end, dt) {
        if dt > 0.0 && t >= t0 {
            let config = EvolutionConfig { t0, t_end: t, dt, scheme: Scheme::ImplicitEuler, keep_bulk: false };
            if let Err(Error::Scenario(list)) = config.steps() {
                errs.0.extend(list);
            }
        }
    }
    let scheme = match obj.get("scheme") {
        None => Some(Scheme::ImplicitEuler),
        Some(Value::String(s)) => Scheme::parse(s).map_err(|e| errs.push("scheme", e)).ok(),
        Some(_) => {
            errs.push("scheme", "must be a string");
            None
        }
    };
    let initial = match obj.get("initial") {
        None => Some("zero".to_string()),
        Some(Value::String(s)) => match named_function(s) {
            Ok(_) => Some(s.clone()),
            Err(e) => {
                errs.push("initial", e);
                None
            }
        },
        Some(_) => {
            errs.push("initial", "must be a string");
            None
        }
    };
    let forcing = obj.get("forcing").map(|v| parse_forcing(v, &mut errs)).unwrap_or_default();
    let output = parse_output(obj.get("output"), &mut errs);
    let verify = parse_verify(obj.get("verify"), t0, &mut errs);
    let thresholds = parse_thresholds(obj.get("thresholds"), motion.is_some(), &mut errs);

    // cross-field rules
    match (&family, &motion) {
        (Some(FamilySpec::Motion { .. }), None) => {
            errs.push("motion", "the `motion` family preset needs a motion section")
        }
        (Some(f), Some(_)) if !matches!(f, FamilySpec::Motion { .. }) => {
            errs.push("family.preset", "a scenario with a motion must use the `motion` family preset")
        }
        _ => {}
    }
    if let (Some(m), Some(mesh)) = (&motion, &mesh) {
        let radius = match mesh {
            MeshSpec::Disk { radius, .. } => Some(*radius),
            _ => {
                errs.push("mesh.generator", "motions are defined on disk meshes only");
                None
            }
        };
        if let Some(radius) = radius.filter(|r| *r > 0.0) {
            match m.build(radius) {
                Ok(dm) => {
                    if t0 < dm.t_star() {
                        errs.push(
                            "t0",
                            format!(
                                "t0 = {t0} violates the t_star rule: a motion needs t0 >= t_star = {}",
                                dm.t_star()
                            ),
                        );
                    }
                }
                Err(e) => errs.push("motion", e),
            }
        }
    }
    if verify.motion && motion.is_none() {
        errs.push("verify.motion", "needs a motion section");
    }

    if !errs.0.is_empty() {
        return Err(Error::Scenario(errs.0));
    }
    Ok(Scenario {
        mesh: mesh.expect("validated"),
        family: family.expect("validated"),
        motion,
        t0,
        t_end: t_end.expect("validated"),
        dt: dt.expect("validated"),
        scheme: scheme.expect("validated"),
        initial: initial.expect("validated"),
        forcing,
        output,
        verify,
        thresholds,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// running

/// Output directory and RNG seed shared by every driver.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunContext {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        RunContext { out_dir: out_dir.into(), seed }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        Ok(path)
    }
}

/// One boolean per executed check, in name order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    pub checks: BTreeMap<String, bool>,
}

impl Summary {
    pub fn record(&mut self, name: impl Into<String>, passed: bool) {
        self.checks.insert(name.into(), passed);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.values().all(|&b| b)
    }

    pub fn merge(&mut self, other: Summary) {
        self.checks.extend(other.checks);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.checks).expect("string keys and booleans");
        s.push('\n');
        s
    }
}

/// Verification checks selectable individually from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Sectoriality,
    Holder,
    Yagi,
    Adjoint,
    Coercivity,
    Motion,
}

impl Check {
    pub fn enabled(self, spec: &VerifySpec) -> bool {
        match self {
            Check::Sectoriality => spec.sectoriality,
            Check::Holder => spec.holder,
            Check::Yagi => spec.yagi,
            Check::Adjoint => spec.adjoint,
            Check::Coercivity => spec.coercivity,
            Check::Motion => spec.motion,
        }
    }

    pub const ALL: [Check; 6] = [
        Check::Sectoriality,
        Check::Holder,
        Check::Yagi,
        Check::Adjoint,
        Check::Coercivity,
        Check::Motion,
    ];
}

/// Mesh, motion and family built from a scenario.
pub struct Setup {
    pub mesh: Arc<TriMesh>,
    pub mass: Arc<BoundaryMass>,
    pub motion: Option<DomainMotion>,
    pub family: CoefficientFamily,
}

fn build_family(spec: &FamilySpec, motion: Option<&DomainMotion>) -> Result<CoefficientFamily> {
    match *spec {
        FamilySpec::LaplaceShift { lambda } => preset_laplace_shift(lambda),
        FamilySpec::Oscillating { lambda, eps, decay } => preset_oscillating(lambda, eps, decay),
        FamilySpec::SkewAdvection { lambda, beta } => preset_skew_advection(lambda, beta),
        FamilySpec::Motion { lambda } => {
            let motion = motion.ok_or_else(|| Error::Scenario(vec!["motion: missing".into()]))?;
            transformed_family(motion, lambda)
        }
    }
}

impl Setup {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_mesh(scenario, &scenario.mesh)
    }

    pub fn with_mesh(scenario: &Scenario, mesh_spec: &MeshSpec) -> Result<Self> {
        let mesh = Arc::new(mesh_spec.build()?);
        let mass = Arc::new(BoundaryMass::new(&mesh)?);
        let motion = match (&scenario.motion, mesh_spec) {
            (Some(m), MeshSpec::Disk { radius, .. }) => Some(m.build(*radius)?),
            (Some(_), _) => return Err(Error::Unsupported("motions need a disk mesh".into())),
            (None, _) => None,
        };
        let family = build_family(&scenario.family, motion.as_ref())?;
        Ok(Setup { mesh, mass, motion, family })
    }

    /// The motion driving data evaluation; the identity for cylinders.
    fn data_motion(&self) -> Result<DomainMotion> {
        match &self.motion {
            Some(m) => Ok(m.clone()),
            None => DomainMotion::identity(1.0),
        }
    }

    /// Family whose `t = inf` snapshot defines the stationary target.
    fn limit_family(&self, scenario: &Scenario) -> Result<CoefficientFamily> {
        match scenario.family {
            FamilySpec::Motion { lambda } => preset_laplace_shift(lambda),
            _ => Ok(self.family.clone()),
        }
    }

    pub fn forcing(&self, scenario: &Scenario) -> Result<PulledBackForcing> {
        let terms = scenario
            .forcing
            .iter()
            .map(|t| Ok((named_function(&t.space)?, t.time)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PulledBackForcing::new(self.data_motion()?, self.mesh.clone(), self.mass.clone(), terms))
    }

    pub fn initial(&self, scenario: &Scenario) -> Result<BoundaryField> {
        let u0 = named_function(&scenario.initial)?;
        Ok(pullback_samples(&self.data_motion()?, &self.mesh, scenario.t0, u0.as_ref()))
    }

    pub fn stationary(&self, scenario: &Scenario) -> Result<StationaryTarget> {
        let f_inf = self.forcing(scenario)?.limit()?;
        stationary_target(&self.mesh, &self.limit_family(scenario)?, &f_inf)
    }
}

fn fmt_time(t: Time) -> String {
    match t {
        Time::At(t) => format!("{t:.15e}"),
        Time::Infinity => "inf".into(),
    }
}

/// Evolution plus any enabled verification. `evolve` and `noncyl-evolve`
/// both land here; `expect_motion` states which one was asked for.
pub fn run_evolve(scenario: &Scenario, ctx: &RunContext, expect_motion: bool) -> Result<Summary> {
    match (expect_motion, scenario.motion.is_some()) {
        (false, true) => {
            return Err(Error::Scenario(vec![
                "motion: scenario has a motion; use noncyl-evolve".into()
            ]))
        }
        (true, false) => {
            return Err(Error::Scenario(vec![
                "motion: noncyl-evolve needs a motion section".into()
            ]))
        }
        _ => {}
    }
    let setup = Setup::new(scenario)?;
    let mut summary = Summary::default();
    let config = EvolutionConfig {
        t0: scenario.t0,
        t_end: scenario.t_end,
        dt: scenario.dt,
        scheme: scenario.scheme,
        keep_bulk: scenario.output.vtk.is_some(),
    };
    if config.steps()? > 0 {
        let series = evolve(&setup, scenario, &config)?;
        ctx.write(&scenario.output.csv, &series.to_csv())?;
        if let Some(prefix) = &scenario.output.vtk {
            write_snapshots(&setup, &series, prefix, scenario.output.snapshot_every, ctx)?;
        }
        let dists: Vec<(f64, f64)> = crate::evolution::asymptotic_report(&series);
        if let Some(threshold) = scenario.thresholds.dist_h1_to_uinf {
            let last = dists.last().map(|d| d.1).unwrap_or(f64::INFINITY);
            summary.record("terminal_distance", last <= threshold);
        }
        if let Some(after) = scenario.thresholds.monotone_after {
            let tail: Vec<f64> = dists.iter().filter(|d| d.0 >= after).map(|d| d.1).collect();
            summary.record("monotone_distance", tail.windows(2).all(|w| w[1] <= w[0]));
        }
    }
    summary.merge(verify_enabled(scenario, &setup, ctx)?);
    ctx.write("summary.json", &summary.to_json())?;
    Ok(summary)
}

/// The evolution series of a scenario, without writing anything.
pub fn evolve(setup: &Setup, scenario: &Scenario, config: &EvolutionConfig) -> Result<EvolutionSeries> {
    let forcing = setup.forcing(scenario)?;
    let target = setup.stationary(scenario)?;
    let u0 = setup.initial(scenario)?;
    run_evolution(&setup.mesh, &setup.family, &u0, &forcing, config, Some(&target))
}

fn write_snapshots(
    setup: &Setup,
    series: &EvolutionSeries,
    prefix: &str,
    every: usize,
    ctx: &RunContext,
) -> Result<()> {
    let Some(bulk) = &series.bulk else { return Ok(()) };
    let motion = setup.data_motion()?;
    fs::create_dir_all(&ctx.out_dir)?;
    let last = bulk.len() - 1;
    for (n, w) in bulk.iter().enumerate() {
        if n % every != 0 && n != last {
            continue;
        }
        let t = series.times[n];
        let (points, values) = pushforward_field(&motion, &setup.mesh, t, w);
        let path = ctx.out_dir.join(format!("{prefix}_{n:06}.vtk"));
        let file = std::io::BufWriter::new(fs::File::create(path)?);
        write_vtk(file, &format!("u at t = {t}"), &points, setup.mesh.triangles(), &[("u", &values)])?;
    }
    Ok(())
}

/// Stationary Neumann solution of the limit problem.
pub fn run_stationary(scenario: &Scenario, ctx: &RunContext) -> Result<Summary> {
    let setup = Setup::new(scenario)?;
    let target = setup.stationary(scenario)?;
    let mut csv = String::from("vertex,x,y,u\n");
    for (b, &v) in setup.mesh.boundary_vertices().iter().enumerate() {
        let p = setup.mesh.vertices()[v];
        writeln!(csv, "{v},{:.15e},{:.15e},{:.15e}", p.x, p.y, target.field[b]).expect("string write");
    }
    ctx.write("stationary.csv", &csv)?;
    if let Some(prefix) = &scenario.output.vtk {
        let path = ctx.out_dir.join(format!("{prefix}_stationary.vtk"));
        let file = std::io::BufWriter::new(fs::File::create(path)?);
        let values: Vec<f64> = target.bulk.iter().copied().collect();
        write_vtk(file, "stationary", setup.mesh.vertices(), setup.mesh.triangles(), &[("u", &values)])?;
    }
    let summary = Summary::default();
    ctx.write("summary.json", &summary.to_json())?;
    Ok(summary)
}

/// Dense DtN matrix at `t`, row-major CSV in boundary-vertex order.
pub fn run_dtn_matrix(scenario: &Scenario, ctx: &RunContext, t: Time) -> Result<PathBuf> {
    let setup = Setup::new(scenario)?;
    let op = DtnOperator::with_mass(setup.mesh.clone(), setup.family.clone(), t, setup.mass.clone())?;
    let mut buf = Vec::new();
    op.write_matrix_csv(&mut buf)?;
    ctx.write("dtn_matrix.csv", &String::from_utf8(buf).expect("ascii csv"))
}

fn verify_enabled(scenario: &Scenario, setup: &Setup, ctx: &RunContext) -> Result<Summary> {
    let checks: Vec<Check> = Check::ALL.into_iter().filter(|c| c.enabled(&scenario.verify)).collect();
    run_checks(scenario, setup, ctx, &checks)
}

/// Runs the named checks regardless of the scenario toggles.
pub fn run_verify(scenario: &Scenario, ctx: &RunContext, checks: &[Check]) -> Result<Summary> {
    let setup = Setup::new(scenario)?;
    let summary = run_checks(scenario, &setup, ctx, checks)?;
    ctx.write("summary.json", &summary.to_json())?;
    Ok(summary)
}

fn run_checks(scenario: &Scenario, setup: &Setup, ctx: &RunContext, checks: &[Check]) -> Result<Summary> {
    let mut summary = Summary::default();
    for check in checks {
        let part = match check {
            Check::Sectoriality => check_sectoriality(scenario, setup, ctx)?,
            Check::Holder => check_holder(scenario, setup, ctx)?,
            Check::Yagi => check_yagi(scenario, setup, ctx)?,
            Check::Adjoint => check_adjoint(scenario, setup, ctx)?,
            Check::Coercivity => check_coercivity(scenario, setup, ctx)?,
            Check::Motion => check_motion(scenario, setup, ctx)?,
        };
        summary.merge(part);
    }
    Ok(summary)
}

/// `(t, norm, sup)` for every snapshot time, with the rows appended to `csv`.
fn sweep_all(setup: &Setup, times: &[Time], csv: &mut String) -> Result<Vec<(Time, NormKind, f64)>> {
    let norms = NormSystem::with_mass(&setup.mesh, setup.mass.clone())?;
    let grid = default_lambda_grid();
    let mut sups = Vec::new();
    for &t in times {
        let op = DtnOperator::with_mass(setup.mesh.clone(), setup.family.clone(), t, setup.mass.clone())?;
        for norm in [NormKind::L2, NormKind::HMinusHalf] {
            let result = sectoriality_sweep(&op, &norms, &grid, norm)?;
            let label = match norm {
                NormKind::L2 => "l2",
                NormKind::HMinusHalf => "h_minus_half",
            };
            for row in &result.table {
                writeln!(csv, "{},{label},{:.15e},{:.15e},{:.15e}", fmt_time(t), row.re, row.im, row.value)
                    .expect("string write");
            }
            sups.push((t, norm, result.sup));
        }
    }
    Ok(sups)
}

fn check_sectoriality(scenario: &Scenario, setup: &Setup, ctx: &RunContext) -> Result<Summary> {
    let mut summary = Summary::default();
    let header = "t,norm,re,im,value\n";
    let mut csv = String::from(header);
    let sups = sweep_all(setup, &scenario.verify.times, &mut csv)?;
    ctx.write("sectoriality.csv", &csv)?;
    summary.record("sectoriality_finite", sups.iter().all(|s| s.2.is_finite()));
    if scenario.verify.refine {
        let refined_spec = scenario.mesh.refined().ok_or_else(|| {
            Error::Unsupported("verify.refine needs a generated mesh".into())
        })?;
        let refined = Setup::with_mesh(scenario, &refined_spec)?;
        let mut csv = String::from(header);
        let fine = sweep_all(&refined, &scenario.verify.times, &mut csv)?;
        ctx.write("sectoriality_refined.csv", &csv)?;
        let stable = sups
            .iter()
            .zip(&fine)
            .all(|(a, b)| b.2.is_finite() && relative_change(a.2, b.2) <= scenario.thresholds.refinement_change);
        summary.record("sectoriality_refinement_stable", stable);
    }
    Ok(summary)
}

fn pair_grid(scenario: &Scenario, spacing: f64) -> Vec<f64> {
    let n = (scenario.verify.pair_span / spacing).round() as usize;
    (0..=n).map(|i| scenario.t0 + i as f64 * spacing).collect()
}

fn pair_rows(csv: &mut String, spacing: f64, est: &PairEstimate) {
    for row in &est.table {
        writeln!(csv, "{spacing:.15e},{:.15e},{:.15e},{:.15e}", row.s, row.t, row.value).expect("string write");
    }
}

fn pair_checks(
    scenario: &Scenario,
    name: &str,
    ctx: &RunContext,
    estimate: impl Fn(&[f64]) -> Result<PairEstimate>,
) -> Result<Summary> {
    let mut csv = String::from("spacing,s,t,value\n");
    let coarse_h = scenario.verify.pair_spacing;
    let fine_h = coarse_h / 2.0;
    let coarse = estimate(&pair_grid(scenario, coarse_h))?;
    let fine = estimate(&pair_grid(scenario, fine_h))?;
    pair_rows(&mut csv, coarse_h, &coarse);
    pair_rows(&mut csv, fine_h, &fine);
    ctx.write(&format!("{name}.csv"), &csv)?;
    let mut summary = Summary::default();
    summary.record(format!("{name}_finite"), coarse.sup.is_finite() && fine.sup.is_finite());
    summary.record(
        format!("{name}_stable"),
        relative_change(coarse.sup, fine.sup) <= scenario.thresholds.pair_change,
    );
    Ok(summary)
}

fn check_holder(scenario: &Scenario, setup: &Setup, ctx: &RunContext) -> Result<Summary> {
    let norms = NormSystem::with_mass(&setup.mesh, setup.mass.clone())?;
    let alpha = setup.family.alpha();
    pair_checks(scenario, "holder", ctx, |times| {
        operator_holder_estimate(&setup.mesh, &setup.family, &norms, times, alpha)
    })
}

fn check_yagi(scenario: &Scenario, setup: &Setup, ctx: &RunContext) -> Result<Summary> {
    let op = DtnOperator::with_mass(
        setup.mesh.clone(),
        setup.family.clone(),
        Time::At(scenario.t0),
        setup.mass.clone(),
    )?;
    let symmetric = op.is_symmetric()?;
    let method = if symmetric { FractionalMethod::Spectral } else { FractionalMethod::Balakrishnan };
    let alpha = setup.family.alpha();
    let nu = scenario.verify.nu_exponent;
    let mut summary = pair_checks(scenario, "yagi", ctx, |times| {
        yagi_condition_check(&setup.mesh, &setup.family, &setup.mass, nu, alpha, times, method)
    })?;
    if symmetric {
        let theta = 1.0 - nu;
        let quad = op.fractional_power_matrix(theta, FractionalMethod::Balakrishnan)?;
        let spec = op.fractional_power_matrix(theta, FractionalMethod::Spectral)?;
        let err = (&quad - &spec).amax() / spec.amax();
        summary.record("yagi_fractional_agreement", err <= scenario.thresholds.fractional_agreement);
    }
    Ok(summary)
}

fn check_adjoint(scenario: &Scenario, setup: &Setup, ctx: &RunContext) -> Result<Summary> {
    let op = DtnOperator::with_mass(
        setup.mesh.clone(),
        setup.family.clone(),
        Time::At(scenario.t0),
        setup.mass.clone(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut csv = String::from("theta,discrepancy\n");
    let mut worst: f64 = 0.0;
    for &theta in &scenario.verify.thetas {
        let d = adjoint_fractional_identity_check(&op, theta, scenario.verify.trials, &mut rng)?;
        writeln!(csv, "{theta:.15e},{d:.15e}").expect("string write");
        worst = worst.max(d);
    }
    ctx.write("adjoint.csv", &csv)?;
    let mut summary = Summary::default();
    summary.record("adjoint_identity", worst <= scenario.thresholds.adjoint);
    Ok(summary)
}

fn check_coercivity(scenario: &Scenario, setup: &Setup, ctx: &RunContext) -> Result<Summary> {
    let mut csv = String::from("t,value\n");
    let mut ok = true;
    for &t in &scenario.verify.times {
        let c = coercivity_constant(&setup.mesh, &setup.family, t)?;
        writeln!(csv, "{},{c:.15e}", fmt_time(t)).expect("string write");
        ok &= c >= scenario.thresholds.coercivity;
    }
    ctx.write("coercivity.csv", &csv)?;
    let mut summary = Summary::default();
    summary.record("coercivity", ok);
    Ok(summary)
}

fn check_motion(scenario: &Scenario, setup: &Setup, ctx: &RunContext) -> Result<Summary> {
    let motion = setup
        .motion
        .as_ref()
        .ok_or_else(|| Error::Scenario(vec!["verify.motion: needs a motion section".into()]))?;
    let times = pair_grid(scenario, scenario.verify.pair_spacing);
    let report = verify_motion_assumptions(motion, &times)?;
    let mut csv = String::from(
        "t,jacobian_deviation,second_difference,dh_dt_max,normal_speed,normal_residual,min_det,min_n\n",
    );
    for s in &report.samples {
        writeln!(
            csv,
            "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
            s.t, s.jacobian_deviation, s.second_difference, s.dh_dt_max, s.normal_speed,
            s.normal_residual, s.min_det, s.min_n
        )
        .expect("string write");
    }
    ctx.write("motion.csv", &csv)?;
    let mut summary = Summary::default();
    summary.record("motion_assumptions", report.passed());
    Ok(summary)
}
