//! Repo-wide numerical tolerances and thresholds.
//!
//! Every residual bound, size cap and stability threshold used by the solvers,
//! the verification routines and the acceptance suite is read from here.

/// Tolerance record shared by solvers, verification and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative residual accepted for direct solves and round-trip identities.
    pub residual: f64,
    /// Largest boundary DOF count for which dense boundary matrices are built.
    pub dense_cap: usize,
    /// Largest bulk DOF count for which dense bulk eigensolves are used.
    pub dense_bulk_cap: usize,
    /// Relative tolerance of the conjugate-gradient path.
    pub cg_tolerance: f64,
    /// Maximal CG iterations are `cg_iteration_factor * sqrt(dof)`.
    pub cg_iteration_factor: f64,
    /// Relative pivot below which a factorization is reported singular.
    pub pivot_floor: f64,
    /// Allowed relative change of a sectoriality supremum under one refinement.
    pub refinement_stability: f64,
    /// Allowed relative change of a Hölder estimate when pair spacing halves.
    pub holder_spacing_stability: f64,
    /// Allowed relative change of the Yagi supremum when pair spacing halves.
    pub yagi_spacing_stability: f64,
    /// Ratio over the coarsest mesh tolerated for the fractional mapping constant.
    pub fractional_mapping_growth: f64,
    /// Substitution interval `[-s_max, s_max]` for `rho = e^s` in Balakrishnan's integral.
    pub balakrishnan_s_max: f64,
    /// Gauss-Legendre points per unit `s` interval.
    pub balakrishnan_points_per_unit: usize,
    /// Residual bound `|dh/dt - c n|` on boundary samples for a motion to pass.
    pub motion_normal_residual: f64,
    /// Iterations and residual of the inverse-power coercivity fallback.
    pub inverse_power_iterations: usize,
    pub inverse_power_residual: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    residual: 1e-10,
    dense_cap: 4096,
    dense_bulk_cap: 2500,
    cg_tolerance: 1e-12,
    cg_iteration_factor: 10.0,
    pivot_floor: 1e-14,
    refinement_stability: 0.10,
    holder_spacing_stability: 0.20,
    yagi_spacing_stability: 0.50,
    fractional_mapping_growth: 3.0,
    balakrishnan_s_max: 12.0,
    balakrishnan_points_per_unit: 32,
    motion_normal_residual: 1e-8,
    inverse_power_iterations: 200,
    inverse_power_residual: 1e-8,
};

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}
