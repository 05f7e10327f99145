//! Explicit conservative finite-difference solver for
//! ∂_t u = Σ_i ∂_i(|∂_i u|^(p_i-2) ∂_i u) and the weak-form residual that
//! certifies numerical solutions against the local weak formulation.
//!
//! The scheme is face-flux based: u^(n+1)_j = u^n_j + Δt Σ_i (F_(j+e_i/2) -
//! F_(j-e_i/2))/h_i with F = Φ_i(D+ u), Φ_i(g) = (g² + ε²)^((p_i-2)/2) g.
//! Zero-flux walls make every step exactly mass-conserving (telescoping
//! fluxes); the update is monotone under the CFL bound below.

use crate::grid::{for_each_index, lanes, Axis, GridError, GridField, SpaceTimeField};
use crate::numeric::compensated_sum;
use crate::params::AnisoExponents;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error("non-finite value produced at step {step}, flat cell {index}")]
    NonFinite { step: usize, index: usize },
    #[error("CFL violated at step {step}: dt * stiffness = {margin} > 1")]
    Stability { step: usize, margin: f64 },
    #[error("field and test function live on different grids")]
    GridMismatch,
    #[error("test function not compactly supported: nonzero at boundary node {index} of level {level}")]
    PhiNotCompact { level: usize, index: usize },
    #[error("window selects no time interval: levels {k1} .. {k2}")]
    BadWindow { k1: usize, k2: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Boundary condition of the explicit march.
#[derive(Clone)]
pub enum BoundaryCondition {
    /// Boundary face fluxes are zero; mass is conserved exactly.
    ZeroFlux,
    /// Boundary nodes follow a prescribed trace (x, t) -> value.
    Dirichlet(Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::ZeroFlux => write!(f, "ZeroFlux"),
            BoundaryCondition::Dirichlet(_) => write!(f, "Dirichlet(<trace>)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub exps: AnisoExponents,
    pub bc: BoundaryCondition,
    /// Safety factor in (0,1) multiplying the stability bound.
    pub cfl_safety: f64,
    /// Degeneracy regularization ε ≥ 0 in the flux (default 0: for p_i > 2
    /// the flux is continuous at zero gradient).
    pub eps_reg: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Step returned when the field is flat and ε = 0.
    pub dt_max: f64,
    /// Fixed step instead of the CFL-derived one.
    pub dt_override: Option<f64>,
    /// Store every `store_stride`-th level.
    pub store_stride: usize,
}

impl SolverConfig {
    pub fn new(exps: AnisoExponents, t_end: f64) -> Self {
        Self {
            exps,
            bc: BoundaryCondition::ZeroFlux,
            cfl_safety: 0.4,
            eps_reg: 0.0,
            t_start: 0.0,
            t_end,
            dt_max: 1e-2,
            dt_override: None,
            store_stride: 1,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(SolverError::Config(format!(
                "cfl_safety must lie in (0,1), got {}",
                self.cfl_safety
            )));
        }
        if !(self.eps_reg >= 0.0) {
            return Err(SolverError::Config(format!(
                "eps_reg must be nonnegative, got {}",
                self.eps_reg
            )));
        }
        if !(self.t_end > self.t_start) {
            return Err(SolverError::Config(format!(
                "t_end {} must exceed t_start {}",
                self.t_end, self.t_start
            )));
        }
        if !(self.dt_max > 0.0) {
            return Err(SolverError::Config(format!(
                "dt_max must be positive, got {}",
                self.dt_max
            )));
        }
        if self.store_stride == 0 {
            return Err(SolverError::Config("store_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Directional flux Φ(g) = (g² + ε²)^((p-2)/2) g.
#[inline]
pub fn flux(g: f64, p: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        g.abs().powf(p - 2.0) * g
    } else {
        (g * g + eps * eps).powf(0.5 * (p - 2.0)) * g
    }
}

/// Stiffness Σ_i 2 (p_i - 1) max_j (|D_i u|² + ε²)^((p_i-2)/2) / h_i²;
/// the stable step is cfl_safety / stiffness (dt_max when the field is flat).
fn stiffness(u: &GridField, cfg: &SolverConfig) -> Result<f64, SolverError> {
    u.check_finite().map_err(SolverError::Grid)?;
    let shape = u.shape();
    let eps2 = cfg.eps_reg * cfg.eps_reg;
    let mut total = 0.0;
    for axis in 0..u.dim() {
        let h = u.axes()[axis].step();
        let inv_h = 1.0 / h;
        let (bases, stride) = lanes(&shape, axis);
        let n = shape[axis];
        let mut gmax2: f64 = 0.0;
        let v = u.values();
        for base in bases {
            for j in 0..n - 1 {
                let g = (v[base + (j + 1) * stride] - v[base + j * stride]) * inv_h;
                gmax2 = gmax2.max(g * g);
            }
        }
        let p = cfg.exps.p_f(axis);
        let coeff = (gmax2 + eps2).powf(0.5 * (p - 2.0));
        if coeff > 0.0 {
            total += 2.0 * (p - 1.0) * coeff / (h * h);
        }
    }
    Ok(total)
}

/// Stable explicit step: Δt = cfl_safety / Σ_i 2(p_i-1) max|D_i u|^(p_i-2)/h_i²,
/// capped at dt_max; dt_max when all gradients vanish and ε = 0.
pub fn stable_dt(u: &GridField, cfg: &SolverConfig) -> Result<f64, SolverError> {
    let s = stiffness(u, cfg)?;
    if s == 0.0 {
        Ok(cfg.dt_max)
    } else {
        Ok((cfg.cfl_safety / s).min(cfg.dt_max))
    }
}

fn apply_dirichlet(out: &mut [f64], axes: &[Axis], trace: &dyn Fn(&[f64], f64) -> f64, t: f64) {
    let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let mut coord = vec![0.0; axes.len()];
    let mut flat = 0usize;
    for_each_index(&shape, |idx| {
        let boundary = idx
            .iter()
            .enumerate()
            .any(|(a, &i)| i == 0 || i == shape[a] - 1);
        if boundary {
            for (a, &i) in idx.iter().enumerate() {
                coord[a] = axes[a].node(i);
            }
            out[flat] = trace(&coord, t);
        }
        flat += 1;
    });
}

/// One explicit step of length `dt` starting at time `t`.
pub fn step_explicit(
    u: &GridField,
    dt: f64,
    cfg: &SolverConfig,
    t: f64,
) -> Result<GridField, SolverError> {
    let shape = u.shape();
    let v = u.values();
    let mut out = v.to_vec();
    for axis in 0..u.dim() {
        let h = u.axes()[axis].step();
        let inv_h = 1.0 / h;
        let lam = dt * inv_h;
        let p = cfg.exps.p_f(axis);
        let (bases, stride) = lanes(&shape, axis);
        let n = shape[axis];
        for base in bases {
            // zero-flux boundary faces; interior face j+1/2 carries Φ(D+ u)
            let mut left_flux = 0.0;
            for j in 0..n {
                let right_flux = if j + 1 < n {
                    flux(
                        (v[base + (j + 1) * stride] - v[base + j * stride]) * inv_h,
                        p,
                        cfg.eps_reg,
                    )
                } else {
                    0.0
                };
                out[base + j * stride] += lam * (right_flux - left_flux);
                left_flux = right_flux;
            }
        }
    }
    if let BoundaryCondition::Dirichlet(trace) = &cfg.bc {
        apply_dirichlet(&mut out, u.axes(), trace.as_ref(), t + dt);
    }
    if let Some(index) = out.iter().position(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { step: 0, index });
    }
    GridField::new(u.axes().to_vec(), out).map_err(SolverError::Grid)
}

/// Run report of an explicit march.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub steps: usize,
    pub dt: f64,
    pub stored_levels: usize,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_drift_abs: f64,
    /// max over steps of dt · stiffness(u^n); must stay below 1.
    pub cfl_margin_max: f64,
    pub min_value: f64,
    pub max_value: f64,
}

/// March the equation from `initial` over [t_start, t_end], storing every
/// `store_stride`-th level (the initial and final levels always included).
pub fn solve(
    initial: &GridField,
    cfg: &SolverConfig,
) -> Result<(SpaceTimeField, RunReport), SolverError> {
    cfg.validate()?;
    initial.check_finite().map_err(SolverError::Grid)?;
    let duration = cfg.t_end - cfg.t_start;
    let dt_base = match cfg.dt_override {
        Some(dt) => {
            if !(dt > 0.0) {
                return Err(SolverError::Config(format!("dt override {dt} must be positive")));
            }
            dt
        }
        None => stable_dt(initial, cfg)?,
    };
    let chunks = (duration / (dt_base * cfg.store_stride as f64)).ceil().max(1.0) as usize;
    let steps = chunks * cfg.store_stride;
    let dt = duration / steps as f64;

    let node_vol = initial.node_volume();
    let mass_initial = compensated_sum(initial.values().iter().copied()) * node_vol;

    let mut u = initial.clone();
    let mut values: Vec<f64> = Vec::with_capacity(initial.values().len() * (chunks + 1));
    values.extend_from_slice(initial.values());
    let mut cfl_margin_max: f64 = 0.0;
    let mut min_value = initial.min_value();
    let mut max_value = initial.max_value();
    for step in 0..steps {
        let s = stiffness(&u, cfg)?;
        let margin = dt * s;
        cfl_margin_max = cfl_margin_max.max(margin);
        if margin > 1.0 {
            return Err(SolverError::Stability { step, margin });
        }
        let t = cfg.t_start + step as f64 * dt;
        u = step_explicit(&u, dt, cfg, t).map_err(|e| match e {
            SolverError::NonFinite { index, .. } => SolverError::NonFinite { step, index },
            other => other,
        })?;
        min_value = min_value.min(u.min_value());
        max_value = max_value.max(u.max_value());
        if (step + 1) % cfg.store_stride == 0 {
            values.extend_from_slice(u.values());
        }
    }
    let mass_final = compensated_sum(u.values().iter().copied()) * node_vol;
    let time = Axis::new(cfg.t_start, dt * cfg.store_stride as f64, chunks + 1)
        .map_err(SolverError::Grid)?;
    let field = SpaceTimeField::new(initial.axes().to_vec(), time, values)
        .map_err(SolverError::Grid)?;
    let report = RunReport {
        steps,
        dt,
        stored_levels: chunks + 1,
        mass_initial,
        mass_final,
        mass_drift_abs: (mass_final - mass_initial).abs(),
        cfl_margin_max,
        min_value,
        max_value,
    };
    Ok((field, report))
}

/// Value and normalization of the weak-form identity on a window.
#[derive(Debug, Clone)]
pub struct WeakResidual {
    /// ∫ uφ dx |_(t1)^(t2) + ∫∫ (-u ∂_t φ + Σ_i |∂_i u|^(p_i-2) ∂_i u ∂_i φ)
    pub value: f64,
    /// Sum of the magnitudes of the constituent integrals.
    pub scale: f64,
    /// |value| / scale.
    pub relative: f64,
    pub boundary_lo: f64,
    pub boundary_hi: f64,
    pub time_term: f64,
    pub flux_term: f64,
}

/// Evaluate the weak-solution identity of the equation for a test function φ
/// on the stored grid of `u`, over the window [t1, t2] (snapped to stored
/// levels). φ must live on the same grid and vanish on the spatial boundary
/// layer. Quadrature: node sums with forward differences, matching the
/// solver stencil, so the residual of a solver output telescopes to the
/// O(Δt) commutator Σ Δu Δφ.
pub fn weak_residual(
    u: &SpaceTimeField,
    phi: &SpaceTimeField,
    window: (f64, f64),
    exps: &AnisoExponents,
) -> Result<WeakResidual, SolverError> {
    if u.space_axes() != phi.space_axes() || u.time_axis() != phi.time_axis() {
        return Err(SolverError::GridMismatch);
    }
    let shape = u.space_shape();
    let nspace = u.nspace();
    // compact support check: exact zeros on the spatial boundary layer
    {
        let mut boundary_flat = Vec::new();
        let mut flat = 0usize;
        for_each_index(&shape, |idx| {
            if idx
                .iter()
                .enumerate()
                .any(|(a, &i)| i == 0 || i == shape[a] - 1)
            {
                boundary_flat.push(flat);
            }
            flat += 1;
        });
        for level in 0..phi.levels() {
            let pv = phi.level_values(level);
            for &b in &boundary_flat {
                if pv[b] != 0.0 {
                    return Err(SolverError::PhiNotCompact { level, index: b });
                }
            }
        }
    }
    let k1 = u.level_at(window.0)?;
    let k2 = u.level_at(window.1)?;
    if k2 <= k1 {
        return Err(SolverError::BadWindow { k1, k2 });
    }
    let w = u.space_axes().iter().map(|a| a.step()).product::<f64>();
    let dt = u.time_axis().step();

    let node_dot = |a: &[f64], b: &[f64]| -> f64 {
        compensated_sum(a.iter().zip(b).map(|(x, y)| x * y)) * w
    };
    let boundary_lo = node_dot(u.level_values(k1), phi.level_values(k1));
    let boundary_hi = node_dot(u.level_values(k2), phi.level_values(k2));

    let mut time_terms: Vec<f64> = Vec::with_capacity((k2 - k1) * nspace);
    let mut flux_terms: Vec<f64> = Vec::new();
    for k in k1..k2 {
        let uk = u.level_values(k);
        let pk = phi.level_values(k);
        let pk1 = phi.level_values(k + 1);
        for j in 0..nspace {
            time_terms.push(uk[j] * (pk1[j] - pk[j]));
        }
        for axis in 0..u.dim() {
            let h = u.space_axes()[axis].step();
            let inv_h = 1.0 / h;
            let p = exps.p_f(axis);
            let (bases, stride) = lanes(&shape, axis);
            let n = shape[axis];
            for base in bases {
                for j in 0..n - 1 {
                    let du = (uk[base + (j + 1) * stride] - uk[base + j * stride]) * inv_h;
                    let dphi = (pk[base + (j + 1) * stride] - pk[base + j * stride]) * inv_h;
                    if dphi != 0.0 {
                        flux_terms.push(flux(du, p, 0.0) * dphi);
                    }
                }
            }
        }
    }
    let time_term = compensated_sum(time_terms) * w;
    let flux_term = compensated_sum(flux_terms) * w * dt;

    let value = (boundary_hi - boundary_lo) - time_term + flux_term;
    let scale = boundary_lo.abs() + boundary_hi.abs() + time_term.abs() + flux_term.abs()
        + f64::MIN_POSITIVE;
    Ok(WeakResidual {
        value,
        scale,
        relative: value.abs() / scale,
        boundary_lo,
        boundary_hi,
        time_term,
        flux_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;
    use crate::params::{derive_exponents, PVector};

    fn exps233() -> AnisoExponents {
        derive_exponents(&PVector::isotropic(2, ratio(3, 1)).unwrap())
    }

    fn cfg233(t_end: f64) -> SolverConfig {
        SolverConfig::new(exps233(), t_end)
    }

    fn square(cells: usize) -> Vec<Axis> {
        vec![
            Axis::symmetric(1.0, cells).unwrap(),
            Axis::symmetric(1.0, cells).unwrap(),
        ]
    }

    #[test]
    fn stable_dt_flat_field_returns_dt_max() {
        let u = GridField::constant(square(8), 3.0);
        let cfg = cfg233(1.0);
        assert_eq!(stable_dt(&u, &cfg).unwrap(), cfg.dt_max);
    }

    #[test]
    fn stable_dt_linear_slope_formula() {
        // p=(3,3), |D_i u| = 1 on both axes: dt = cfl / (4/h1^2 + 4/h2^2)
        let axes = square(16);
        let h = axes[0].step();
        let u = GridField::from_fn(axes, |x| x[0] + x[1]);
        let cfg = cfg233(1.0);
        let want = cfg.cfl_safety / (8.0 / (h * h));
        let got = stable_dt(&u, &cfg).unwrap();
        assert!((got - want).abs() < 1e-15 * want, "{got} vs {want}");

        // halving h quarters dt at fixed slope
        let fine = GridField::from_fn(square(32), |x| x[0] + x[1]);
        let got_fine = stable_dt(&fine, &cfg).unwrap();
        assert!((got_fine - want / 4.0).abs() < 1e-15 * want);
    }

    #[test]
    fn constants_are_fixed_points() {
        let u = GridField::constant(square(8), 2.5);
        let cfg = cfg233(1.0);
        let v = step_explicit(&u, 1e-3, &cfg, 0.0).unwrap();
        assert!(v.values().iter().all(|x| *x == 2.5));

        let (field, report) = solve(&u, &cfg233(0.05)).unwrap();
        assert!(field.values().iter().all(|x| *x == 2.5));
        assert_eq!(report.mass_drift_abs, 0.0);
    }

    #[test]
    fn mass_conserved_under_zero_flux() {
        let u = GridField::from_fn(square(24), |x| {
            1.0 + (-(x[0] * x[0] + 2.0 * x[1] * x[1]) * 4.0).exp()
        });
        let cfg = cfg233(0.02);
        let (_, report) = solve(&u, &cfg).unwrap();
        let tol = 1e-12 * u.values().iter().map(|v| v.abs()).sum::<f64>() * u.node_volume();
        assert!(
            report.mass_drift_abs <= tol,
            "drift {} > tol {tol}",
            report.mass_drift_abs
        );
        assert!(report.cfl_margin_max <= cfg.cfl_safety + 1e-12);
    }

    #[test]
    fn axis_aligned_field_matches_1d_oracle() {
        // independent 1-D march of the same scheme, written out longhand
        let cells = 32usize;
        let axes = square(cells);
        let h = axes[0].step();
        let profile = |x: f64| (1.0 - x * x).powi(2);
        let u0 = GridField::from_fn(axes, |x| profile(x[0]));
        let cfg = cfg233(1.0);
        let dt = stable_dt(&u0, &cfg).unwrap();
        let steps = 40usize;

        let mut line: Vec<f64> = (0..=cells)
            .map(|i| profile(-1.0 + i as f64 * h))
            .collect();
        let p = 3.0;
        for _ in 0..steps {
            let mut fluxes = vec![0.0; cells + 2]; // boundary faces zero
            for j in 0..cells {
                let g = (line[j + 1] - line[j]) / h;
                fluxes[j + 1] = g.abs().powf(p - 2.0) * g;
            }
            let mut next = line.clone();
            for (j, value) in next.iter_mut().enumerate() {
                *value += dt / h * (fluxes[j + 1] - fluxes[j]);
            }
            line = next;
        }

        let mut u = u0;
        for _ in 0..steps {
            u = step_explicit(&u, dt, &cfg, 0.0).unwrap();
        }
        // compare along a row: values must match the 1-D march exactly
        // (the x2 direction contributes zero flux)
        let shape = u.shape();
        let (bases, stride) = lanes(&shape, 0);
        let mid = bases[bases.len() / 2];
        for j in 0..=cells {
            let got = u.values()[mid + j * stride];
            assert!(
                (got - line[j]).abs() < 1e-13,
                "node {j}: {got} vs {}",
                line[j]
            );
        }
    }

    #[test]
    fn comparison_and_maximum_principles() {
        let axes = square(16);
        let u0 = GridField::from_fn(axes.clone(), |x| {
            0.5 + 0.3 * (std::f64::consts::PI * x[0] / 2.0).cos()
        });
        let v0 = GridField::from_fn(axes, |x| {
            0.8 + 0.3 * (std::f64::consts::PI * x[0] / 2.0).cos()
                + 0.2 * (std::f64::consts::PI * x[1] / 2.0).cos()
        });
        let cfg = cfg233(0.05);
        let (u, ur) = solve(&u0, &cfg).unwrap();
        let (v, _) = solve(&v0, &cfg).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!(a <= b, "comparison principle violated: {a} > {b}");
        }
        // maximum principle under zero-flux
        assert!(ur.min_value >= u0.min_value() - 1e-12);
        assert!(ur.max_value <= u0.max_value() + 1e-12);
    }

    fn compact_phi(axes: &[Axis], time: &Axis) -> SpaceTimeField {
        SpaceTimeField::from_fn(axes.to_vec(), time.clone(), |x, t| {
            let bump = |z: f64| {
                let w = 1.0 - z * z;
                if w <= 0.0 {
                    0.0
                } else {
                    w * w
                }
            };
            bump(x[0]) * bump(x[1]) * (1.0 + 0.5 * (3.0 * t).sin())
        })
        .unwrap()
    }

    #[test]
    fn weak_residual_zero_phi_and_constant_field() {
        let e = exps233();
        let axes = square(12);
        let time = Axis::new(0.0, 0.01, 11).unwrap();
        let u = SpaceTimeField::from_fn(axes.clone(), time.clone(), |_, _| 4.2).unwrap();
        let zero = SpaceTimeField::from_fn(axes.clone(), time.clone(), |_, _| 0.0).unwrap();
        let r = weak_residual(&u, &zero, (0.0, 0.1), &e).unwrap();
        assert_eq!(r.value, 0.0);

        // constant field against an admissible phi: exact telescoping
        let phi = compact_phi(&axes, &time);
        let r = weak_residual(&u, &phi, (0.0, 0.1), &e).unwrap();
        assert!(
            r.value.abs() <= 1e-13 * r.scale.max(1.0),
            "residual {} scale {}",
            r.value,
            r.scale
        );
    }

    #[test]
    fn weak_residual_rejects_non_compact_phi() {
        let e = exps233();
        let axes = square(8);
        let time = Axis::new(0.0, 0.01, 3).unwrap();
        let u = SpaceTimeField::from_fn(axes.clone(), time.clone(), |_, _| 1.0).unwrap();
        let phi = SpaceTimeField::from_fn(axes, time, |_, _| 1.0).unwrap();
        assert!(matches!(
            weak_residual(&u, &phi, (0.0, 0.02), &e),
            Err(SolverError::PhiNotCompact { .. })
        ));
    }

    #[test]
    fn solver_output_has_small_weak_residual() {
        let e = exps233();
        let axes = square(24);
        let u0 = GridField::from_fn(axes, |x| {
            1.0 + 0.4
                * (std::f64::consts::PI * x[0] / 2.0).cos()
                * (std::f64::consts::PI * x[1] / 2.0).cos()
        });
        let mut cfg = cfg233(0.02);
        cfg.t_start = 0.0;
        let (u, _) = solve(&u0, &cfg).unwrap();
        let phi = compact_phi(u.space_axes(), u.time_axis());
        let r = weak_residual(&u, &phi, (0.0, 0.02), &e).unwrap();
        assert!(r.relative < 5e-3, "relative residual {}", r.relative);
    }
}
