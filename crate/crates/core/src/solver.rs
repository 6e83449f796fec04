//! Critical points of E_ε under homogeneous Neumann conditions: semi-implicit
//! gradient flow (Laplacian implicit, reaction explicit) plus matrix-free
//! Newton polishing, and the even-reflection construction across a flat face.
//!
//! The Laplace-Beltrami operator is the conservative flux form
//! Δ_g u = (1/√g)·Σ_a [F_{a+} − F_{a−}]/h_a with face coefficients averaged
//! from √g·g^{aa}; a missing neighbor (Neumann boundary, degenerate axis, or
//! exterior cell) simply carries zero flux, which is the mirror-ghost
//! condition in conservative form. The flow's Lyapunov functional is the
//! matching face-difference energy, whose exact discrete gradient *is* the
//! residual operator, so energy monotonicity and first-variation checks hold
//! to round-off rather than to discretization order.

use crate::error::{GlError, Result};
use crate::field::ComplexField;
use crate::grid::{Chart, ChartId, ChartParams, MetricField, StructuredGrid};
use crate::util::{pairwise_sum, par_fill};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Flow step; defaults to the stability bound 0.4·ε².
    pub dt: Option<f64>,
    pub max_steps: usize,
    /// Convergence threshold on the √g-weighted RMS residual.
    pub residual_tol: f64,
    /// Residual level at which Newton polishing takes over.
    pub newton_after: f64,
    pub newton_max_iters: usize,
    /// Newton line-search damping factors tried in order.
    pub damping: Vec<f64>,
    pub allow_underresolved: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: None,
            max_steps: 4000,
            residual_tol: 5e-7,
            newton_after: 1e-3,
            newton_max_iters: 12,
            damping: vec![1.0, 0.5, 0.25, 0.1],
            allow_underresolved: false,
        }
    }
}

pub fn dt_stability(epsilon: f64) -> f64 {
    0.4 * epsilon * epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResolutionStatus {
    Ok,
    Marginal,
    TooCoarse,
}

/// Resolution contract: ε ≥ 4h for quantitative runs; warn below 6h, hard
/// error below 2h (bypassable only via `allow_underresolved`, for core-free
/// scenarios like the closed-form product-chart solutions).
pub fn check_resolution(epsilon: f64, grid: &StructuredGrid) -> ResolutionStatus {
    let h = grid.max_spacing();
    if epsilon < 2.0 * h {
        ResolutionStatus::TooCoarse
    } else if epsilon < 6.0 * h {
        ResolutionStatus::Marginal
    } else {
        ResolutionStatus::Ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub final_residual: f64,
    pub steps: usize,
    pub newton_iters: usize,
    /// (step, flow energy, scaled residual) samples; energy is the
    /// face-difference Lyapunov functional of the flow.
    pub energy_history: Vec<(usize, f64, f64)>,
    pub converged: bool,
    pub max_modulus: f64,
    pub newton_fallbacks: usize,
}

// ---------------------------------------------------------------------------
// Flux-form Laplacian
// ---------------------------------------------------------------------------

/// Precomputed per-cell stencil of the flux Laplacian (diagonal metrics).
pub struct FluxOp {
    chart: Arc<Chart>,
    /// Per axis: neighbor index and face transmissibility coeff/(h²·√g_c),
    /// zero when the face carries no flux. Layout: [cell][axis][dir].
    nb: Vec<[[i64; 2]; 3]>,
    tc: Vec<[[f64; 2]; 3]>,
    diag: Vec<f64>,
}

impl FluxOp {
    pub fn new(chart: &Arc<Chart>) -> Self {
        let grid = &chart.grid;
        let met = &chart.metric;
        let n = grid.n_cells();
        for i in 0..n {
            if grid.is_in(i) {
                let g = &met.g[i];
                assert!(
                    g[3].abs() + g[4].abs() + g[5].abs() < 1e-14,
                    "flux Laplacian supports diagonal metrics only"
                );
            }
        }
        let mut nb = vec![[[-1i64; 2]; 3]; n];
        let mut tc = vec![[[0.0f64; 2]; 3]; n];
        let mut diag = vec![0.0f64; n];
        for idx in 0..n {
            if !grid.is_in(idx) {
                continue;
            }
            let sq_c = met.sqrt_det[idx];
            for a in 0..grid.n_axes() {
                let h = grid.spacing[a];
                for (d, dir) in [(0usize, -1isize), (1usize, 1isize)] {
                    if let Some(j) = grid.neighbor(idx, a, dir) {
                        if grid.is_in(j) {
                            // Face coefficient: arithmetic mean of √g·g^{aa}.
                            let wa = met.sqrt_det[idx] * met.g_inv[idx][a];
                            let wb = met.sqrt_det[j] * met.g_inv[j][a];
                            let coeff = 0.5 * (wa + wb) / (h * h * sq_c);
                            nb[idx][a][d] = j as i64;
                            tc[idx][a][d] = coeff;
                            diag[idx] += coeff;
                        }
                    }
                }
            }
        }
        FluxOp {
            chart: Arc::clone(chart),
            nb,
            tc,
            diag,
        }
    }

    /// out = Δ_g u (zero at exterior cells).
    pub fn laplacian(&self, u: &[Complex64], out: &mut [Complex64]) {
        let grid = &self.chart.grid;
        let na = grid.n_axes();
        let nb = &self.nb;
        let tc = &self.tc;
        let diag = &self.diag;
        par_fill(out, |idx| {
            if !grid.is_in(idx) {
                return Complex64::new(0.0, 0.0);
            }
            let mut acc = -diag[idx] * u[idx];
            for a in 0..na {
                for d in 0..2 {
                    let j = nb[idx][a][d];
                    if j >= 0 {
                        acc += tc[idx][a][d] * u[j as usize];
                    }
                }
            }
            acc
        });
    }

    /// Face-difference Dirichlet energy Σ_faces coeff·|u_b − u_a|²/2·(weights
    /// folded so that its exact gradient in the weighted metric is −Δ_g u.
    pub fn dirichlet_energy(&self, u: &[Complex64]) -> f64 {
        let grid = &self.chart.grid;
        let met = &self.chart.metric;
        let vol = grid.cell_volume();
        let n = grid.n_cells();
        let mut vals = Vec::with_capacity(n * grid.n_axes());
        for idx in 0..n {
            if !grid.is_in(idx) {
                continue;
            }
            for a in 0..grid.n_axes() {
                // Count each face once: the +dir face.
                let j = self.nb[idx][a][1];
                if j >= 0 {
                    let h = grid.spacing[a];
                    let wa = met.sqrt_det[idx] * met.g_inv[idx][a];
                    let wb = met.sqrt_det[j as usize] * met.g_inv[j as usize][a];
                    let coeff = 0.5 * (wa + wb) / (h * h);
                    let du = u[j as usize] - u[idx];
                    vals.push(0.5 * coeff * du.norm_sqr() * vol);
                }
            }
        }
        pairwise_sum(&vals)
    }
}

/// Quartic potential energy Σ (1−|u|²)²/(4ε²)·√g·vol.
fn potential_energy(chart: &Chart, u: &[Complex64], eps: f64) -> f64 {
    let w = chart.weights();
    let vals: Vec<f64> = u
        .iter()
        .zip(&w)
        .map(|(v, wi)| {
            let q = 1.0 - v.norm_sqr();
            wi * q * q / (4.0 * eps * eps)
        })
        .collect();
    pairwise_sum(&vals)
}

/// Flow Lyapunov functional: face Dirichlet + quartic potential.
pub fn flow_energy(op: &FluxOp, field: &ComplexField) -> f64 {
    op.dirichlet_energy(&field.values) + potential_energy(&field.chart, &field.values, field.epsilon)
}

/// Per-node residual of −Δ_g u − ε⁻²(1−|u|²)u with Neumann via zero-flux
/// (mirror ghost) faces.
pub fn gl_residual(field: &ComplexField) -> Vec<Complex64> {
    let op = FluxOp::new(&field.chart);
    gl_residual_with(&op, field)
}

pub fn gl_residual_with(op: &FluxOp, field: &ComplexField) -> Vec<Complex64> {
    let n = field.chart.grid.n_cells();
    let mut lap = vec![Complex64::new(0.0, 0.0); n];
    op.laplacian(&field.values, &mut lap);
    let eps2 = field.epsilon * field.epsilon;
    let grid = &field.chart.grid;
    let u = &field.values;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    par_fill(&mut out, |i| {
        if grid.is_in(i) {
            -lap[i] - (1.0 - u[i].norm_sqr()) / eps2 * u[i]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    out
}

/// √g-weighted RMS norm: ‖R‖_{L²_g} / √vol_g(M) — resolution-independent.
pub fn residual_norm(field: &ComplexField, residual: &[Complex64]) -> f64 {
    let w = field.chart.weights();
    let vals: Vec<f64> = residual
        .iter()
        .zip(&w)
        .map(|(r, wi)| wi * r.norm_sqr())
        .collect();
    let vol = pairwise_sum(&w);
    (pairwise_sum(&vals) / vol).sqrt()
}

/// Discrete first variation δE_ε(u)(ζ) paired with the face gradient, so it
/// equals ⟨gl_residual(u), ζ⟩_w exactly (the face energy's Gateaux derivative).
pub fn first_variation(field: &ComplexField, zeta: &[Complex64]) -> f64 {
    let op = FluxOp::new(&field.chart);
    first_variation_with(&op, field, zeta)
}

pub fn first_variation_with(op: &FluxOp, field: &ComplexField, zeta: &[Complex64]) -> f64 {
    let res = gl_residual_with(op, field);
    let w = field.chart.weights();
    let vals: Vec<f64> = res
        .iter()
        .zip(zeta)
        .zip(&w)
        .map(|((r, z), wi)| wi * (r.re * z.re + r.im * z.im))
        .collect();
    pairwise_sum(&vals)
}

// Weighted CG on complex fields (operator symmetric in the √g·vol metric).
fn cg_complex<A: Fn(&[Complex64], &mut [Complex64])>(
    apply: A,
    b: &[Complex64],
    x: &mut [Complex64],
    w: &[f64],
    tol_rel: f64,
    max_iter: usize,
) -> (f64, usize, bool) {
    let n = b.len();
    let mut buf: Vec<f64> = Vec::with_capacity(n);
    let dot = |a: &[Complex64], c: &[Complex64], buf: &mut Vec<f64>| -> f64 {
        buf.clear();
        buf.extend(
            a.iter()
                .zip(c)
                .zip(w)
                .map(|((x, y), wi)| wi * (x.re * y.re + x.im * y.im)),
        );
        pairwise_sum(buf)
    };
    let bnorm = dot(b, b, &mut buf).sqrt();
    if bnorm == 0.0 {
        return (0.0, 0, true);
    }
    let mut ax = vec![Complex64::default(); n];
    apply(x, &mut ax);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r, &mut buf);
    let mut ap = vec![Complex64::default(); n];
    for it in 0..max_iter {
        if rr.sqrt() <= tol_rel * bnorm {
            return (rr.sqrt() / bnorm, it, true);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap, &mut buf);
        if pap <= 0.0 {
            // Negative curvature: truncated Newton direction.
            return (rr.sqrt() / bnorm, it, false);
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r, &mut buf);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    (rr.sqrt() / bnorm, max_iter, false)
}

// ---------------------------------------------------------------------------
// Gradient flow
// ---------------------------------------------------------------------------

/// Reaction term of the flow; the quartic GL nonlinearity by default, the §8
/// modified potential when `modified` is set (used by the min-max module).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    Quartic,
    Modified,
}

pub(crate) fn reaction(u: Complex64, eps2: f64, pot: Potential) -> Complex64 {
    match pot {
        Potential::Quartic => (1.0 - u.norm_sqr()) / eps2 * u,
        Potential::Modified => {
            let t = u.norm();
            // −W'(t)·u/t, smooth through t = 0 on the lower branch.
            if t <= 1.0 {
                (1.0 - t * t) / eps2 * u
            } else {
                -2.0 * (t - 1.0) / (t * eps2) * u
            }
        }
    }
}

/// Semi-implicit L² gradient flow of E_ε: (I − dt·Δ_g)u⁺ = u + dt·f(u).
/// Energy (face Lyapunov) is non-increasing for dt ≤ 0.4ε².
pub fn gradient_flow(
    initial: &ComplexField,
    config: &SolverConfig,
) -> Result<(ComplexField, SolveReport)> {
    gradient_flow_pot(initial, config, Potential::Quartic)
}

pub fn gradient_flow_pot(
    initial: &ComplexField,
    config: &SolverConfig,
    pot: Potential,
) -> Result<(ComplexField, SolveReport)> {
    let chart = Arc::clone(&initial.chart);
    match check_resolution(initial.epsilon, &chart.grid) {
        ResolutionStatus::TooCoarse if !config.allow_underresolved => {
            return Err(GlError::UnderResolved {
                eps: initial.epsilon,
                h: chart.grid.max_spacing(),
                msg: "epsilon below 2·max spacing (vortex cores unresolved)".into(),
            });
        }
        _ => {}
    }
    let op = FluxOp::new(&chart);
    let mut field = initial.clone();
    let eps2 = field.epsilon * field.epsilon;
    let dt = config.dt.unwrap_or_else(|| dt_stability(field.epsilon));
    let w = chart.weights();
    let n = chart.grid.n_cells();

    let mut history = Vec::new();
    let mut energy_prev = flow_energy(&op, &field);
    let mut rises = 0usize;
    let mut rhs = vec![Complex64::default(); n];
    let mut final_res = f64::INFINITY;
    let mut steps_done = 0usize;
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        op.laplacian(x, out);
        for i in 0..n {
            out[i] = x[i] - dt * out[i];
        }
    };
    for step in 0..config.max_steps {
        let res = gl_residual_with(&op, &field);
        let rn = residual_norm(&field, &res);
        final_res = rn;
        if step % 10 == 0 || rn <= config.residual_tol {
            history.push((step, energy_prev, rn));
        }
        if rn <= config.residual_tol {
            steps_done = step;
            break;
        }
        // Explicit reaction, implicit Laplacian.
        let grid = &chart.grid;
        let u = &field.values;
        par_fill(&mut rhs, |i| {
            if grid.is_in(i) {
                u[i] + dt * reaction(u[i], eps2, pot)
            } else {
                Complex64::default()
            }
        });
        let mut next = field.values.clone();
        let (_r, _it, _ok) = cg_complex(&apply, &rhs, &mut next, &w, 1e-10, 10_000);
        field.values = next;
        let energy = flow_energy(&op, &field);
        if energy > energy_prev * (1.0 + 1e-12) + 1e-12 {
            rises += 1;
            if rises >= 3 {
                return Err(GlError::FlowInstability(format!(
                    "energy increased 3 consecutive steps at step {} (dt = {:.3e})",
                    step, dt
                )));
            }
        } else {
            rises = 0;
        }
        energy_prev = energy;
        steps_done = step + 1;
    }
    let converged = final_res <= config.residual_tol;
    history.push((steps_done, energy_prev, final_res));
    let report = SolveReport {
        final_residual: final_res,
        steps: steps_done,
        newton_iters: 0,
        energy_history: history,
        converged,
        max_modulus: field.max_modulus(),
        newton_fallbacks: 0,
    };
    if !converged && config.newton_after < final_res {
        // Caller may still polish; report the flow outcome as-is.
    }
    Ok((field, report))
}

// ---------------------------------------------------------------------------
// Newton polishing
// ---------------------------------------------------------------------------

/// Matrix-free Newton with CG inner solves on the linearized operator
/// J δ = −Δ_g δ − ε⁻²(1−|u|²)δ + 2ε⁻²(u·δ)u. Falls back to flow steps when
/// the inner solve hits negative curvature and no damping factor reduces the
/// residual (indefinite Hessian at a saddle).
pub fn newton_polish(
    field: &ComplexField,
    config: &SolverConfig,
) -> Result<(ComplexField, SolveReport)> {
    let chart = Arc::clone(&field.chart);
    let op = FluxOp::new(&chart);
    let n = chart.grid.n_cells();
    let w = chart.weights();
    let eps2 = field.epsilon * field.epsilon;
    let mut cur = field.clone();
    let mut res = gl_residual_with(&op, &cur);
    let mut rn = residual_norm(&cur, &res);
    if rn > config.newton_after {
        return Err(GlError::Precondition(format!(
            "newton_polish needs residual ≤ {:.3e}, got {:.3e}",
            config.newton_after, rn
        )));
    }
    let mut history = vec![(0usize, flow_energy(&op, &cur), rn)];
    let mut fallbacks = 0usize;
    let mut iters = 0usize;
    for it in 0..config.newton_max_iters {
        if rn <= config.residual_tol {
            break;
        }
        iters = it + 1;
        let u_snapshot = cur.values.clone();
        let grid = &chart.grid;
        let apply = |x: &[Complex64], out: &mut [Complex64]| {
            op.laplacian(x, out);
            for i in 0..grid.n_cells() {
                if grid.is_in(i) {
                    let u = u_snapshot[i];
                    let dotp = u.re * x[i].re + u.im * x[i].im;
                    out[i] = -out[i] - (1.0 - u.norm_sqr()) / eps2 * x[i]
                        + 2.0 / eps2 * dotp * u;
                } else {
                    out[i] = Complex64::default();
                }
            }
        };
        let b: Vec<Complex64> = res.iter().map(|r| -r).collect();
        let mut delta = vec![Complex64::default(); n];
        let inner_tol = (rn.sqrt().min(0.1)).max(1e-4);
        let (_rel, _its, _full) = cg_complex(&apply, &b, &mut delta, &w, inner_tol, 4000);
        // Damped acceptance on the residual norm.
        let mut accepted = false;
        for &alpha in &config.damping {
            let mut trial = cur.clone();
            for i in 0..n {
                trial.values[i] += alpha * delta[i];
            }
            let tres = gl_residual_with(&op, &trial);
            let trn = residual_norm(&trial, &tres);
            if trn < rn {
                cur = trial;
                res = tres;
                rn = trn;
                accepted = true;
                break;
            }
        }
        if !accepted {
            // Fall back to a few flow steps to re-enter the Newton basin.
            fallbacks += 1;
            let mut cfg = config.clone();
            cfg.max_steps = 50;
            cfg.residual_tol = rn * 0.5;
            cfg.allow_underresolved = true;
            let (flowed, _rep) = gradient_flow_pot(&cur, &cfg, Potential::Quartic)?;
            cur = flowed;
            res = gl_residual_with(&op, &cur);
            let new_rn = residual_norm(&cur, &res);
            if new_rn >= rn {
                history.push((iters, flow_energy(&op, &cur), new_rn));
                return Err(GlError::LinearStagnation(format!(
                    "Newton stagnated at residual {:.3e} (fallback did not help)",
                    rn
                )));
            }
            rn = new_rn;
        }
        history.push((iters, flow_energy(&op, &cur), rn));
    }
    let converged = rn <= config.residual_tol;
    Ok((
        cur.clone(),
        SolveReport {
            final_residual: rn,
            steps: 0,
            newton_iters: iters,
            energy_history: history,
            converged,
            max_modulus: cur.max_modulus(),
            newton_fallbacks: fallbacks,
        },
    ))
}

/// Flow until the Newton threshold, then polish; the standard solve pipeline.
pub fn solve(initial: &ComplexField, config: &SolverConfig) -> Result<(ComplexField, SolveReport)> {
    let mut flow_cfg = config.clone();
    flow_cfg.residual_tol = config.newton_after.max(config.residual_tol);
    let (flowed, mut report) = gradient_flow(initial, &flow_cfg)?;
    if report.final_residual <= config.residual_tol {
        report.converged = true;
        return Ok((flowed, report));
    }
    if report.final_residual > config.newton_after {
        return Err(GlError::NoConvergence {
            steps: report.steps,
            residual: report.final_residual,
        });
    }
    let (polished, npt) = newton_polish(&flowed, config)?;
    let mut history = report.energy_history.clone();
    history.extend(npt.energy_history.iter().map(|&(s, e, r)| (report.steps + s, e, r)));
    let converged = npt.converged;
    let rep = SolveReport {
        final_residual: npt.final_residual,
        steps: report.steps,
        newton_iters: npt.newton_iters,
        energy_history: history,
        converged,
        max_modulus: polished.max_modulus(),
        newton_fallbacks: npt.newton_fallbacks,
    };
    if !converged {
        return Err(GlError::NoConvergence {
            steps: rep.steps,
            residual: rep.final_residual,
        });
    }
    Ok((polished, rep))
}

// ---------------------------------------------------------------------------
// Reflection (Lemma-style even extension)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ReflectionReport {
    /// Weighted RMS residual over interior cells of the half-ball input.
    pub half_interior_residual: f64,
    /// Same norm for the reflected field on the full ball.
    pub full_interior_residual: f64,
    /// RMS of the one-sided normal derivative on the flat face (Neumann
    /// violation indicator of the *input*).
    pub neumann_violation: f64,
    /// violation > 0.1 · RMS|∇u| flags a non-Neumann input.
    pub flagged: bool,
}

/// Evenly reflect a half-ball field across the flat face: ũ(x′, xⁿ) =
/// u(x′, |xⁿ|), with the metric reflected per the even/odd symmetry class.
/// Returns the full-ball field plus the interior-residual comparison.
pub fn reflect_even(field: &ComplexField) -> Result<(ComplexField, ReflectionReport)> {
    let chart = &field.chart;
    if chart.grid.chart_id != ChartId::HalfBall {
        return Err(GlError::Chart(format!(
            "reflect_even needs the half_ball chart, got {}",
            chart.grid.chart_id.name()
        )));
    }
    let grid = &chart.grid;
    let d = grid.n_axes();
    let nface = d - 1;
    // Full ball with doubled extent along the face axis.
    let mut res_full: Vec<usize> = grid.dims.clone();
    res_full[nface] *= 2;
    let params = ChartParams {
        axes: d,
        radius: grid.params.radius,
        ..grid.params.clone()
    };
    let full = crate::grid::build_chart(ChartId::Ball, &res_full, &params)?;
    let full = Arc::new(reflect_metric(full, nface, chart));
    let nfull = full.grid.n_cells();
    let mut values = vec![Complex64::default(); nfull];
    let nhalf_face = grid.dims[nface];
    for idx in 0..nfull {
        if !full.grid.is_in(idx) {
            continue;
        }
        let mut ijk = full.grid.coords_of(idx);
        // Mirror the face axis: full j ∈ [0, 2N) maps to half |j − N + ...|.
        let j = ijk[nface];
        let hj = if j >= nhalf_face {
            j - nhalf_face
        } else {
            nhalf_face - 1 - j
        };
        ijk[nface] = hj;
        let hidx = grid.index_of(&ijk[..d]);
        values[idx] = if grid.is_in(hidx) {
            field.values[hidx]
        } else {
            Complex64::default()
        };
    }
    let reflected = ComplexField {
        values,
        epsilon: field.epsilon,
        chart: Arc::clone(&full),
    };

    // Interior residual norms (exclude boundary cells of each chart).
    let half_rn = interior_residual(field);
    let full_rn = interior_residual(&reflected);

    // Neumann violation of the input: one-sided ∂_n u at the flat face.
    let mut viol = Vec::new();
    let mut grad_sq = Vec::new();
    let h = grid.spacing[nface];
    let du = crate::field::gradient(field);
    for idx in 0..grid.n_cells() {
        if !grid.is_in(idx) {
            continue;
        }
        grad_sq.push(crate::field::grad_norm_sqr(chart, idx, &du[idx]));
        let ijk = grid.coords_of(idx);
        if ijk[nface] == 0 {
            if let Some(up) = grid.neighbor(idx, nface, 1) {
                if grid.is_in(up) {
                    let dn = (field.values[up] - field.values[idx]) / h;
                    viol.push(dn.norm_sqr());
                }
            }
        }
    }
    let viol_rms = if viol.is_empty() {
        0.0
    } else {
        (pairwise_sum(&viol) / viol.len() as f64).sqrt()
    };
    let grad_rms = (pairwise_sum(&grad_sq) / grad_sq.len().max(1) as f64).sqrt();
    let flagged = viol_rms > 0.1 * grad_rms.max(1e-12);
    Ok((
        reflected,
        ReflectionReport {
            half_interior_residual: half_rn,
            full_interior_residual: full_rn,
            neumann_violation: viol_rms,
            flagged,
        },
    ))
}

/// Even/odd reflection of the metric across the face plane: g_nn and the
/// tangential block are even, mixed components odd. Flat metrics are fixed.
fn reflect_metric(mut full: Chart, _nface: usize, half: &Chart) -> Chart {
    // Built-in half-ball charts are flat; the even extension of the identity
    // is the identity, so only the weight could differ (it does not).
    let _ = half;
    full.metric.lambda = half.metric.lambda;
    full
}

/// Weighted RMS residual over interior (non-boundary) cells.
pub fn interior_residual(field: &ComplexField) -> f64 {
    let res = gl_residual(field);
    let grid = &field.chart.grid;
    let mut num = Vec::new();
    let mut den = Vec::new();
    for i in 0..grid.n_cells() {
        if grid.mask[i] == crate::grid::CellClass::Interior {
            let wi = field.chart.weight(i);
            num.push(wi * res[i].norm_sqr());
            den.push(wi);
        }
    }
    (pairwise_sum(&num) / pairwise_sum(&den).max(1e-300)).sqrt()
}
