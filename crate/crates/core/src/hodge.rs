//! Collocated discrete 1-form calculus and Hodge splitting with the
//! normal-trace boundary condition.
//!
//! Forms live on nodes (covariant components) and share the field module's
//! derivative stencils, so the ψ_k pipeline uses one consistent calculus.
//! The exact part is the weighted least-squares projection onto the range of
//! the discrete gradient D (the normal equations are the variational form of
//! the Neumann-Poisson problem Δα = d*ω, ∂_να = ω(ν)); the coexact part is
//! the projection of the remainder onto the range of a curl-type generator
//! built from the dual potential with tangential trace zeroed on boundary
//! cells. The harmonic part is the remainder, with its harmonicity defect
//! (‖dh‖, ‖d*h‖, ‖𝔫h‖) reported as `residual_norm`.

use crate::error::{GlError, Result};
use crate::field::{gradient_scalar, ComplexField};
use crate::grid::{CellClass, Chart, ChartId};
use crate::util::pairwise_sum;
use std::collections::VecDeque;
use std::sync::Arc;

/// Node-based 1-form with covariant components ω_i; exterior nodes hold 0.
#[derive(Debug, Clone)]
pub struct DiscreteOneForm {
    pub components: Vec<[f64; 3]>,
    pub chart: Arc<Chart>,
}

impl DiscreteOneForm {
    pub fn zero(chart: Arc<Chart>) -> Self {
        let n = chart.grid.n_cells();
        DiscreteOneForm {
            components: vec![[0.0; 3]; n],
            chart,
        }
    }

    pub fn from_fn<F: Fn([f64; 3]) -> [f64; 3]>(chart: Arc<Chart>, f: F) -> Self {
        let n = chart.grid.n_cells();
        let components = (0..n)
            .map(|i| {
                if chart.grid.is_in(i) {
                    f(chart.grid.center(i))
                } else {
                    [0.0; 3]
                }
            })
            .collect();
        DiscreteOneForm { components, chart }
    }

    /// Constant covariant components on the masked-in region.
    pub fn constant(chart: Arc<Chart>, c: [f64; 3]) -> Self {
        Self::from_fn(chart, move |_| c)
    }

    /// Weighted L²_g inner product Σ w_c g^{ij} ω_i τ_j.
    pub fn inner(&self, other: &DiscreteOneForm) -> f64 {
        let chart = &self.chart;
        let vals: Vec<f64> = (0..chart.grid.n_cells())
            .map(|i| {
                if chart.grid.is_in(i) {
                    chart.weight(i)
                        * chart
                            .metric
                            .form_inner(i, &self.components[i], &other.components[i])
                } else {
                    0.0
                }
            })
            .collect();
        pairwise_sum(&vals)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &DiscreteOneForm) {
        for (c, o) in self.components.iter_mut().zip(&other.components) {
            for k in 0..3 {
                c[k] += a * o[k];
            }
        }
    }

    pub fn scaled(&self, a: f64) -> DiscreteOneForm {
        let mut out = self.clone();
        for c in out.components.iter_mut() {
            for k in 0..3 {
                c[k] *= a;
            }
        }
        out
    }

    pub fn minus(&self, other: &DiscreteOneForm) -> DiscreteOneForm {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// RMS of the normal trace ω(ν) over boundary cells.
    pub fn normal_trace_rms(&self) -> f64 {
        let bn = &self.chart.normal;
        if bn.cells.is_empty() {
            return 0.0;
        }
        let vals: Vec<f64> = bn
            .cells
            .iter()
            .zip(&bn.nu)
            .map(|(&i, nu)| {
                let w = self.components[i];
                let t = w[0] * nu[0] + w[1] * nu[1] + w[2] * nu[2];
                t * t
            })
            .collect();
        (pairwise_sum(&vals) / vals.len() as f64).sqrt()
    }
}

/// Antisymmetric 2-form components, pair order (01), (02), (12).
#[derive(Debug, Clone)]
pub struct DiscreteTwoForm {
    pub components: Vec<[f64; 3]>,
    pub chart: Arc<Chart>,
}

impl DiscreteTwoForm {
    /// Weighted L² norm for diagonal metrics: |τ|² = Σ_{a<b} g^{aa}g^{bb}τ_{ab}².
    pub fn norm(&self) -> f64 {
        let chart = &self.chart;
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        let vals: Vec<f64> = (0..chart.grid.n_cells())
            .map(|i| {
                if !chart.grid.is_in(i) {
                    return 0.0;
                }
                let gi = &chart.metric.g_inv[i];
                let mut s = 0.0;
                for (k, (a, b)) in pairs.iter().enumerate() {
                    s += gi[*a] * gi[*b] * self.components[i][k] * self.components[i][k];
                }
                chart.weight(i) * s
            })
            .collect();
        pairwise_sum(&vals).max(0.0).sqrt()
    }
}

/// Exterior differential (dω)_{ab} = ∂_aω_b − ∂_bω_a with shared stencils.
pub fn d(form: &DiscreteOneForm) -> DiscreteTwoForm {
    let chart = &form.chart;
    let n = chart.grid.n_cells();
    let na = chart.grid.n_axes();
    let comp_a: Vec<Vec<f64>> = (0..3)
        .map(|a| form.components.iter().map(|c| c[a]).collect())
        .collect();
    let grads: Vec<Vec<[f64; 3]>> = (0..na).map(|a| gradient_scalar(chart, &comp_a[a])).collect();
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut out = vec![[0.0; 3]; n];
    for i in 0..n {
        if !chart.grid.is_in(i) {
            continue;
        }
        for (k, (a, b)) in pairs.iter().enumerate() {
            if *a < na && *b < na {
                out[i][k] = grads[*b][i][*a] - grads[*a][i][*b];
            }
        }
    }
    DiscreteTwoForm {
        components: out,
        chart: Arc::clone(chart),
    }
}

/// Codifferential d*ω = −(1/√det g)·∂_i(√det g · g^{ij} ω_j), shared stencils.
pub fn d_star(form: &DiscreteOneForm) -> Vec<f64> {
    let chart = &form.chart;
    let grid = &chart.grid;
    let n = grid.n_cells();
    let na = grid.n_axes();
    // Densitized contravariant components V^i = √g g^{ij} ω_j.
    let mut dens: Vec<Vec<f64>> = vec![vec![0.0; n]; na];
    for i in 0..n {
        if !grid.is_in(i) {
            continue;
        }
        let gi = &chart.metric.g_inv[i];
        let w = &form.components[i];
        let sq = chart.metric.sqrt_det[i];
        let v = [
            gi[0] * w[0] + gi[3] * w[1] + gi[4] * w[2],
            gi[3] * w[0] + gi[1] * w[1] + gi[5] * w[2],
            gi[4] * w[0] + gi[5] * w[1] + gi[2] * w[2],
        ];
        for a in 0..na {
            dens[a][i] = sq * v[a];
        }
    }
    let mut out = vec![0.0; n];
    for a in 0..na {
        let gr = gradient_scalar(chart, &dens[a]);
        for i in 0..n {
            if grid.is_in(i) {
                out[i] -= gr[i][a] / chart.metric.sqrt_det[i];
            }
        }
    }
    out
}

/// Weighted L² norm of a node scalar.
pub fn scalar_norm(chart: &Chart, vals: &[f64]) -> f64 {
    let w = chart.weights();
    let sq: Vec<f64> = vals.iter().zip(&w).map(|(v, wi)| wi * v * v).collect();
    pairwise_sum(&sq).max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Hop distance to the nearest stencil irregularity (mask edge, non-periodic
/// end, degenerate axis). u32::MAX on charts without any (the torus).
pub fn mask_distance(chart: &Chart) -> Vec<u32> {
    let grid = &chart.grid;
    let n = grid.n_cells();
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for idx in 0..n {
        if !grid.is_in(idx) {
            continue;
        }
        let mut edge = false;
        for a in 0..grid.n_axes() {
            for dir in [-1isize, 1] {
                match grid.neighbor(idx, a, dir) {
                    Some(nb) => {
                        if !grid.is_in(nb) {
                            edge = true;
                        }
                    }
                    None => edge = true,
                }
            }
        }
        if edge {
            dist[idx] = 0;
            queue.push_back(idx);
        }
    }
    while let Some(cur) = queue.pop_front() {
        for a in 0..grid.n_axes() {
            for dir in [-1isize, 1] {
                if let Some(nb) = grid.neighbor(cur, a, dir) {
                    if grid.is_in(nb) && dist[nb] == u32::MAX {
                        dist[nb] = dist[cur] + 1;
                        queue.push_back(nb);
                    }
                }
            }
        }
    }
    dist
}

/// Plain conjugate gradients on a symmetric PSD operator, deterministic dots.
fn cg<A: Fn(&[f64], &mut [f64])>(
    apply: A,
    b: &[f64],
    x: &mut [f64],
    tol_rel: f64,
    max_iter: usize,
) -> (f64, bool) {
    let n = b.len();
    let mut buf = Vec::with_capacity(n);
    let dot = |a: &[f64], c: &[f64], buf: &mut Vec<f64>| -> f64 {
        buf.clear();
        buf.extend(a.iter().zip(c).map(|(x, y)| x * y));
        pairwise_sum(buf)
    };
    let bnorm = dot(b, b, &mut buf).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (0.0, true);
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r, &mut buf);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        if rr.sqrt() <= tol_rel * bnorm {
            return (rr.sqrt() / bnorm, true);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap, &mut buf);
        if pap <= 0.0 {
            // PSD operator reached numerical null space; the iterate is the
            // least-squares answer to working precision.
            return (rr.sqrt() / bnorm, rr.sqrt() <= tol_rel.max(1e-9) * bnorm);
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
    (rr.sqrt() / bnorm, rr.sqrt() <= tol_rel * bnorm)
}

/// Gradient as a flat linear map: α (cell scalars) → covariant components.
fn apply_d(chart: &Chart, alpha: &[f64]) -> Vec<[f64; 3]> {
    gradient_scalar(chart, alpha)
}

/// Transpose of `apply_d` w.r.t. the standard dot (scatter form).
fn apply_d_transpose(chart: &Chart, sigma: &[[f64; 3]]) -> Vec<f64> {
    let grid = &chart.grid;
    let n = grid.n_cells();
    let mut out = vec![0.0; n];
    for idx in 0..n {
        if !grid.is_in(idx) {
            continue;
        }
        for a in 0..grid.n_axes() {
            let s = sigma[idx][a];
            if s == 0.0 {
                continue;
            }
            let kind = super::field::stencil_taps(chart, idx, a);
            let h = grid.spacing[a];
            for &(off, c) in kind {
                let j = if off == 0 {
                    idx
                } else {
                    grid.offset_in_mask(idx, a, off).unwrap()
                };
                out[j] += c / h * s;
            }
        }
    }
    out
}

/// Raise indices and weight: σ_i ↦ w_c g^{ij} σ_j (zero at exterior cells).
fn raise_weight(chart: &Chart, sigma: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = chart.grid.n_cells();
    let mut out = vec![[0.0; 3]; n];
    for i in 0..n {
        if !chart.grid.is_in(i) {
            continue;
        }
        let gi = &chart.metric.g_inv[i];
        let w = chart.weight(i);
        let s = &sigma[i];
        out[i] = [
            w * (gi[0] * s[0] + gi[3] * s[1] + gi[4] * s[2]),
            w * (gi[3] * s[0] + gi[1] * s[1] + gi[5] * s[2]),
            w * (gi[4] * s[0] + gi[5] * s[1] + gi[2] * s[2]),
        ];
    }
    out
}

/// Least-squares projection of ω onto range(D): returns (α mean-zero, Dα).
/// The normal equations DᵀW(Dα) = DᵀWω are the discrete Neumann-Poisson
/// problem Δα = d*ω with natural boundary condition ∂_να = ω(ν).
pub fn project_exact(omega: &DiscreteOneForm, tol: f64) -> (Vec<f64>, DiscreteOneForm, bool) {
    let chart = &omega.chart;
    let n = chart.grid.n_cells();
    let b = apply_d_transpose(chart, &raise_weight(chart, &omega.components));
    let apply = |x: &[f64], out: &mut [f64]| {
        let dx = apply_d(chart, x);
        let up = raise_weight(chart, &dx);
        let res = apply_d_transpose(chart, &up);
        out.copy_from_slice(&res);
    };
    let mut alpha = vec![0.0; n];
    let (_rel, ok) = cg(apply, &b, &mut alpha, 1e-11, 20 * n.max(200));
    // Mean-zero gauge over the weighted measure.
    let w = chart.weights();
    let wsum = pairwise_sum(&w);
    let m: Vec<f64> = alpha.iter().zip(&w).map(|(a, wi)| a * wi).collect();
    let mean = pairwise_sum(&m) / wsum;
    for (a, wi) in alpha.iter_mut().zip(&w) {
        if *wi > 0.0 {
            *a -= mean;
        }
    }
    let exact = DiscreteOneForm {
        components: apply_d(chart, &alpha),
        chart: Arc::clone(chart),
    };
    let _ = tol;
    (alpha, exact, ok)
}

// Curl-type generator for the coexact part. Potential components: one scalar
// q in 2D (the dual of the 2-form density), three components in 3D. Tangential
// trace is imposed by zeroing the potential on boundary and degenerate-axis
// cells; derivatives use mirrored central differences so the generator's
// adjoint telescopes exactly on constant-component forms.

fn potential_dims(chart: &Chart) -> usize {
    if chart.grid.n_axes() == 2 {
        1
    } else {
        3
    }
}

fn potential_free(chart: &Chart) -> Vec<bool> {
    let grid = &chart.grid;
    let n = grid.n_cells();
    let mut free = vec![false; n];
    for idx in 0..n {
        if !grid.is_in(idx) || grid.mask[idx] == CellClass::Boundary {
            continue;
        }
        let ijk = grid.coords_of(idx);
        let mut on_axis = false;
        for a in 0..grid.n_axes() {
            if grid.axis_low[a] && ijk[a] == 0 {
                on_axis = true;
            }
        }
        if !on_axis {
            free[idx] = true;
        }
    }
    free
}

/// Mirrored central difference: ghost value = end-cell value at any missing
/// neighbor, so sums of (D̃f) along a line telescope to end-cell differences.
fn mirror_diff(chart: &Chart, vals: &[f64], idx: usize, axis: usize) -> f64 {
    let grid = &chart.grid;
    let h = grid.spacing[axis];
    let up = grid
        .neighbor(idx, axis, 1)
        .filter(|&j| grid.is_in(j))
        .map(|j| vals[j])
        .unwrap_or(vals[idx]);
    let dn = grid
        .neighbor(idx, axis, -1)
        .filter(|&j| grid.is_in(j))
        .map(|j| vals[j])
        .unwrap_or(vals[idx]);
    (up - dn) / (2.0 * h)
}

/// Densitized contravariant curl: v^i = ε^{ijk} D̃_j a_k (2D: v^1 = D̃₂q,
/// v^2 = −D̃₁q). The √det g of the measure cancels against the generator's
/// 1/√det g, so ⟨Ca, σ⟩_W = cellvol·Σ v^i σ_i for covariant σ.
fn apply_c_raw(chart: &Chart, pot: &[f64]) -> Vec<[f64; 3]> {
    let grid = &chart.grid;
    let n = grid.n_cells();
    let mut out = vec![[0.0; 3]; n];
    if grid.n_axes() == 2 {
        for idx in 0..n {
            if !grid.is_in(idx) {
                continue;
            }
            out[idx][0] = mirror_diff(chart, pot, idx, 1);
            out[idx][1] = -mirror_diff(chart, pot, idx, 0);
        }
    } else {
        let comp = |k: usize| -> Vec<f64> { pot[k * n..(k + 1) * n].to_vec() };
        let a0 = comp(0);
        let a1 = comp(1);
        let a2 = comp(2);
        for idx in 0..n {
            if !grid.is_in(idx) {
                continue;
            }
            out[idx][0] =
                mirror_diff(chart, &a2, idx, 1) - mirror_diff(chart, &a1, idx, 2);
            out[idx][1] =
                mirror_diff(chart, &a0, idx, 2) - mirror_diff(chart, &a2, idx, 0);
            out[idx][2] =
                mirror_diff(chart, &a1, idx, 0) - mirror_diff(chart, &a0, idx, 1);
        }
    }
    out
}

/// Transpose of `apply_c_raw` (standard dot), scatter form.
fn apply_c_raw_transpose(chart: &Chart, v: &[[f64; 3]]) -> Vec<f64> {
    let grid = &chart.grid;
    let n = grid.n_cells();
    let pd = potential_dims(chart);
    let mut out = vec![0.0; pd * n];
    // (idx, comp of v, axis of D̃, potential component, sign)
    let terms_2d: &[(usize, usize, usize, f64)] = &[(0, 1, 0, 1.0), (1, 0, 0, -1.0)];
    let terms_3d: &[(usize, usize, usize, f64)] = &[
        (0, 1, 2, 1.0),
        (0, 2, 1, -1.0),
        (1, 2, 0, 1.0),
        (1, 0, 2, -1.0),
        (2, 0, 1, 1.0),
        (2, 1, 0, -1.0),
    ];
    let terms = if grid.n_axes() == 2 { terms_2d } else { terms_3d };
    for idx in 0..n {
        if !grid.is_in(idx) {
            continue;
        }
        for &(vcomp, daxis, pcomp, sign) in terms {
            let s = sign * v[idx][vcomp];
            if s == 0.0 {
                continue;
            }
            let h = grid.spacing[daxis];
            // Transpose of the mirrored central difference at this cell.
            let up = grid.neighbor(idx, daxis, 1).filter(|&j| grid.is_in(j));
            let dn = grid.neighbor(idx, daxis, -1).filter(|&j| grid.is_in(j));
            let c = s / (2.0 * h);
            match up {
                Some(j) => out[pcomp * n + j] += c,
                None => out[pcomp * n + idx] += c,
            }
            match dn {
                Some(j) => out[pcomp * n + j] -= c,
                None => out[pcomp * n + idx] -= c,
            }
        }
    }
    out
}

/// Lower indices with 1/√det g and the cell volume folded in: covariant
/// components of C(pot) are g_{ij} v^j / √det g.
fn lower_density(chart: &Chart, v: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = chart.grid.n_cells();
    let mut out = vec![[0.0; 3]; n];
    for i in 0..n {
        if !chart.grid.is_in(i) {
            continue;
        }
        let g = &chart.metric.g[i];
        let sq = chart.metric.sqrt_det[i];
        let vi = &v[i];
        out[i] = [
            (g[0] * vi[0] + g[3] * vi[1] + g[4] * vi[2]) / sq,
            (g[3] * vi[0] + g[1] * vi[1] + g[5] * vi[2]) / sq,
            (g[4] * vi[0] + g[5] * vi[1] + g[2] * vi[2]) / sq,
        ];
    }
    out
}

/// Least-squares projection of ω onto range(C): returns (potential, Cpot).
pub fn project_coexact(omega: &DiscreteOneForm, tol: f64) -> (Vec<f64>, DiscreteOneForm, bool) {
    let chart = &omega.chart;
    let grid = &chart.grid;
    let n = grid.n_cells();
    let pd = potential_dims(chart);
    let free = potential_free(chart);
    let vol = grid.cell_volume();
    let mask_pot = |x: &mut [f64]| {
        for k in 0..pd {
            for i in 0..n {
                if !free[i] {
                    x[k * n + i] = 0.0;
                }
            }
        }
    };
    // RHS: Cᵀ(vol·ω_cov) restricted to free dofs.
    let mut sig = vec![[0.0; 3]; n];
    for i in 0..n {
        if grid.is_in(i) {
            for a in 0..3 {
                sig[i][a] = vol * omega.components[i][a];
            }
        }
    }
    let mut b = apply_c_raw_transpose(chart, &sig);
    mask_pot(&mut b);
    let apply = |x: &[f64], out: &mut [f64]| {
        let mut xm = x.to_vec();
        mask_pot(&mut xm);
        let v = apply_c_raw(chart, &xm);
        // mid: vol·g_{jm}v^m/√g = vol × covariant components of C x.
        let cov = lower_density(chart, &v);
        let mut mid = vec![[0.0; 3]; n];
        for i in 0..n {
            if grid.is_in(i) {
                for a in 0..3 {
                    mid[i][a] = vol * cov[i][a];
                }
            }
        }
        let mut res = apply_c_raw_transpose(chart, &mid);
        mask_pot(&mut res);
        out.copy_from_slice(&res);
    };
    let mut pot = vec![0.0; pd * n];
    let (_rel, ok) = cg(apply, &b, &mut pot, 1e-11, 25 * n.max(200));
    mask_pot(&mut pot);
    let coexact = DiscreteOneForm {
        components: lower_density(chart, &apply_c_raw(chart, &pot)),
        chart: Arc::clone(chart),
    };
    let _ = tol;
    (pot, coexact, ok)
}

// ---------------------------------------------------------------------------
// Hodge decomposition
// ---------------------------------------------------------------------------

/// ω = harmonic + exact (dα) + coexact (d*β), with `residual_norm` reporting
/// the harmonicity defect of the harmonic remainder.
#[derive(Debug, Clone)]
pub struct HodgeSplit {
    pub harmonic: DiscreteOneForm,
    pub exact: DiscreteOneForm,
    pub coexact: DiscreteOneForm,
    /// Scalar potential of the exact part (mean-zero gauge).
    pub alpha: Vec<f64>,
    /// Harmonicity defect of the harmonic part: ‖dh‖ + ‖d*h‖ + ‖𝔫h‖ (each
    /// weighted-L²/RMS), relative to ‖h‖ when h is nonzero.
    pub residual_norm: f64,
    /// Inner linear solves reached tolerance.
    pub solves_converged: bool,
}

pub fn hodge_decompose(omega: &DiscreteOneForm) -> HodgeSplit {
    let (alpha, exact, ok_e) = project_exact(omega, 1e-11);
    let r1 = omega.minus(&exact);
    let (_pot, coexact, ok_c) = project_coexact(&r1, 1e-11);
    let harmonic = r1.minus(&coexact);
    let hn = harmonic.norm();
    let defect = if hn > 0.0 {
        let dh = d(&harmonic).norm();
        let dsh = scalar_norm(&omega.chart, &d_star(&harmonic));
        let nh = harmonic.normal_trace_rms();
        (dh + dsh + nh) / hn.max(1e-300)
    } else {
        0.0
    };
    HodgeSplit {
        harmonic,
        exact,
        coexact,
        alpha,
        residual_norm: defect,
        solves_converged: ok_e && ok_c,
    }
}

/// Discrete harmonic basis of the chart, from its known cohomology:
/// the periodic box contributes dx_a per periodic axis (when all axes are
/// periodic), the product chart contributes ds; simply connected charts have
/// none. Representatives are passed through `hodge_decompose` so each basis
/// form is harmonic for the discrete operators to solver tolerance.
pub fn harmonic_basis(chart: &Arc<Chart>) -> Vec<DiscreteOneForm> {
    let mut seeds = Vec::new();
    match chart.grid.chart_id {
        ChartId::ProductS1Hemisphere => {
            seeds.push([1.0, 0.0, 0.0]);
        }
        ChartId::Box => {
            if chart.grid.periodic.iter().all(|&p| p) {
                for a in 0..chart.grid.n_axes() {
                    let mut c = [0.0; 3];
                    c[a] = 1.0;
                    seeds.push(c);
                }
            }
        }
        _ => {}
    }
    seeds
        .into_iter()
        .map(|c| {
            let form = DiscreteOneForm::constant(Arc::clone(chart), c);
            hodge_decompose(&form).harmonic
        })
        .collect()
}

/// Projection of ω onto the span of the chart's discrete harmonic basis.
pub fn harmonic_projection(omega: &DiscreteOneForm, basis: &[DiscreteOneForm]) -> DiscreteOneForm {
    let mut out = DiscreteOneForm::zero(Arc::clone(&omega.chart));
    for h in basis {
        let hh = h.inner(h);
        if hh > 0.0 {
            out.axpy(omega.inner(h) / hh, h);
        }
    }
    out
}

/// Diagnostics for one ψ_k = |log ε_k|^{−1/2}·u_k×du_k.
#[derive(Debug, Clone)]
pub struct PsiDiagnostics {
    pub psi: DiscreteOneForm,
    pub harmonic: DiscreteOneForm,
    pub d_norm: f64,
    pub dstar_norm: f64,
    pub ntrace_rms: f64,
    /// ‖ψ − harmonic(ψ)‖ / ‖ψ‖.
    pub nonharmonic_fraction: f64,
}

/// Extract ψ_k from converged fields; rejects fields whose scaled residual
/// exceeds `residual_tol`.
pub fn extract_psi(
    fields: &[ComplexField],
    residual_tol: f64,
) -> Result<Vec<PsiDiagnostics>> {
    let mut out = Vec::new();
    for field in fields {
        let res = crate::solver::gl_residual(field);
        let rn = crate::solver::residual_norm(field, &res);
        if rn > residual_tol {
            return Err(GlError::Precondition(format!(
                "extract_psi needs converged fields: residual {:.3e} > {:.3e}",
                rn, residual_tol
            )));
        }
        let scale = 1.0 / field.epsilon.ln().abs().sqrt();
        let psi = crate::field::u_cross_du(field).scaled(scale);
        let basis = harmonic_basis(&field.chart);
        let harmonic = harmonic_projection(&psi, &basis);
        let diff = psi.minus(&harmonic);
        let pn = psi.norm();
        out.push(PsiDiagnostics {
            d_norm: d(&psi).norm(),
            dstar_norm: scalar_norm(&field.chart, &d_star(&psi)),
            ntrace_rms: psi.normal_trace_rms(),
            nonharmonic_fraction: if pn > 0.0 { diff.norm() / pn } else { 0.0 },
            psi,
            harmonic,
        });
    }
    Ok(out)
}

/// Random form in the discretely representable class ω = D f + C q, with
/// potentials vanishing within `margin` cells of any stencil irregularity
/// (on the torus the margin is vacuous). Used by the Hodge property suite.
pub fn random_representable_form(
    chart: &Arc<Chart>,
    seed: u64,
    margin: u32,
) -> DiscreteOneForm {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = &chart.grid;
    let n = grid.n_cells();
    let dist = mask_distance(chart);
    let pd = potential_dims(chart);
    let mut f = vec![0.0; n];
    let mut q = vec![0.0; pd * n];
    for i in 0..n {
        if grid.is_in(i) && dist[i] >= margin {
            f[i] = rng.gen::<f64>() * 2.0 - 1.0;
            for k in 0..pd {
                q[k * n + i] = rng.gen::<f64>() * 2.0 - 1.0;
            }
        }
    }
    let mut comp = gradient_scalar(chart, &f);
    let curl = lower_density(chart, &apply_c_raw(chart, &q));
    for i in 0..n {
        for a in 0..3 {
            comp[i][a] += curl[i][a];
        }
    }
    DiscreteOneForm {
        components: comp,
        chart: Arc::clone(chart),
    }
}
