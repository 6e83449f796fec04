//! Structured grids with per-node metric coefficients, masked domains, and
//! boundary classification for the built-in coordinate charts.
//!
//! Cells are collocated with nodes: node i sits at the center of cell i,
//! `x = origin + (i + 1/2)·spacing`. Mask and ball membership use cell-center
//! point sampling (no cut cells). Degenerate coordinate axes (the r = 0 pole
//! of the product chart, the r = 0 symmetry axis of the half ellipse) are not
//! boundaries: the flux coefficient vanishes there and no normal is defined.

use crate::error::{GlError, Result};
use crate::util::pairwise_sum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartId {
    Box,
    ProductS1Hemisphere,
    HalfEllipseRz,
    HalfBall,
    Ball,
}

impl ChartId {
    pub fn name(self) -> &'static str {
        match self {
            ChartId::Box => "box",
            ChartId::ProductS1Hemisphere => "product_s1_hemisphere",
            ChartId::HalfEllipseRz => "half_ellipse_rz",
            ChartId::HalfBall => "half_ball",
            ChartId::Ball => "ball",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Exterior,
    Interior,
    Boundary,
}

/// Chart construction parameters. Fields are read per chart:
/// `lengths`/`periodic` by `box`, `radius`+`axes` by `ball`/`half_ball`,
/// `elongation` (l) by `half_ellipse_rz`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChartParams {
    pub lengths: Vec<f64>,
    pub periodic: Vec<bool>,
    pub radius: f64,
    pub axes: usize,
    pub elongation: f64,
}

impl Default for ChartParams {
    fn default() -> Self {
        ChartParams {
            lengths: vec![1.0; 3],
            periodic: vec![false; 3],
            radius: 1.0,
            axes: 2,
            elongation: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuredGrid {
    pub chart_id: ChartId,
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub periodic: Vec<bool>,
    /// Degenerate (zero-measure weight, zero-flux) low end per axis.
    pub axis_low: Vec<bool>,
    pub mask: Vec<CellClass>,
    pub params: ChartParams,
}

impl StructuredGrid {
    pub fn n_axes(&self) -> usize {
        self.dims.len()
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    #[inline]
    pub fn index_of(&self, ijk: &[usize]) -> usize {
        let mut idx = 0;
        for (a, &i) in ijk.iter().enumerate() {
            idx = idx * self.dims[a] + i;
        }
        idx
    }

    #[inline]
    pub fn coords_of(&self, mut idx: usize) -> [usize; 3] {
        let n = self.n_axes();
        let mut out = [0usize; 3];
        for a in (0..n).rev() {
            out[a] = idx % self.dims[a];
            idx /= self.dims[a];
        }
        out
    }

    /// Cell-center chart coordinates.
    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let ijk = self.coords_of(idx);
        let mut x = [0.0; 3];
        for a in 0..self.n_axes() {
            x[a] = self.origin[a] + (ijk[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    /// Face-neighbor along `axis` in direction `dir` (±1); respects periodic wrap.
    /// Returns `None` past a non-periodic end.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let ijk = self.coords_of(idx);
        let d = self.dims[axis] as isize;
        let mut i = ijk[axis] as isize + dir;
        if self.periodic[axis] {
            i = i.rem_euclid(d);
        } else if i < 0 || i >= d {
            return None;
        }
        let step: usize = self.dims[axis + 1..].iter().product();
        let base = idx as isize + (i - ijk[axis] as isize) * step as isize;
        Some(base as usize)
    }

    /// Neighbor at offset `k` cells (may be negative) along `axis`, only if
    /// every intermediate cell stays inside the mask.
    pub fn offset_in_mask(&self, idx: usize, axis: usize, k: isize) -> Option<usize> {
        let mut cur = idx;
        let dir = if k >= 0 { 1 } else { -1 };
        for _ in 0..k.unsigned_abs() {
            cur = self.neighbor(cur, axis, dir)?;
            if self.mask[cur] == CellClass::Exterior {
                return None;
            }
        }
        Some(cur)
    }

    #[inline]
    pub fn is_in(&self, idx: usize) -> bool {
        self.mask[idx] != CellClass::Exterior
    }

    /// Indices of all masked-in cells, ascending.
    pub fn cells_in(&self) -> Vec<usize> {
        (0..self.n_cells()).filter(|&i| self.is_in(i)).collect()
    }

    /// Per-axis coordinate delta from `a` to `b`, shortest across periodic wrap.
    pub fn delta(&self, a: usize, b: usize) -> [f64; 3] {
        let xa = self.center(a);
        let xb = self.center(b);
        let mut d = [0.0; 3];
        for ax in 0..self.n_axes() {
            let mut dd = xb[ax] - xa[ax];
            if self.periodic[ax] {
                let period = self.dims[ax] as f64 * self.spacing[ax];
                dd -= (dd / period).round() * period;
            }
            d[ax] = dd;
        }
        d
    }

    /// Chart-coordinate Euclidean distance (periodic-aware).
    pub fn chart_distance(&self, a: usize, b: usize) -> f64 {
        let d = self.delta(a, b);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Reclassify Interior/Boundary from the mask: a masked-in cell is Boundary
    /// iff some face neighbor is exterior or past a non-periodic, non-axis end.
    pub fn classify_boundary(&mut self) {
        let n = self.n_cells();
        let mut new_mask = self.mask.clone();
        for idx in 0..n {
            if self.mask[idx] == CellClass::Exterior {
                continue;
            }
            let ijk = self.coords_of(idx);
            let mut on_boundary = false;
            for a in 0..self.n_axes() {
                for dir in [-1isize, 1] {
                    match self.neighbor(idx, a, dir) {
                        Some(nb) => {
                            if self.mask[nb] == CellClass::Exterior {
                                on_boundary = true;
                            }
                        }
                        None => {
                            // Low end of a degenerate axis is not a boundary.
                            let degenerate = dir == -1 && self.axis_low[a] && ijk[a] == 0;
                            if !degenerate {
                                on_boundary = true;
                            }
                        }
                    }
                }
            }
            new_mask[idx] = if on_boundary {
                CellClass::Boundary
            } else {
                CellClass::Interior
            };
        }
        self.mask = new_mask;
    }
}

/// Per-node symmetric metric g_ij, its inverse, and the volume weight.
///
/// Component layout: `[g11, g22, g33, g12, g13, g23]`, unused axes padded with
/// the identity. For the half-ellipse chart `sqrt_det` stores the reduced
/// cylindrical weight r (the metric itself is flat), so all integrals carry
/// the 2πr dr dz measure with 2π folded into reporting.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub g: Vec<[f64; 6]>,
    pub g_inv: Vec<[f64; 6]>,
    pub sqrt_det: Vec<f64>,
    /// Ellipticity constant: min over masked-in nodes of the smallest eigenvalue.
    pub lambda: f64,
}

impl MetricField {
    pub fn flat(n_cells: usize, weight: Option<Vec<f64>>) -> Self {
        let id = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        MetricField {
            g: vec![id; n_cells],
            g_inv: vec![id; n_cells],
            sqrt_det: weight.unwrap_or_else(|| vec![1.0; n_cells]),
            lambda: 1.0,
        }
    }

    /// g-inner product of covariant (form) components via g^{ij}.
    #[inline]
    pub fn form_inner(&self, idx: usize, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let gi = &self.g_inv[idx];
        gi[0] * a[0] * b[0]
            + gi[1] * a[1] * b[1]
            + gi[2] * a[2] * b[2]
            + gi[3] * (a[0] * b[1] + a[1] * b[0])
            + gi[4] * (a[0] * b[2] + a[2] * b[0])
            + gi[5] * (a[1] * b[2] + a[2] * b[1])
    }

    /// g-inner product of contravariant (vector) components via g_ij.
    #[inline]
    pub fn vector_inner(&self, idx: usize, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let g = &self.g[idx];
        g[0] * a[0] * b[0]
            + g[1] * a[1] * b[1]
            + g[2] * a[2] * b[2]
            + g[3] * (a[0] * b[1] + a[1] * b[0])
            + g[4] * (a[0] * b[2] + a[2] * b[0])
            + g[5] * (a[1] * b[2] + a[2] * b[1])
    }
}

/// Inward unit normals (w.r.t. g) at boundary cells.
#[derive(Debug, Clone, Default)]
pub struct BoundaryNormal {
    /// Sorted boundary cell indices.
    pub cells: Vec<usize>,
    /// Inward unit normal per entry of `cells` (contravariant chart components).
    pub nu: Vec<[f64; 3]>,
}

impl BoundaryNormal {
    pub fn normal_of(&self, idx: usize) -> Option<[f64; 3]> {
        self.cells
            .binary_search(&idx)
            .ok()
            .map(|pos| self.nu[pos])
    }
}

/// Grid + metric + boundary normals, immutable after construction.
#[derive(Debug, Clone)]
pub struct Chart {
    pub grid: StructuredGrid,
    pub metric: MetricField,
    pub normal: BoundaryNormal,
}

impl Chart {
    /// Weight of cell `idx` in the volume measure: √det(g)·cellvol.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.metric.sqrt_det[idx] * self.grid.cell_volume()
    }

    /// Total volume Σ √det(g)·cellvol over masked-in cells.
    pub fn volume(&self) -> f64 {
        let vals: Vec<f64> = (0..self.grid.n_cells())
            .map(|i| if self.grid.is_in(i) { self.weight(i) } else { 0.0 })
            .collect();
        pairwise_sum(&vals)
    }

    /// Per-cell weights (0 at exterior), used by all weighted reductions.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.grid.n_cells())
            .map(|i| if self.grid.is_in(i) { self.weight(i) } else { 0.0 })
            .collect()
    }
}

/// Specification of a chart build, serializable: reconstructing from this is
/// bit-deterministic.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChartSpec {
    pub id: ChartId,
    pub resolution: Vec<usize>,
    pub params: ChartParams,
}

impl ChartSpec {
    pub fn build(&self) -> Result<Chart> {
        build_chart(self.id, &self.resolution, &self.params)
    }
}

fn validate_resolution(resolution: &[usize], n_axes: usize) -> Result<()> {
    if resolution.len() != n_axes {
        return Err(GlError::Chart(format!(
            "expected {} resolution entries, got {}",
            n_axes,
            resolution.len()
        )));
    }
    for &r in resolution {
        if r < 8 {
            return Err(GlError::Chart(format!(
                "resolution {} too small (minimum 8 per axis)",
                r
            )));
        }
    }
    Ok(())
}

/// Build one of the chart catalogue entries.
pub fn build_chart(id: ChartId, resolution: &[usize], params: &ChartParams) -> Result<Chart> {
    let mut chart = match id {
        ChartId::Box => build_box(resolution, params)?,
        ChartId::ProductS1Hemisphere => build_product(resolution)?,
        ChartId::HalfEllipseRz => build_half_ellipse(resolution, params)?,
        ChartId::HalfBall => build_ball_like(resolution, params, true)?,
        ChartId::Ball => build_ball_like(resolution, params, false)?,
    };
    chart.grid.classify_boundary();
    check_interior_width(&chart.grid)?;
    chart.normal = compute_normals(&chart.grid, &chart.metric);
    chart.metric.lambda = min_metric_eigenvalue(&chart.grid, &chart.metric);
    if chart.metric.lambda <= 0.0 {
        return Err(GlError::Chart("metric not positive definite".into()));
    }
    Ok(chart)
}

fn check_interior_width(grid: &StructuredGrid) -> Result<()> {
    // At least 4 interior cells across somewhere: resolution must resolve the domain.
    let interior = grid
        .mask
        .iter()
        .filter(|&&c| c == CellClass::Interior)
        .count();
    if interior < 4usize.pow(grid.n_axes() as u32) {
        return Err(GlError::Chart(
            "resolution too small to resolve boundary (fewer than 4 interior cells across)".into(),
        ));
    }
    Ok(())
}

fn build_box(resolution: &[usize], params: &ChartParams) -> Result<Chart> {
    let n_axes = resolution.len();
    if n_axes == 0 || n_axes > 3 {
        return Err(GlError::Chart("box chart supports 1-3 axes".into()));
    }
    validate_resolution(resolution, n_axes)?;
    let lengths: Vec<f64> = params.lengths.iter().take(n_axes).cloned().collect();
    if lengths.iter().any(|&l| l <= 0.0) {
        return Err(GlError::Chart("box lengths must be positive".into()));
    }
    let spacing: Vec<f64> = lengths
        .iter()
        .zip(resolution)
        .map(|(l, &n)| l / n as f64)
        .collect();
    let periodic: Vec<bool> = (0..n_axes)
        .map(|a| params.periodic.get(a).copied().unwrap_or(false))
        .collect();
    let grid = StructuredGrid {
        chart_id: ChartId::Box,
        dims: resolution.to_vec(),
        spacing,
        origin: vec![0.0; n_axes],
        periodic,
        axis_low: vec![false; n_axes],
        mask: vec![CellClass::Interior; resolution.iter().product()],
        params: params.clone(),
    };
    let n = grid.n_cells();
    Ok(Chart {
        grid,
        metric: MetricField::flat(n, None),
        normal: BoundaryNormal::default(),
    })
}

/// S¹ × S²₊ with g = ds² + dr² + sin²r dθ²; axes (s, r, θ).
fn build_product(resolution: &[usize]) -> Result<Chart> {
    validate_resolution(resolution, 3)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let extents = [two_pi, std::f64::consts::FRAC_PI_2, two_pi];
    let spacing: Vec<f64> = extents
        .iter()
        .zip(resolution)
        .map(|(l, &n)| l / n as f64)
        .collect();
    let grid = StructuredGrid {
        chart_id: ChartId::ProductS1Hemisphere,
        dims: resolution.to_vec(),
        spacing,
        origin: vec![0.0; 3],
        periodic: vec![true, false, true],
        axis_low: vec![false, true, false],
        mask: vec![CellClass::Interior; resolution.iter().product()],
        params: ChartParams::default(),
    };
    let n = grid.n_cells();
    let mut metric = MetricField::flat(n, None);
    for idx in 0..n {
        let x = grid.center(idx);
        let s = x[1].sin();
        metric.g[idx] = [1.0, 1.0, s * s, 0.0, 0.0, 0.0];
        metric.g_inv[idx] = [1.0, 1.0, 1.0 / (s * s), 0.0, 0.0, 0.0];
        metric.sqrt_det[idx] = s;
    }
    Ok(Chart {
        grid,
        metric,
        normal: BoundaryNormal::default(),
    })
}

/// Reduced solid ellipsoid: D = {(r,z): r ≥ 0, r² + (z/l)² ≤ 1}, flat metric,
/// cylindrical weight r in sqrt_det.
fn build_half_ellipse(resolution: &[usize], params: &ChartParams) -> Result<Chart> {
    validate_resolution(resolution, 2)?;
    let l = params.elongation;
    if l <= 0.0 {
        return Err(GlError::Chart("elongation l must be positive".into()));
    }
    let spacing = vec![1.0 / resolution[0] as f64, 2.0 * l / resolution[1] as f64];
    let mut grid = StructuredGrid {
        chart_id: ChartId::HalfEllipseRz,
        dims: resolution.to_vec(),
        spacing,
        origin: vec![0.0, -l],
        periodic: vec![false, false],
        axis_low: vec![true, false],
        mask: vec![CellClass::Exterior; resolution.iter().product()],
        params: params.clone(),
    };
    for idx in 0..grid.n_cells() {
        let x = grid.center(idx);
        if x[0] * x[0] + (x[1] / l) * (x[1] / l) <= 1.0 {
            grid.mask[idx] = CellClass::Interior;
        }
    }
    let n = grid.n_cells();
    let weight: Vec<f64> = (0..n).map(|i| grid.center(i)[0]).collect();
    let metric = MetricField::flat(n, Some(weight));
    Ok(Chart {
        grid,
        metric,
        normal: BoundaryNormal::default(),
    })
}

/// Flat solid ball (or upper half ball) in `params.axes` dimensions with the
/// given radius; the half ball keeps the flat face at x_n = 0.
fn build_ball_like(resolution: &[usize], params: &ChartParams, half: bool) -> Result<Chart> {
    let d = params.axes;
    if !(2..=3).contains(&d) {
        return Err(GlError::Chart("ball charts support 2 or 3 axes".into()));
    }
    validate_resolution(resolution, d)?;
    let rad = params.radius;
    if rad <= 0.0 {
        return Err(GlError::Chart("radius must be positive".into()));
    }
    let mut origin = vec![-rad; d];
    let mut lengths = vec![2.0 * rad; d];
    if half {
        origin[d - 1] = 0.0;
        lengths[d - 1] = rad;
    }
    let spacing: Vec<f64> = lengths
        .iter()
        .zip(resolution)
        .map(|(l, &n)| l / n as f64)
        .collect();
    let mut grid = StructuredGrid {
        chart_id: if half { ChartId::HalfBall } else { ChartId::Ball },
        dims: resolution.to_vec(),
        spacing,
        origin,
        periodic: vec![false; d],
        axis_low: vec![false; d],
        mask: vec![CellClass::Exterior; resolution.iter().product()],
        params: params.clone(),
    };
    for idx in 0..grid.n_cells() {
        let x = grid.center(idx);
        let r2: f64 = (0..d).map(|a| x[a] * x[a]).sum();
        if r2 <= rad * rad {
            grid.mask[idx] = CellClass::Interior;
        }
    }
    let n = grid.n_cells();
    Ok(Chart {
        grid,
        metric: MetricField::flat(n, None),
        normal: BoundaryNormal::default(),
    })
}

fn min_metric_eigenvalue(grid: &StructuredGrid, metric: &MetricField) -> f64 {
    let mut lam = f64::INFINITY;
    for idx in 0..grid.n_cells() {
        if !grid.is_in(idx) {
            continue;
        }
        let g = &metric.g[idx];
        // Diagonal charts: eigenvalues are the diagonal entries of the active block.
        for a in 0..grid.n_axes() {
            lam = lam.min(g[a]);
        }
    }
    lam
}

fn compute_normals(grid: &StructuredGrid, metric: &MetricField) -> BoundaryNormal {
    let mut cells = Vec::new();
    let mut nu = Vec::new();
    for idx in 0..grid.n_cells() {
        if grid.mask[idx] != CellClass::Boundary {
            continue;
        }
        let x = grid.center(idx);
        let mut v = [0.0f64; 3];
        match grid.chart_id {
            ChartId::Box => {
                // Inward: opposite the first missing/exterior face.
                'outer: for a in 0..grid.n_axes() {
                    for dir in [-1isize, 1] {
                        let missing = match grid.neighbor(idx, a, dir) {
                            Some(nb) => grid.mask[nb] == CellClass::Exterior,
                            None => true,
                        };
                        if missing {
                            v[a] = -(dir as f64);
                            break 'outer;
                        }
                    }
                }
            }
            ChartId::ProductS1Hemisphere => {
                // Boundary is the equator r = π/2; inward is decreasing r.
                v[1] = -1.0;
            }
            ChartId::HalfEllipseRz => {
                let l = grid.params.elongation;
                let grad = [2.0 * x[0], 2.0 * x[1] / (l * l), 0.0];
                let norm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
                v = [-grad[0] / norm, -grad[1] / norm, 0.0];
            }
            ChartId::HalfBall | ChartId::Ball => {
                let d = grid.n_axes();
                let flat_face = grid.chart_id == ChartId::HalfBall
                    && grid.neighbor(idx, d - 1, -1).is_none();
                if flat_face {
                    v[d - 1] = 1.0;
                } else {
                    let norm: f64 = (0..d).map(|a| x[a] * x[a]).sum::<f64>().sqrt();
                    for a in 0..d {
                        v[a] = -x[a] / norm;
                    }
                }
            }
        }
        // Normalize w.r.t. g.
        let len = metric.vector_inner(idx, &v, &v).sqrt();
        if len > 0.0 {
            for c in v.iter_mut() {
                *c /= len;
            }
        }
        cells.push(idx);
        nu.push(v);
    }
    BoundaryNormal { cells, nu }
}

/// Report of the boundary convexity diagnostic (Eq. ⟨∇_ξν, ξ⟩ ≤ 0).
#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    /// Max over sampled boundary node pairs and tangent secants of ⟨Δν, Δx⟩/|Δx|².
    pub max_quadform: f64,
    pub min_quadform: f64,
    pub samples: usize,
}

/// Finite-difference the normal field along the boundary: for neighboring
/// boundary cells p, q the secant ξ ≈ Δx approximates a tangent direction and
/// ⟨Δν, Δx⟩_g/|Δx|²_g approximates the shape-operator quadratic form.
/// Pairs whose normals differ by more than 60° (corners) are skipped.
pub fn convexity_check(chart: &Chart) -> Result<ConvexityReport> {
    let grid = &chart.grid;
    let bn = &chart.normal;
    if bn.cells.is_empty() {
        return Err(GlError::Precondition("boundary is empty".into()));
    }
    let mut max_q = f64::NEG_INFINITY;
    let mut min_q = f64::INFINITY;
    let mut samples = 0usize;
    for (pos, &p) in bn.cells.iter().enumerate() {
        let ijk = grid.coords_of(p);
        // Face and diagonal neighbors in index space.
        let mut neighbors = Vec::new();
        let offsets: &[[isize; 3]] = match grid.n_axes() {
            2 => &[[1, 0, 0], [0, 1, 0], [1, 1, 0], [1, -1, 0]],
            _ => &[
                [1, 0, 0],
                [0, 1, 0],
                [0, 0, 1],
                [1, 1, 0],
                [1, -1, 0],
                [0, 1, 1],
                [0, 1, -1],
                [1, 0, 1],
                [1, 0, -1],
            ],
        };
        for off in offsets {
            let mut q = Some(p);
            for (a, &k) in off.iter().enumerate().take(grid.n_axes()) {
                if k != 0 {
                    q = q.and_then(|c| grid.neighbor(c, a, k));
                }
            }
            if let Some(qi) = q {
                if grid.mask[qi] == CellClass::Boundary && qi != p {
                    neighbors.push(qi);
                }
            }
        }
        let _ = ijk;
        let nu_p = bn.nu[pos];
        for q in neighbors {
            let Some(nu_q) = bn.normal_of(q) else { continue };
            // Skip corner pairs with very different normals.
            if chart.metric.vector_inner(p, &nu_p, &nu_q) < 0.5 {
                continue;
            }
            let dx = grid.delta(p, q);
            let dnu = [nu_q[0] - nu_p[0], nu_q[1] - nu_p[1], nu_q[2] - nu_p[2]];
            let len2 = chart.metric.vector_inner(p, &dx, &dx);
            if len2 <= 0.0 {
                continue;
            }
            let q_form = chart.metric.vector_inner(p, &dnu, &dx) / len2;
            max_q = max_q.max(q_form);
            min_q = min_q.min(q_form);
            samples += 1;
        }
    }
    Ok(ConvexityReport {
        max_quadform: max_q,
        min_quadform: min_q,
        samples,
    })
}

/// Cells approximating B_radius(center) ∩ M̄ in chart coordinates.
///
/// A cell is included iff its center's (periodic-aware) chart distance to the
/// center cell is < radius and the cell is masked in. Sorted ascending.
pub fn metric_ball(chart: &Chart, center: usize, radius: f64) -> Result<Vec<usize>> {
    let grid = &chart.grid;
    if !grid.is_in(center) {
        return Err(GlError::Precondition("ball center outside mask".into()));
    }
    if radius < 2.0 * grid.max_spacing() {
        return Err(GlError::Precondition(format!(
            "ball radius {} below resolvable scale {}",
            radius,
            2.0 * grid.max_spacing()
        )));
    }
    let mut cells = Vec::new();
    for idx in 0..grid.n_cells() {
        if grid.is_in(idx) && grid.chart_distance(center, idx) < radius {
            cells.push(idx);
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize) -> Chart {
        build_chart(
            ChartId::Box,
            &[n, n, n],
            &ChartParams {
                lengths: vec![1.0, 1.0, 1.0],
                ..ChartParams::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn box_chart_is_flat() {
        let c = cube(8);
        assert!(c.metric.sqrt_det.iter().all(|&s| s == 1.0));
        assert!((c.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_chart_closed_form_metric() {
        let c = build_chart(ChartId::ProductS1Hemisphere, &[16, 16, 16], &ChartParams::default())
            .unwrap();
        for idx in 0..c.grid.n_cells() {
            let r = c.grid.center(idx)[1];
            assert!((c.metric.sqrt_det[idx] - r.sin()).abs() < 1e-12);
            assert!((c.metric.g[idx][2] - r.sin() * r.sin()).abs() < 1e-12);
            // g_inv · g = identity to 1e-12
            for a in 0..3 {
                assert!((c.metric.g[idx][a] * c.metric.g_inv[idx][a] - 1.0).abs() < 1e-12);
            }
        }
        // Periodic axes carry no boundary cells.
        for idx in 0..c.grid.n_cells() {
            if c.grid.mask[idx] == CellClass::Boundary {
                let ijk = c.grid.coords_of(idx);
                assert_eq!(ijk[1], c.grid.dims[1] - 1, "boundary only at the equator");
            }
        }
        // Volume of S¹ × S²₊ is 2π · 2π · 1 = 4π².
        let vol = c.volume();
        let expect = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        assert!((vol / expect - 1.0).abs() < 1e-3, "vol {} vs {}", vol, expect);
    }

    #[test]
    fn half_ellipse_mask_and_boundary() {
        let l = 3.0;
        let c = build_chart(
            ChartId::HalfEllipseRz,
            &[64, 128],
            &ChartParams {
                elongation: l,
                ..ChartParams::default()
            },
        )
        .unwrap();
        for idx in 0..c.grid.n_cells() {
            let x = c.grid.center(idx);
            let inside = x[0] * x[0] + (x[1] / l) * (x[1] / l) <= 1.0;
            assert_eq!(c.grid.is_in(idx), inside, "mask is exactly the inequality");
            // The axis r = 0 column is not boundary.
            if c.grid.mask[idx] == CellClass::Boundary {
                let next_r = x[0] + c.grid.spacing[0];
                let outside_r = next_r * next_r + (x[1] / l) * (x[1] / l) > 1.0;
                let next_zp = (x[1] + c.grid.spacing[1]).abs();
                let outside_z = x[0] * x[0] + (next_zp / l) * (next_zp / l) > 1.0;
                assert!(
                    outside_r || outside_z,
                    "boundary cell at {:?} must hug the arc",
                    &x[..2]
                );
            }
        }
        let ijk0 = [0usize, c.grid.dims[1] / 2];
        let idx0 = c.grid.index_of(&ijk0);
        assert_eq!(c.grid.mask[idx0], CellClass::Interior, "axis is not boundary");
    }

    #[test]
    fn boundary_reclassification_is_idempotent() {
        let mut c = build_chart(
            ChartId::Ball,
            &[32, 32],
            &ChartParams {
                axes: 2,
                ..ChartParams::default()
            },
        )
        .unwrap();
        let before = c.grid.mask.clone();
        c.grid.classify_boundary();
        assert_eq!(before, c.grid.mask);
    }

    #[test]
    fn every_boundary_cell_touches_interior() {
        let c = build_chart(
            ChartId::HalfEllipseRz,
            &[48, 96],
            &ChartParams {
                elongation: 1.5,
                ..ChartParams::default()
            },
        )
        .unwrap();
        for idx in 0..c.grid.n_cells() {
            if c.grid.mask[idx] != CellClass::Boundary {
                continue;
            }
            let mut touches = false;
            for a in 0..2 {
                for dir in [-1isize, 1] {
                    if let Some(nb) = c.grid.neighbor(idx, a, dir) {
                        if c.grid.mask[nb] == CellClass::Interior {
                            touches = true;
                        }
                    }
                }
            }
            assert!(touches, "boundary cell {} isolated from interior", idx);
        }
    }

    #[test]
    fn metric_symmetry_as_stored() {
        let c = build_chart(ChartId::ProductS1Hemisphere, &[8, 8, 8], &ChartParams::default())
            .unwrap();
        // Symmetric storage layout: off-diagonals stored once, so symmetry is
        // structural; check the normals are unit.
        for (pos, &idx) in c.normal.cells.iter().enumerate() {
            let nu = c.normal.nu[pos];
            let len = c.metric.vector_inner(idx, &nu, &nu).sqrt();
            assert!((len - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn convexity_flat_face_and_sphere() {
        // Half ball: flat metric, flat face contributes exactly 0.
        let hb = build_chart(
            ChartId::HalfBall,
            &[32, 16],
            &ChartParams {
                axes: 2,
                ..ChartParams::default()
            },
        )
        .unwrap();
        let rep = convexity_check(&hb).unwrap();
        assert!(rep.samples > 0);
        assert!(rep.max_quadform <= 1e-6, "max quadform {}", rep.max_quadform);

        // Solid disk boundary: ⟨∇_ξν, ξ⟩ = −|ξ|²/R < 0.
        let ball = build_chart(
            ChartId::Ball,
            &[64, 64],
            &ChartParams {
                axes: 2,
                ..ChartParams::default()
            },
        )
        .unwrap();
        let rep = convexity_check(&ball).unwrap();
        assert!(rep.max_quadform < -0.5, "sphere quadform ≈ -1, got {}", rep.max_quadform);
        assert!(rep.min_quadform > -2.0);
    }

    #[test]
    fn convexity_ellipsoid_arc() {
        let c = build_chart(
            ChartId::HalfEllipseRz,
            &[96, 192],
            &ChartParams {
                elongation: 3.0,
                ..ChartParams::default()
            },
        )
        .unwrap();
        let rep = convexity_check(&c).unwrap();
        assert!(rep.max_quadform <= 1e-6, "ellipse arc convex, got {}", rep.max_quadform);
    }

    #[test]
    fn metric_ball_volume_and_monotonicity() {
        for n in [32usize, 64] {
            let c = build_chart(
                ChartId::Box,
                &[n, n],
                &ChartParams {
                    lengths: vec![1.0, 1.0],
                    ..ChartParams::default()
                },
            )
            .unwrap();
            let center = c.grid.index_of(&[n / 2, n / 2]);
            let r = 0.3;
            let cells = metric_ball(&c, center, r).unwrap();
            let vol = cells.len() as f64 * c.grid.cell_volume();
            let exact = std::f64::consts::PI * r * r;
            let h = c.grid.spacing[0];
            assert!(
                (vol / exact - 1.0).abs() < 4.0 * h / r,
                "ball volume {} vs {} at n={}",
                vol,
                exact,
                n
            );
            // Monotone in radius.
            let smaller = metric_ball(&c, center, 0.2).unwrap();
            assert!(smaller.iter().all(|i| cells.binary_search(i).is_ok()));
            // Whole domain for huge radius.
            let all = metric_ball(&c, center, 10.0).unwrap();
            assert_eq!(all.len(), c.grid.cells_in().len());
        }
    }

    #[test]
    fn metric_ball_on_boundary_center_stays_in_mask() {
        let c = build_chart(
            ChartId::HalfEllipseRz,
            &[64, 128],
            &ChartParams {
                elongation: 3.0,
                ..ChartParams::default()
            },
        )
        .unwrap();
        // A boundary cell on the arc.
        let center = c.normal.cells[c.normal.cells.len() / 2];
        let cells = metric_ball(&c, center, 0.1).unwrap();
        assert!(!cells.is_empty());
        assert!(cells.iter().all(|&i| c.grid.is_in(i)));
    }

    #[test]
    fn metric_ball_rejects_tiny_radius() {
        let c = cube(8);
        let center = c.grid.index_of(&[4, 4, 4]);
        assert!(metric_ball(&c, center, 0.01).is_err());
    }

    #[test]
    fn too_small_resolution_rejected() {
        let err = build_chart(ChartId::Box, &[4, 4], &ChartParams::default());
        assert!(err.is_err());
    }
}
