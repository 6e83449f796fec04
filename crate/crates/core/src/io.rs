//! On-disk formats: JSON sidecars plus raw little-endian float64 arrays,
//! row-major in the grid's axis order. Fields are interleaved (re, im) per
//! node; 1-forms store one array per component.

use crate::error::{GlError, Result};
use crate::field::ComplexField;
use crate::grid::ChartSpec;
use crate::hodge::DiscreteOneForm;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub chart: ChartSpec,
    pub epsilon: f64,
    pub kind: String,
    pub n_values: usize,
}

fn write_f64s(path: &Path, vals: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(vals.len() * 8);
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(GlError::Config(format!(
            "corrupt float64 array: {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Write `<stem>.json` + `<stem>.bin` (interleaved re, im per node).
pub fn save_field(field: &ComplexField, spec: &ChartSpec, stem: &Path) -> Result<()> {
    let sidecar = FieldSidecar {
        chart: spec.clone(),
        epsilon: field.epsilon,
        kind: "complex_field".into(),
        n_values: field.values.len(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(stem.with_extension("json"), json)?;
    let mut flat = Vec::with_capacity(field.values.len() * 2);
    for v in &field.values {
        flat.push(v.re);
        flat.push(v.im);
    }
    write_f64s(&stem.with_extension("bin"), &flat)
}

/// Load a field dump; the chart is rebuilt deterministically from the sidecar.
pub fn load_field(stem: &Path) -> Result<(ComplexField, ChartSpec)> {
    let json = std::fs::read_to_string(stem.with_extension("json"))?;
    let sidecar: FieldSidecar = serde_json::from_str(&json)?;
    let chart = Arc::new(sidecar.chart.build()?);
    let flat = read_f64s(&stem.with_extension("bin"))?;
    if flat.len() != sidecar.n_values * 2 {
        return Err(GlError::Config("field dump length mismatch".into()));
    }
    let values: Vec<Complex64> = flat
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    Ok((
        ComplexField {
            values,
            epsilon: sidecar.epsilon,
            chart,
        },
        sidecar.chart,
    ))
}

/// Write a 1-form: sidecar + one float64 array per component.
pub fn save_form(form: &DiscreteOneForm, spec: &ChartSpec, stem: &Path) -> Result<()> {
    let sidecar = FieldSidecar {
        chart: spec.clone(),
        epsilon: 0.0,
        kind: "one_form".into(),
        n_values: form.components.len(),
    };
    std::fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    for a in 0..3 {
        let comp: Vec<f64> = form.components.iter().map(|c| c[a]).collect();
        write_f64s(&stem.with_extension(format!("c{}.bin", a)), &comp)?;
    }
    Ok(())
}

/// Grid serialization: JSON header + raw metric arrays (g components,
/// sqrt_det), row-major.
pub fn save_grid(chart: &crate::grid::Chart, spec: &ChartSpec, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("grid.json"),
        serde_json::to_string_pretty(&spec)?,
    )?;
    let n = chart.grid.n_cells();
    let mut g_flat = Vec::with_capacity(n * 6);
    for row in &chart.metric.g {
        g_flat.extend_from_slice(row);
    }
    write_f64s(&dir.join("metric_g.bin"), &g_flat)?;
    write_f64s(&dir.join("metric_sqrt_det.bin"), &chart.metric.sqrt_det)?;
    Ok(())
}

/// CSV writer with '.' decimals, LF endings, and a header row.
pub struct CsvWriter {
    out: std::fs::File,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = std::fs::File::create(path)?;
        out.write_all(header.join(",").as_bytes())?;
        out.write_all(b"\n")?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        self.out.write_all(cells.join(",").as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{}", x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ChartId, ChartParams};

    #[test]
    fn field_roundtrip() {
        let spec = ChartSpec {
            id: ChartId::Ball,
            resolution: vec![16, 16],
            params: ChartParams {
                axes: 2,
                ..ChartParams::default()
            },
        };
        let chart = Arc::new(spec.build().unwrap());
        let f = ComplexField::planted_vortex(Arc::clone(&chart), 0.3, [0.1, -0.2]);
        let dir = std::env::temp_dir().join("gl_lab_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("field_a");
        save_field(&f, &spec, &stem).unwrap();
        let (g, spec2) = load_field(&stem).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(f.values.len(), g.values.len());
        for (a, b) in f.values.iter().zip(&g.values) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
