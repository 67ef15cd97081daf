//! CSV and JSON artifacts: time series, density snapshots, scaled profiles and reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::ScaledProfile;
use crate::error::{Error, Result};
use crate::grid::{Grid, HeadModel};
use crate::measures::{total_mass, MeasureWithAtom};

/// Time label used in artifact file names (`400`, `0.5`, ...).
pub fn time_label(t: f64) -> String {
    format!("{t}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub t: f64,
    pub total_mass: f64,
    pub b0: f64,
    pub w_log: f64,
    #[serde(rename = "Q_t")]
    pub q_t: f64,
    pub dt: f64,
    pub min_density: f64,
}

/// Streams rows to `timeseries.csv`.
pub struct TimeseriesWriter {
    inner: csv::Writer<fs::File>,
}

impl TimeseriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            inner: csv::Writer::from_path(path)?,
        })
    }

    pub fn push(&mut self, row: &TimeseriesRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TimeseriesRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub t: f64,
    pub atom_mass: f64,
    pub head_exponent: f64,
    pub head_coefficient: f64,
    pub total_mass: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct DensityRow {
    x: f64,
    density: f64,
}

/// Writes `snapshot_t{t}.csv` and its `.json` side file; returns the CSV path.
pub fn write_snapshot(dir: &Path, grid: &Grid, t: f64, density: &MeasureWithAtom) -> Result<PathBuf> {
    grid.check_len(&density.bulk, "snapshot density")?;
    let stem = format!("snapshot_t{}", time_label(t));
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for (&x, &v) in grid.nodes().iter().zip(&density.bulk) {
        w.serialize(DensityRow { x, density: v })?;
    }
    w.flush()?;
    let meta = SnapshotMeta {
        t,
        atom_mass: density.atom_mass,
        head_exponent: density.head.exponent,
        head_coefficient: density.head.coefficient,
        total_mass: total_mass(grid, density)?,
    };
    write_json(&dir.join(format!("{stem}.json")), &meta)?;
    Ok(csv_path)
}

/// Reads a snapshot CSV and its side file. Node positions are returned alongside.
pub fn read_snapshot(csv_path: &Path) -> Result<(SnapshotMeta, Vec<f64>, MeasureWithAtom)> {
    let mut rdr = csv::Reader::from_path(csv_path)?;
    let mut xs = Vec::new();
    let mut bulk = Vec::new();
    for row in rdr.deserialize() {
        let row: DensityRow = row?;
        xs.push(row.x);
        bulk.push(row.density);
    }
    let meta: SnapshotMeta = read_json(&csv_path.with_extension("json"))?;
    let head = HeadModel::new(meta.head_exponent, meta.head_coefficient)?;
    let density = MeasureWithAtom::new(meta.atom_mass, bulk, head)?;
    Ok((meta, xs, density))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ProfileRow {
    x: f64,
    g_measured: f64,
    g_theory: f64,
}

/// Writes `profile_t{t}.csv` with measured and limit profiles plus a gnuplot script.
pub fn write_profile(dir: &Path, measured: &ScaledProfile, theory: &ScaledProfile) -> Result<PathBuf> {
    if measured.xs != theory.xs {
        return Err(Error::Structural("measured and limit profiles use different points".into()));
    }
    let stem = format!("profile_t{}", time_label(measured.t));
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for ((&x, &g_measured), &g_theory) in measured.xs.iter().zip(&measured.g).zip(&theory.g) {
        w.serialize(ProfileRow { x, g_measured, g_theory })?;
    }
    w.flush()?;
    let script = format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'x'\n\
         set ylabel 'g(x)'\n\
         set title 'scaled profile at t = {t}'\n\
         plot '{stem}.csv' using 1:2 with points pt 7 ps 0.5, \\\n     '{stem}.csv' using 1:3 with lines lw 2\n",
        t = time_label(measured.t)
    );
    fs::write(dir.join(format!("{stem}.gp")), script)?;
    Ok(csv_path)
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub t: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub c_hat: f64,
    pub rss: f64,
    pub window: [f64; 2],
    pub beta_theory: f64,
    pub gamma_theory: f64,
    pub rho_theory: f64,
    /// `∫_0^{K/t} p_t`.
    pub condensate_estimate: f64,
    pub q_t: f64,
    /// `Q_t rho / R`; `null` when `R` is unavailable.
    pub r_over_rho: Option<f64>,
    pub c_theory: f64,
    pub c_theory_legacy: f64,
}

/// Writes serializable rows as a headed CSV file.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
