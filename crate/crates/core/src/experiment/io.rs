//! Artifact writers. Files are written to a temporary sibling and renamed
//! into place, so a final name never holds partial content.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::metrics::Summary;
use super::run::{LogRecord, RunOutput};
use crate::error::ExperimentError;
use crate::oracle::{write_dataset_csv, TrainingPoint};

pub const LOG_HEADER: &str = "t,px,py,pz,pdx,pdy,pdz,z0_norm,V,gain_norm,u,taux,tauy,tauz,N,n,rho_bar,bound";

fn io_err(path: &Path, source: io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `path` through `fill` atomically.
pub fn atomic_write<F>(path: &Path, fill: F) -> Result<(), ExperimentError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_log_csv(log: &[LogRecord], w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in log {
        let fields = [
            r.t, r.p.x, r.p.y, r.p.z, r.p_d.x, r.p_d.y, r.p_d.z, r.z0_norm, r.v, r.gain_norm, r.u, r.tau.x, r.tau.y,
            r.tau.z,
        ];
        let head: Vec<String> = fields.iter().map(|x| num(*x)).collect();
        writeln!(w, "{},{},{},{},{}", head.join(","), r.n_points, r.n, num(r.rho_bar), num(r.bound))?;
    }
    Ok(())
}

/// `t pd_x pd_y pd_z p_x p_y p_z`
pub fn write_trajectory_dat(log: &[LogRecord], w: &mut dyn Write) -> io::Result<()> {
    for r in log {
        writeln!(w, "{} {} {} {} {} {} {}", r.t, r.p_d.x, r.p_d.y, r.p_d.z, r.p.x, r.p.y, r.p.z)?;
    }
    Ok(())
}

/// `t p_x p_y p_z` of every collected sample.
pub fn write_data_dat(points: &[TrainingPoint], w: &mut dyn Write) -> io::Result<()> {
    for pt in points {
        writeln!(w, "{} {} {} {}", pt.t, pt.state.p.x, pt.state.p.y, pt.state.p.z)?;
    }
    Ok(())
}

/// `t V gain_norm z0_norm`
pub fn write_vk_dat(log: &[LogRecord], w: &mut dyn Write) -> io::Result<()> {
    for r in log {
        writeln!(w, "{} {} {} {}", r.t, r.v, r.gain_norm, r.z0_norm)?;
    }
    Ok(())
}

/// Paths of the written artifacts.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

/// Writes log, summary and plot files of `out` into `dir`.
pub fn write_artifacts(
    dir: &Path,
    cfg: &super::ExperimentConfig,
    out: &RunOutput,
    summary: &Summary,
) -> Result<Artifacts, ExperimentError> {
    let mut files = Vec::new();
    let mut emit = |name: &str, fill: &mut dyn FnMut(&mut dyn Write) -> io::Result<()>| {
        let path = dir.join(name);
        atomic_write(&path, |w| fill(w))?;
        files.push(path);
        Ok::<_, ExperimentError>(())
    };
    if cfg.output.write_log {
        emit("log.csv", &mut |w| write_log_csv(&out.log, w))?;
    }
    emit("summary.json", &mut |w| {
        serde_json::to_writer_pretty(&mut *w, summary).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    if cfg.output.write_plot_data {
        emit("trajectory.dat", &mut |w| write_trajectory_dat(&out.log, w))?;
        emit("data.dat", &mut |w| write_data_dat(&out.collected, w))?;
        emit("VK.dat", &mut |w| write_vk_dat(&out.log, w))?;
    }
    if cfg.output.write_dataset {
        emit("dataset.csv", &mut |w| {
            write_dataset_csv(out.dataset.points(), &mut *w).map_err(|e| io::Error::other(e.to_string()))
        })?;
    }
    emit("config.toml", &mut |w| w.write_all(cfg.to_toml_string().as_bytes()))?;
    Ok(Artifacts { files })
}
