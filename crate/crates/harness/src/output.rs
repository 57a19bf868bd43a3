//! CSV and JSONL writers. Floats are written with 17 significant digits so
//! that every `f64` round-trips and equal runs give equal bytes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::Formatter;
use shmf_core::solver::Snapshot;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON formatter printing floats through [`fmt_f64`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// One compact JSON line, without the trailing newline.
pub fn json_line<T: Serialize + ?Sized>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Accumulates JSONL records in memory and writes them in one go.
#[derive(Debug, Default)]
pub struct JsonlDoc {
    text: String,
}

impl JsonlDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push<T: Serialize + ?Sized>(&mut self, value: &T) -> io::Result<()> {
        self.text.push_str(&json_line(value)?);
        self.text.push('\n');
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, &self.text)
    }
}

pub const TRAJECTORY_HEADER: &str = "t,dt,norm_beta,grad0,energy,status";

/// Snapshot table, one row per accepted step.
pub fn trajectory_csv(snapshots: &[Snapshot<f64>]) -> String {
    let mut out = String::with_capacity(128 * (snapshots.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in snapshots {
        for v in [s.t, s.dt, s.norm_beta, s.grad0, s.energy] {
            out.push_str(&fmt_f64(v));
            out.push(',');
        }
        out.push_str(s.status.as_str());
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(path: &Path, snapshots: &[Snapshot<f64>]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, trajectory_csv(snapshots))
}

/// `<dir>/paths/path_<index>.csv`.
pub fn path_csv_name(dir: &Path, path_index: u64) -> PathBuf {
    dir.join("paths").join(format!("path_{path_index:06}.csv"))
}
