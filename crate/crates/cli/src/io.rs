//! On-disk artifacts: the `series.csv` time series and binary field
//! snapshots with JSON sidecars.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nematic_core::dynamics::{Sample, SimulationState};
use nematic_core::field::{GridSpec, QTensorField, ScalarField, VelocityField};
use serde::{Deserialize, Serialize};

pub const SERIES_COLUMNS: [&str; 11] = [
    "t", "kinetic", "bulk", "elastic", "total", "visc_diss", "rot_diss", "reg_diss", "residual",
    "q_linf", "u_l2",
];

/// 17 significant digits, exponent form, independent of locale.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn series_row(s: &Sample) -> [f64; 11] {
    let l = &s.ledger;
    [
        l.t,
        l.kinetic,
        l.bulk,
        l.elastic,
        l.total,
        l.viscous_diss,
        l.rotational_diss,
        l.reg_diss,
        s.residual,
        s.q_linf,
        s.u_l2,
    ]
}

/// Appends rows as they arrive and flushes each one, so a failed run keeps
/// everything written before the failure.
pub struct SeriesWriter {
    out: BufWriter<File>,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", SERIES_COLUMNS.join(","))?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn push(&mut self, s: &Sample) -> io::Result<()> {
        let row: Vec<String> = series_row(s).iter().map(|v| fmt_f64(*v)).collect();
        writeln!(self.out, "{}", row.join(","))?;
        self.out.flush()
    }
}

/// Reads a series file back as rows of numbers.
pub fn read_series(path: &Path) -> io::Result<Vec<[f64; 11]>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != SERIES_COLUMNS.join(",") {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unexpected series header"));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        let mut row = [0.0; 11];
        let mut count = 0;
        for (slot, field) in row.iter_mut().zip(line.split(',')) {
            *slot = field
                .parse()
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad number {field:?}")))?;
            count += 1;
        }
        if count != 11 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "short series row"));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// JSON sidecar of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub t: f64,
    pub fields: Vec<String>,
    pub byte_order: String,
}

pub fn snapshot_paths(dir: &Path, step: usize) -> (PathBuf, PathBuf) {
    let stem = format!("snapshot_{step:08}");
    (dir.join(format!("{stem}.bin")), dir.join(format!("{stem}.json")))
}

/// Writes `q1, q2, u1, u2` as little-endian `f64`, row-major, plus sidecar.
pub fn write_snapshot(dir: &Path, step: usize, state: &SimulationState) -> io::Result<PathBuf> {
    let (bin, json) = snapshot_paths(dir, step);
    let mut out = BufWriter::new(File::create(&bin)?);
    for f in [&state.q.q1, &state.q.q2, &state.u.u1, &state.u.u2] {
        for v in f.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    let meta = SnapshotMeta {
        n: state.grid().n(),
        t: state.t,
        fields: ["q1", "q2", "u1", "u2"].map(String::from).to_vec(),
        byte_order: "little".to_string(),
    };
    std::fs::write(&json, serde_json::to_string_pretty(&meta).map_err(io::Error::other)?)?;
    Ok(bin)
}

/// Reads a snapshot written by [`write_snapshot`]; `bin` is the `.bin` path.
pub fn read_snapshot(bin: &Path) -> io::Result<SimulationState> {
    let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(bin.with_extension("json"))?)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    if meta.byte_order != "little" || meta.fields != ["q1", "q2", "u1", "u2"] {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unsupported snapshot layout"));
    }
    let grid = GridSpec::new(meta.n).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut bytes = Vec::new();
    File::open(bin)?.read_to_end(&mut bytes)?;
    if bytes.len() != 4 * grid.len() * 8 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "snapshot size mismatch"));
    }
    let mut fields = bytes.chunks_exact(grid.len() * 8).map(|chunk| {
        let data = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        ScalarField::from_vec(grid, data)
    });
    let mut next = || fields.next().expect("four fields");
    let q = QTensorField::new(next(), next());
    let u = VelocityField::new(next(), next());
    Ok(SimulationState::new(meta.t, u, q))
}
