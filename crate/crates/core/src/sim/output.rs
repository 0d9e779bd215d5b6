//! Trace and summary emission: one CSV per run with 9-significant-digit
//! floats, one JSON record per run for batch aggregation.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use super::SimResult;

/// Format with 9 significant digits.
fn sig9(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.8e}")
}

/// Write one trace CSV: header
/// `h,s,d,phi,v,a,delta,source,smpc_feasible,ft_feasible,tv{i}_x,tv{i}_vx,tv{i}_y,tv{i}_vy,min_gap`.
pub fn write_trace<W: Write>(mut out: W, result: &SimResult, n_tvs: usize) -> io::Result<()> {
    let mut header = String::from("h,s,d,phi,v,a,delta,source,smpc_feasible,ft_feasible");
    for i in 1..=n_tvs {
        header.push_str(&format!(",tv{i}_x,tv{i}_vx,tv{i}_y,tv{i}_vy"));
    }
    header.push_str(",min_gap");
    writeln!(out, "{header}")?;

    for row in &result.trace {
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            row.h,
            sig9(row.ev.s),
            sig9(row.ev.d),
            sig9(row.ev.phi),
            sig9(row.ev.v),
            sig9(row.input.a),
            sig9(row.input.delta),
            row.source.as_str(),
            row.smpc_feasible as u8,
            row.ft_feasible as u8,
        );
        for tv in &row.tvs {
            line.push_str(&format!(
                ",{},{},{},{}",
                sig9(tv.x),
                sig9(tv.vx),
                sig9(tv.y),
                sig9(tv.vy)
            ));
        }
        line.push_str(&format!(",{}", sig9(row.min_gap)));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_trace_file(path: &Path, result: &SimResult, n_tvs: usize) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace(io::BufWriter::new(file), result, n_tvs)
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub collided: bool,
    pub collision_step: Option<usize>,
    pub j_sim: f64,
    pub n_smpc: usize,
    pub n_ft: usize,
    pub n_safe: usize,
}

impl RunSummary {
    pub fn of(result: &SimResult) -> Self {
        Self {
            seed: result.seed,
            collided: result.collided,
            collision_step: result.collision_step,
            j_sim: result.j_sim,
            n_smpc: result.n_smpc,
            n_ft: result.n_ft,
            n_safe: result.n_safe,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}
