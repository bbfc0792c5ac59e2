//! Trace files: one CSV row per iteration with a fixed header.

use std::path::Path;

use cglo::trace::{RunTrace, TraceRow};

use crate::HarnessError;

/// Header for a `dim`-dimensional problem.
pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["iter", "consumed_reps", "region", "n_new_points", "B1", "B2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=dim).map(|i| format!("best_x{i}")));
    h.push("best_mean".into());
    h.push("wall_ms".into());
    h
}

pub fn write_trace<W: std::io::Write>(trace: &RunTrace, dim: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(dim))?;
    for r in &trace.rows {
        let mut rec = vec![
            r.iter.to_string(),
            r.consumed.to_string(),
            r.region.map(|g| g.to_string()).unwrap_or_default(),
            r.n_new.to_string(),
            r.b1.to_string(),
            r.b2.to_string(),
        ];
        rec.extend(r.best_x.iter().map(f64::to_string));
        rec.push(r.best_mean.to_string());
        rec.push(r.wall_ms.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace_csv(trace: &RunTrace, dim: usize, path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_trace(trace, dim, std::io::BufWriter::new(file)).map_err(|e| HarnessError::csv(path, e))
}

/// Reads a trace file back. Columns the file does not carry are zero.
pub fn read_trace<R: std::io::Read>(input: R, optimizer: &str) -> Result<RunTrace, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let n = header.len();
    if n < 8 {
        return Err(format!("trace header has {n} columns, expected at least 8"));
    }
    let dim = n - 8;
    let expected = trace_header(dim);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(format!("unexpected trace header: {}", header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut trace = RunTrace::new(optimizer);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let int = |j: usize| -> Result<u64, String> {
            field(j).parse().map_err(|e| format!("line {line}, column {}: {e}", expected[j]))
        };
        let float = |j: usize| -> Result<f64, String> {
            field(j).parse().map_err(|e| format!("line {line}, column {}: {e}", expected[j]))
        };
        let region = match field(2) {
            "" => None,
            s => Some(s.parse().map_err(|e| format!("line {line}, column region: {e}"))?),
        };
        trace.push(TraceRow {
            iter: int(0)? as usize,
            consumed: int(1)?,
            region,
            n_new: int(3)? as usize,
            b1: int(4)?,
            b2: int(5)?,
            best_x: (0..dim).map(|d| float(6 + d)).collect::<Result<_, _>>()?,
            best_mean: float(6 + dim)?,
            wall_ms: float(7 + dim)?,
            n_points: 0,
            n_region: 0,
            min_reps: 0,
            required_reps: 0,
        });
    }
    Ok(trace)
}

pub fn parse_trace_csv(path: &Path, optimizer: &str) -> Result<RunTrace, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_trace(file, optimizer).map_err(|message| HarnessError::Parse { path: path.to_path_buf(), message })
}

/// The fields a trace file carries, for round-trip comparisons.
pub fn csv_projection(trace: &RunTrace) -> RunTrace {
    let mut t = trace.clone();
    for r in &mut t.rows {
        r.n_points = 0;
        r.n_region = 0;
        r.min_reps = 0;
        r.required_reps = 0;
    }
    t
}
