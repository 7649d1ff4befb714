//! On-disk formats: step-path records, field checkpoints and measure tables.

use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use hj_envelope_core::adjoint::EnvelopeMeasure;
use hj_envelope_core::geometry::StepPath;
use hj_envelope_core::linalg::SymMat;
use hj_envelope_core::solver::{FieldMeta, Grid, GridField};

/// `D|b_1 b_2 ...|v...` with each value's upper triangle in row-major order.
///
/// Numbers use the shortest representation that round-trips.
pub fn path_record(q: &StepPath) -> String {
    let d = q.dim();
    let mut s = format!("{d}|");
    for (k, b) in q.breakpoints().iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        write!(s, "{b:?}").unwrap();
    }
    s.push('|');
    let mut first = true;
    for v in q.values() {
        for i in 0..d {
            for k in i..d {
                if !first {
                    s.push(' ');
                }
                first = false;
                write!(s, "{:?}", v.get(i, k)).unwrap();
            }
        }
    }
    s
}

pub fn parse_path_record(s: &str) -> Result<StepPath, String> {
    let mut parts = s.trim().split('|');
    let (Some(d), Some(bps), Some(vals), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(format!("expected `D|breakpoints|values`, got `{s}`"));
    };
    let d: usize = d
        .trim()
        .parse()
        .map_err(|_| format!("bad dimension `{d}`"))?;
    if d == 0 {
        return Err("dimension must be positive".into());
    }
    let nums = |t: &str| -> Result<Vec<f64>, String> {
        t.split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|_| format!("bad number `{x}`")))
            .collect()
    };
    let bps = nums(bps)?;
    let vals = nums(vals)?;
    let per = d * (d + 1) / 2;
    if vals.len() != per * bps.len() {
        return Err(format!(
            "{} breakpoints need {} entries, got {}",
            bps.len(),
            per * bps.len(),
            vals.len()
        ));
    }
    let values = vals
        .chunks(per)
        .map(|c| {
            let mut m = SymMat::zeros(d);
            let mut it = c.iter();
            for i in 0..d {
                for k in i..d {
                    m.set(i, k, *it.next().unwrap());
                }
            }
            m
        })
        .collect();
    StepPath::new(bps, values).map_err(|e| e.to_string())
}

/// First line of a field checkpoint; the payload follows as little-endian
/// `f64`, slice after slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub level: u32,
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: usize,
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub nodes: usize,
    pub alpha: f64,
    pub eta: f64,
    pub eps: f64,
    pub model: String,
    pub profile: String,
}

pub const CHECKPOINT_FORMAT: &str = "hj-envelope-field/1";

pub fn write_checkpoint(field: &GridField, out: &mut impl Write) -> std::io::Result<()> {
    let g = field.grid();
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        level: g.level(),
        dim: g.dim(),
        lo: g.lo().to_vec(),
        hi: g.hi().to_vec(),
        points: g.points(),
        horizon: g.horizon(),
        dt: g.dt(),
        steps: g.steps(),
        nodes: g.node_count(),
        alpha: field.alpha(),
        eta: field.eta(),
        eps: field.eps(),
        model: field.meta().model.clone(),
        profile: field.meta().profile.clone(),
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for slice in field.slices() {
        for v in slice {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(input: &mut impl BufRead) -> Result<GridField, String> {
    let mut line = String::new();
    input.read_line(&mut line).map_err(|e| e.to_string())?;
    let h: CheckpointHeader = serde_json::from_str(&line).map_err(|e| e.to_string())?;
    if h.format != CHECKPOINT_FORMAT {
        return Err(format!("unknown checkpoint format `{}`", h.format));
    }
    let grid = Grid::new(h.level, h.dim, h.lo, h.hi, h.points, h.horizon, h.dt)
        .map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| e.to_string())?;
    let expected = 8 * (h.steps + 1) * h.nodes;
    if bytes.len() != expected {
        return Err(format!(
            "payload has {} bytes, expected {expected}",
            bytes.len()
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let slices = values.chunks(h.nodes).map(<[f64]>::to_vec).collect();
    let meta = FieldMeta {
        model: h.model,
        profile: h.profile,
        eta: h.eta,
        eps: h.eps,
    };
    GridField::from_slices(grid, meta, h.alpha, slices).map_err(|e| e.to_string())
}

/// Meta row, then one `weight,path` row per atom.
pub fn write_measure(m: &EnvelopeMeasure, out: impl Write) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let x: Vec<String> = m.meta.x.iter().map(|v| format!("{v:?}")).collect();
    w.write_record([
        "meta".to_string(),
        format!("level={}", m.meta.level),
        format!("eta={:?}", m.meta.eta),
        format!("eps={:?}", m.meta.eps),
        format!("r={:?}", m.meta.r),
        format!("t={:?}", m.meta.t),
        format!("x={}", x.join(" ")),
        format!("off_cone_mass={:?}", m.off_cone_mass),
    ])?;
    w.write_record(["weight", "path"])?;
    for a in &m.atoms {
        w.write_record([format!("{:?}", a.weight), path_record(&a.path)])?;
    }
    w.flush()?;
    Ok(())
}

/// Atoms of a measure table, in file order.
pub fn read_measure_atoms(input: impl Read) -> Result<Vec<(f64, StepPath)>, String> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_reader(input);
    let mut atoms = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if i < 2 {
            continue;
        }
        let w: f64 = rec[0]
            .parse()
            .map_err(|_| format!("bad weight `{}`", &rec[0]))?;
        atoms.push((w, parse_path_record(&rec[1])?));
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let q = StepPath::new(
            vec![0.0, 0.25, 0.5],
            vec![
                SymMat::from_rows(&[&[0.1, 0.02], &[0.02, 0.3]]),
                SymMat::diag(&[0.5, 0.5]),
                SymMat::from_rows(&[&[1.0, -0.1], &[-0.1, 2.0 / 3.0]]),
            ],
        )
        .unwrap();
        let s = path_record(&q);
        assert!(s.starts_with("2|0.0 0.25 0.5|0.1 0.02 0.3"));
        assert_eq!(parse_path_record(&s).unwrap(), q);
    }

    #[test]
    fn record_rejects_wrong_counts() {
        assert!(parse_path_record("1|0 0.5|1").is_err());
        assert!(parse_path_record("1|0 0.5").is_err());
        assert!(parse_path_record("x|0|1").is_err());
    }
}
