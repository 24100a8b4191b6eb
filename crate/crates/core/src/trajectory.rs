//! Trajectory CSV and run summary JSON.
//!
//! Numbers are written with 17 significant digits so that reading a CSV back
//! reproduces every recorded `f64` bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CbfError, Result};
use crate::filter::ActiveBranch;
use crate::sim::{EventKind, Sample, ScenarioConfig, SimEvent, Trajectory};

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> CbfError {
    CbfError::Usage(format!("trajectory I/O: {e}"))
}

/// Header: `t`, states, `u0_*`, `u_*`, `h_1..h_n`, `hbar_1..hbar_n`,
/// `slab_lower`, `slab_upper`, `active_branch`.
pub fn csv_header(traj: &Trajectory) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(traj.state_names.iter().cloned());
    cols.extend(traj.input_names.iter().map(|n| format!("u0_{n}")));
    cols.extend(traj.input_names.iter().map(|n| format!("u_{n}")));
    cols.extend((1..=traj.levels).map(|i| format!("h_{i}")));
    cols.extend((1..=traj.levels).map(|i| format!("hbar_{i}")));
    cols.extend(["slab_lower", "slab_upper", "active_branch"].map(String::from));
    cols
}

pub fn write_csv<W: Write>(traj: &Trajectory, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header(traj)).map_err(io_err)?;
    for s in &traj.samples {
        let mut row = vec![fmt_f64(s.t)];
        for values in [&s.state, &s.u_nominal, &s.u_filtered, &s.h, &s.hbar] {
            row.extend(values.iter().map(|v| fmt_f64(*v)));
        }
        row.push(fmt_f64(s.slab_lower));
        row.push(fmt_f64(s.slab_upper));
        row.push(s.active.as_str().to_string());
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a CSV written by [`write_csv`]. `correction_norm` is not stored and is
/// recomputed as `|u - u0|`; authority losses are not restored.
pub fn read_csv<R: Read>(reader: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers().map_err(io_err)?.iter().map(String::from).collect();
    let bad = |msg: &str| CbfError::Usage(format!("trajectory CSV: {msg}"));
    if header.first().map(String::as_str) != Some("t") {
        return Err(bad("first column must be t"));
    }
    let first_u0 = header.iter().position(|c| c.starts_with("u0_")).ok_or_else(|| bad("no u0_ columns"))?;
    let first_h = header.iter().position(|c| c == "h_1").ok_or_else(|| bad("no h_1 column"))?;
    let state_names: Vec<String> = header[1..first_u0].to_vec();
    let input_names: Vec<String> = header[first_u0..]
        .iter()
        .take_while(|c| c.starts_with("u0_"))
        .map(|c| c["u0_".len()..].to_string())
        .collect();
    let (n, m) = (state_names.len(), input_names.len());
    if first_h != 1 + n + 2 * m || (header.len() - first_h - 3) % 2 != 0 {
        return Err(bad("unexpected column layout"));
    }
    let levels = (header.len() - first_h - 3) / 2;
    let mut traj = Trajectory {
        state_names,
        input_names,
        levels,
        samples: Vec::new(),
        authority_losses: Vec::new(),
    };
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(io_err)?;
        if record.len() != header.len() {
            return Err(bad(&format!("row {} has {} fields", line + 2, record.len())));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| bad(&format!("row {} column {}: {e}", line + 2, header[i])))
        };
        let range = |start: usize, len: usize| -> Result<Vec<f64>> { (start..start + len).map(num).collect() };
        let u_nominal = range(1 + n, m)?;
        let u_filtered = range(1 + n + m, m)?;
        let correction_norm = u_nominal
            .iter()
            .zip(&u_filtered)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let last = header.len() - 1;
        traj.samples.push(Sample {
            t: num(0)?,
            state: range(1, n)?,
            u_nominal,
            u_filtered,
            h: range(first_h, levels)?,
            hbar: range(first_h + levels, levels)?,
            slab_lower: num(last - 2)?,
            slab_upper: num(last - 1)?,
            active: ActiveBranch::parse(&record[last])
                .ok_or_else(|| bad(&format!("row {}: unknown branch {}", line + 2, &record[last])))?,
            correction_norm,
        });
    }
    Ok(traj)
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub system: String,
    pub filter: String,
    pub seed: u64,
    pub event: EventKind,
    pub t_event: f64,
    pub detail: String,
    pub samples: usize,
    pub min_h1: f64,
    pub min_hbar1: f64,
    pub min_all_levels: f64,
    pub max_abs_u_filtered: f64,
    pub max_correction_norm: f64,
    pub authority_losses: usize,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn new(cfg: &ScenarioConfig, traj: &Trajectory, event: &SimEvent, wall_time_s: f64) -> Self {
        Self {
            scenario: cfg.name.clone(),
            system: cfg.system.as_str().to_string(),
            filter: cfg.filter.as_str().to_string(),
            seed: cfg.seed,
            event: event.kind,
            t_event: event.t_event,
            detail: event.detail.clone(),
            samples: traj.samples.len(),
            min_h1: traj.min_h1(),
            min_hbar1: traj.min_hbar1(),
            min_all_levels: traj.min_all_levels(),
            max_abs_u_filtered: traj.max_abs_u_filtered(),
            max_correction_norm: traj.max_correction_norm(),
            authority_losses: traj.authority_losses.len(),
            wall_time_s,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(io_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> Sample {
        Sample {
            t,
            state: vec![0.1 + t, -1.0 / 3.0],
            u_nominal: vec![2.0],
            u_filtered: vec![1.5],
            h: vec![1.0 / 7.0, f64::NAN],
            hbar: vec![2.0 - 1.0 / 7.0, 1e-300],
            slab_lower: -0.25,
            slab_upper: f64::INFINITY,
            active: ActiveBranch::LowerClamped,
            correction_norm: 0.5,
        }
    }

    fn traj() -> Trajectory {
        Trajectory {
            state_names: vec!["x1".into(), "x2".into()],
            input_names: vec!["u".into()],
            levels: 2,
            samples: vec![sample(0.0), sample(0.001)],
            authority_losses: Vec::new(),
        }
    }

    fn same(a: f64, b: f64) -> bool {
        a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            csv_header(&traj()).join(","),
            "t,x1,x2,u0_u,u_u,h_1,h_2,hbar_1,hbar_2,slab_lower,slab_upper,active_branch"
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let original = traj();
        let mut buf = Vec::new();
        write_csv(&original, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.state_names, original.state_names);
        assert_eq!(back.input_names, original.input_names);
        assert_eq!(back.levels, 2);
        for (a, b) in original.samples.iter().zip(&back.samples) {
            let fa: Vec<f64> = [vec![a.t], a.state.clone(), a.u_nominal.clone(), a.u_filtered.clone(), a.h.clone(), a.hbar.clone(), vec![a.slab_lower, a.slab_upper, a.correction_norm]].concat();
            let fb: Vec<f64> = [vec![b.t], b.state.clone(), b.u_nominal.clone(), b.u_filtered.clone(), b.h.clone(), b.hbar.clone(), vec![b.slab_lower, b.slab_upper, b.correction_norm]].concat();
            assert!(fa.iter().zip(&fb).all(|(x, y)| same(*x, *y)), "{fa:?} vs {fb:?}");
            assert_eq!(a.active, b.active);
        }
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(read_csv("x,y\n1,2\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_csv(&traj(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("lower_clamped", "sideways");
        assert!(read_csv(text.as_bytes()).is_err());
    }
}
