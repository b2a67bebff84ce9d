//! Trace CSV schema.
//!
//! Fixed columns, then five per estimator slot (`p_`, `c_`, `e_` for the
//! proposed, conventional and equivalent estimators). Inactive slots are
//! empty fields. Floats use Rust's shortest round-trip scientific form, so
//! reading a written trace reproduces it bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::estimator::{Validity, VirtualOutput};
use crate::math::{wrap_2pi, Vec2};
use crate::sim::{EstimatorRecord, Trace, TraceRecord};

pub const BASE_COLUMNS: [&str; 9] = [
    "t",
    "theta",
    "theta_wrapped",
    "omega",
    "i_alpha",
    "i_beta",
    "v_alpha",
    "v_beta",
    "load_torque",
];

const SLOT_FIELDS: [&str; 5] = ["theta_hat", "omega_hat", "y_v1", "y_v2", "validity"];
const SLOTS: [&str; 3] = ["p", "c", "e"];

/// Full header row.
pub fn header() -> Vec<String> {
    let mut h: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for slot in SLOTS {
        for f in SLOT_FIELDS {
            h.push(format!("{slot}_{f}"));
        }
    }
    h
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn slot_fields(e: Option<&EstimatorRecord>) -> [String; 5] {
    match e {
        None => Default::default(),
        Some(e) => [
            num(e.theta_hat),
            num(e.omega_hat),
            num(e.y_v.y1),
            num(e.y_v.y2),
            e.validity.code().to_string(),
        ],
    }
}

pub fn write_trace<W: Write>(out: W, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for r in &trace.records {
        let mut row: Vec<String> = vec![
            num(r.t),
            num(r.theta),
            num(wrap_2pi(r.theta)),
            num(r.omega),
            num(r.i.x),
            num(r.i.y),
            num(r.v.x),
            num(r.v.y),
            num(r.load_torque),
        ];
        for e in [&r.proposed, &r.conventional, &r.equivalent] {
            row.extend(slot_fields(e.as_ref()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::TraceFormat {
        line,
        msg: msg.into(),
    }
}

pub fn read_trace<R: Read>(input: R) -> Result<Trace> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let want = header();
    let got: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if got != want {
        return Err(bad(1, "trace header does not match the schema"));
    }
    let mut records = Vec::new();
    for (n, row) in rd.records().enumerate() {
        let row = row?;
        let line = n + 2;
        let f = |k: usize| -> Result<f64> {
            row.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| bad(line, format!("column {} is not a number", want[k])))
        };
        let slot = |base: usize| -> Result<Option<EstimatorRecord>> {
            if row.get(base).is_none_or(str::is_empty) {
                return Ok(None);
            }
            let code: u8 = row
                .get(base + 4)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(line, "bad validity code"))?;
            Ok(Some(EstimatorRecord {
                theta_hat: f(base)?,
                omega_hat: f(base + 1)?,
                y_v: VirtualOutput::new(f(base + 2)?, f(base + 3)?),
                validity: Validity::from_code(code).ok_or_else(|| bad(line, "bad validity code"))?,
            }))
        };
        records.push(TraceRecord {
            t: f(0)?,
            theta: f(1)?,
            omega: f(3)?,
            i: Vec2::new(f(4)?, f(5)?),
            v: Vec2::new(f(6)?, f(7)?),
            load_torque: f(8)?,
            proposed: slot(9)?,
            conventional: slot(14)?,
            equivalent: slot(19)?,
        });
    }
    Ok(Trace { records })
}
