//! CSV and JSON writers for sweep results.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::sweep::ResultRow;

pub const COLUMNS: [&str; 23] = [
    "protocol",
    "N",
    "loss_db",
    "q_param",
    "theta_deg",
    "Q",
    "p_dark",
    "p_pass",
    "path",
    "entropy_term",
    "ell",
    "rate",
    "plob",
    "status",
    "best",
    "certified",
    "reason",
    "p_z",
    "p_depol",
    "mu_out",
    "eta0",
    "eta1",
    "attack",
];

pub const TIMING_COLUMN: &str = "wall_s";

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn fields(r: &ResultRow) -> Vec<String> {
    vec![
        r.protocol.clone(),
        num(r.n_total),
        opt(r.loss_db),
        opt(r.q_param),
        opt(r.theta_deg),
        opt(r.qber),
        opt(r.p_dark),
        opt(r.p_pass),
        r.path.as_str().to_string(),
        opt(r.entropy_term),
        opt(r.ell),
        num(r.rate),
        opt(r.plob),
        r.status.clone(),
        num(r.best),
        r.certified.to_string(),
        r.reason.clone(),
        opt(r.p_z),
        opt(r.p_depol),
        opt(r.mu_out),
        opt(r.eta0),
        opt(r.eta1),
        r.attack.clone(),
    ]
}

pub fn write_csv<W: Write>(rows: &[ResultRow], timing: bool, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if timing {
        header.push(TIMING_COLUMN);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut f = fields(r);
        if timing {
            f.push(num(r.wall_s));
        }
        w.write_record(&f)?;
    }
    w.flush()?;
    Ok(())
}

fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(num(x))
    }
}

fn jopt(x: Option<f64>) -> Value {
    x.map(jnum).unwrap_or(Value::Null)
}

pub fn to_json(rows: &[ResultRow], timing: bool) -> Value {
    let list = rows
        .iter()
        .map(|r| {
            let vals = [
                json!(r.protocol),
                jnum(r.n_total),
                jopt(r.loss_db),
                jopt(r.q_param),
                jopt(r.theta_deg),
                jopt(r.qber),
                jopt(r.p_dark),
                jopt(r.p_pass),
                json!(r.path.as_str()),
                jopt(r.entropy_term),
                jopt(r.ell),
                jnum(r.rate),
                jopt(r.plob),
                json!(r.status),
                jnum(r.best),
                json!(r.certified),
                json!(r.reason),
                jopt(r.p_z),
                jopt(r.p_depol),
                jopt(r.mu_out),
                jopt(r.eta0),
                jopt(r.eta1),
                json!(r.attack),
            ];
            let mut m: Map<String, Value> = COLUMNS.iter().map(|c| c.to_string()).zip(vals).collect();
            if timing {
                m.insert(TIMING_COLUMN.into(), jnum(r.wall_s));
            }
            Value::Object(m)
        })
        .collect();
    Value::Array(list)
}

pub fn write_json<W: Write>(rows: &[ResultRow], timing: bool, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, &to_json(rows, timing))?;
    writeln!(out)
}
