//! Ledger CSV: fixed header, 17 significant digits per value.

use std::io::Write;

use vesicle_core::BalanceRecord;

pub const LEDGER_HEADER: &str = "t,F,kinetic,grad_kinetic,E_bending,E_volume,E_area,dissipation,trace_input,martingale_increment,residual";

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ledger_row(r: &BalanceRecord) -> String {
    [
        r.t,
        r.f,
        r.kinetic,
        r.grad_kinetic,
        r.e_bending,
        r.e_volume,
        r.e_area,
        r.dissipation,
        r.trace_input,
        r.martingale_increment,
        r.residual,
    ]
    .iter()
    .map(|&x| fmt(x))
    .collect::<Vec<_>>()
    .join(",")
}

pub fn write_row(out: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    let line: Vec<String> = values.iter().map(|&x| fmt(x)).collect();
    writeln!(out, "{}", line.join(","))
}

/// Parses a ledger back into rows of numbers; for tests and tooling.
pub fn parse(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == LEDGER_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().map_err(|e| format!("{v}: {e}")))
                .collect()
        })
        .collect()
}
