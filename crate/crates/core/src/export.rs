//! CSV output shared by the modules; every float is written with 17
//! significant digits so files round-trip bit-exactly.

use std::io::Write;

use crate::error::Result;

/// `{:.16e}`: one leading digit plus sixteen decimals.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header and one row per time point: `t, <name>_1 .. <name>_d`.
pub fn write_series<W: Write>(
    writer: W,
    prefix: &str,
    times: impl Iterator<Item = f64>,
    rows: &[f64],
    d: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("{prefix}_{i}")));
    w.write_record(&header)?;
    for (k, t) in times.enumerate() {
        let mut rec = vec![fmt_f64(t)];
        rec.extend(rows[k * d..(k + 1) * d].iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table of floats with a fixed header.
pub fn write_table<W: Write>(writer: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}
