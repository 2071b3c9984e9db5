use std::io::Write;

use crate::error::{Error, Result};
use crate::harness::run::RunRecord;
use crate::harness::sweep::SweepResult;

/// Shortest text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `config_hash,seed,step,metric,value`
pub fn write_curves<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["config_hash", "seed", "step", "metric", "value"]).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.config_hash.as_str(),
            &r.seed.to_string(),
            &r.step.to_string(),
            &r.metric,
            &format_f64(r.value),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `algorithm,<params...>,mean_error,diverged,divergence_step`
pub fn write_sweep<W: Write>(out: W, result: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["algorithm".to_owned()];
    header.extend(result.param_names.iter().cloned());
    header.extend(["mean_error", "diverged", "divergence_step"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for row in &result.rows {
        let mut rec = vec![row.algorithm.clone()];
        rec.extend(row.params.iter().map(|(_, v)| v.clone()));
        rec.push(format_f64(row.mean_error));
        rec.push(row.diverged.to_string());
        rec.push(row.divergence_step.map_or_else(String::new, |s| s.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `values` as a single-column CSV with `step,<name>` rows.
pub fn write_series<W: Write>(out: W, name: &str, steps: &[u64], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", name]).map_err(csv_err)?;
    for (s, v) in steps.iter().zip(values) {
        w.write_record([s.to_string(), format_f64(*v)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456789.123, -0.0, 5e20] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn curve_schema() {
        let mut buf = Vec::new();
        let r = RunRecord {
            config_hash: "abc".into(),
            seed: 3,
            step: 10,
            metric: "error".into(),
            value: 0.25,
        };
        write_curves(&mut buf, &[r]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "config_hash,seed,step,metric,value\nabc,3,10,error,0.25\n");
    }
}
