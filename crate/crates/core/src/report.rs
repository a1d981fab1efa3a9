//! Result tables: one row per (scheme, k, c, metric) point, with a
//! fixed CSV column schema and a lossless JSON alternative.
//!
//! Schema: `scheme,k,c,metric,value,method,ci_halfwidth,trials,seed`.
//! Analytic rows leave the CI, trials, and seed fields empty; Monte
//! Carlo rows always carry all three, with an infinite half-width
//! flagging a sample too small for an interval (a single retained
//! trial). Numbers are written in shortest round-trip form, so reading
//! a table back reproduces the original values bit for bit.
//!
//! JSON cannot represent non-finite numbers, so an infinite half-width
//! serializes as `null` there; [`normalize_rows`] restores it on read
//! (a Monte Carlo row without a half-width can only mean the infinite
//! flag). An undefined `value` — possible only for a discarded
//! single-trial row — serializes as an empty CSV field or JSON `null`
//! and reads back as NaN.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::Result;
use crate::mc::Estimate;

/// Origin of a row's value: closed-form/quadrature evaluation or Monte
/// Carlo estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Mc,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Mc => "mc",
        }
    }
}

/// One result-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Selection-scheme name; empty for scheme-independent metrics.
    #[serde(default)]
    pub scheme: String,
    pub k: Option<u32>,
    pub c: Option<u32>,
    pub metric: String,
    #[serde(with = "nullable_float")]
    pub value: f64,
    pub method: Source,
    pub ci_halfwidth: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

impl Row {
    /// A row computed analytically: no CI, trials, or seed.
    pub fn analytic(metric: &str, value: f64) -> Row {
        Row {
            scheme: String::new(),
            k: None,
            c: None,
            metric: metric.to_string(),
            value,
            method: Source::Analytic,
            ci_halfwidth: None,
            trials: None,
            seed: None,
        }
    }

    /// A row estimated by simulation.
    pub fn mc(metric: &str, estimate: &Estimate, seed: u64) -> Row {
        Row {
            scheme: String::new(),
            k: None,
            c: None,
            metric: metric.to_string(),
            value: estimate.mean,
            method: Source::Mc,
            ci_halfwidth: Some(estimate.ci_halfwidth),
            trials: Some(estimate.trials),
            seed: Some(seed),
        }
    }

    pub fn with_scheme(mut self, scheme: &str) -> Row {
        self.scheme = scheme.to_string();
        self
    }

    pub fn with_k(mut self, k: u32) -> Row {
        self.k = Some(k);
        self
    }

    pub fn with_c(mut self, c: u32) -> Row {
        self.c = Some(c);
        self
    }
}

/// Sorts rows into the stable reporting order: metric, then the sweep
/// axes lexicographically (scheme, k, c).
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        (&a.metric, &a.scheme, a.k, a.c).cmp(&(&b.metric, &b.scheme, b.k, b.c))
    });
}

/// Restores information the serialization format cannot carry: a Monte
/// Carlo row read back without a CI half-width regains the infinite
/// flag (JSON writes non-finite numbers as `null`).
pub fn normalize_rows(rows: &mut [Row]) {
    for row in rows {
        if row.method == Source::Mc && row.ci_halfwidth.is_none() {
            row.ci_halfwidth = Some(f64::INFINITY);
        }
    }
}

/// Writes rows in the requested format.
pub fn write_rows<W: Write>(rows: &[Row], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, out),
        OutputFormat::Json => write_json(rows, out),
    }
}

/// Reads rows in the requested format and normalizes them.
pub fn read_rows<R: Read>(format: OutputFormat, input: R) -> Result<Vec<Row>> {
    let mut rows = match format {
        OutputFormat::Csv => read_csv(input)?,
        OutputFormat::Json => read_json(input)?,
    };
    normalize_rows(&mut rows);
    Ok(rows)
}

fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(crate::error::Error::from)?;
    Ok(())
}

fn read_csv<R: Read>(input: R) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(Into::into)
}

fn write_json<W: Write>(rows: &[Row], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn read_json<R: Read>(input: R) -> Result<Vec<Row>> {
    serde_json::from_reader(input).map_err(Into::into)
}

/// `f64` field that may legitimately be undefined: NaN (and any other
/// non-finite) writes as an empty/`null` field and reads back as NaN.
mod nullable_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Estimate;

    fn sample_rows() -> Vec<Row> {
        let est = Estimate {
            mean: 0.137,
            ci_halfwidth: 0.0021,
            trials: 100_000,
            retained: 99_998,
        };
        vec![
            Row::analytic("mode_prob", 0.139_775_703_602_2)
                .with_scheme("ns")
                .with_k(2)
                .with_c(1),
            Row::mc("mode_prob", &est, 42).with_scheme("ns").with_k(2).with_c(1),
            Row::analytic("coverage", 2.013_144_784_408_289e-2),
        ]
    }

    #[test]
    fn csv_matches_the_frozen_column_schema() {
        let mut buf = Vec::new();
        write_csv(&sample_rows(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scheme,k,c,metric,value,method,ci_halfwidth,trials,seed"
        );
        let analytic = lines.next().unwrap();
        assert!(
            analytic.ends_with(",analytic,,,"),
            "analytic rows leave CI/trials/seed empty: {analytic}"
        );
        let mc = lines.next().unwrap();
        assert!(mc.contains(",mc,0.0021,100000,42"), "{mc}");
    }

    #[test]
    fn csv_round_trips_bit_for_bit() {
        let rows = sample_rows();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = read_rows(OutputFormat::Csv, buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn json_round_trips_and_agrees_with_csv() {
        let rows = sample_rows();
        let mut json = Vec::new();
        write_json(&rows, &mut json).unwrap();
        let back = read_rows(OutputFormat::Json, json.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn infinite_interval_flag_survives_both_formats() {
        let single = Estimate {
            mean: 1.0,
            ci_halfwidth: f64::INFINITY,
            trials: 1,
            retained: 1,
        };
        let rows = vec![Row::mc("p_in", &single, 7)];

        let mut csv_buf = Vec::new();
        write_csv(&rows, &mut csv_buf).unwrap();
        assert!(String::from_utf8_lossy(&csv_buf).contains("inf"));
        let back = read_rows(OutputFormat::Csv, csv_buf.as_slice()).unwrap();
        assert_eq!(back[0].ci_halfwidth, Some(f64::INFINITY));

        let mut json_buf = Vec::new();
        write_json(&rows, &mut json_buf).unwrap();
        assert!(String::from_utf8_lossy(&json_buf).contains("null"));
        let back = read_rows(OutputFormat::Json, json_buf.as_slice()).unwrap();
        assert_eq!(back[0].ci_halfwidth, Some(f64::INFINITY));
    }

    #[test]
    fn undefined_values_read_back_as_nan() {
        let mut row = Row::mc(
            "sinr",
            &Estimate {
                mean: f64::NAN,
                ci_halfwidth: f64::INFINITY,
                trials: 1,
                retained: 0,
            },
            3,
        );
        row.value = f64::NAN;
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let back = read_rows(OutputFormat::Csv, buf.as_slice()).unwrap();
        assert!(back[0].value.is_nan());
    }

    #[test]
    fn rows_sort_by_metric_then_sweep_axes() {
        let mut rows = vec![
            Row::analytic("rate", 1.0).with_scheme("us").with_k(1).with_c(10),
            Row::analytic("rate", 1.0).with_scheme("ns").with_k(2).with_c(1),
            Row::analytic("rate", 1.0).with_scheme("ns").with_k(1).with_c(1),
            Row::analytic("coverage", 1.0).with_scheme("us").with_k(8).with_c(100),
        ];
        sort_rows(&mut rows);
        let order: Vec<_> = rows
            .iter()
            .map(|r| (r.metric.as_str(), r.scheme.as_str(), r.k.unwrap()))
            .collect();
        assert_eq!(
            order,
            vec![
                ("coverage", "us", 8),
                ("rate", "ns", 1),
                ("rate", "ns", 2),
                ("rate", "us", 1),
            ]
        );
    }
}
