//! CSV telemetry: `t,z1..z2n,u1..um,W1..WN,e_hjb,g1,xi,sigma,V_hat`.
//!
//! Floats use the shortest round-trip `Debug` formatting, so reading a
//! file back reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use vgcritic_core::sim::{TelemetryRecord, TelemetrySink};

pub fn header(dim: usize, inputs: usize, weights: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=dim).map(|i| format!("z{i}")));
    h.extend((1..=inputs).map(|i| format!("u{i}")));
    h.extend((1..=weights).map(|i| format!("W{i}")));
    h.extend(["e_hjb", "g1", "xi", "sigma", "V_hat"].map(String::from));
    h
}

/// Streams records to a CSV file. Write errors are kept and reported by
/// [`CsvSink::finish`] since [`TelemetrySink::record`] cannot fail.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    row: Vec<String>,
    error: Option<csv::Error>,
    rows: usize,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(
        path: &Path,
        dim: usize,
        inputs: usize,
        weights: usize,
    ) -> Result<Self, csv::Error> {
        let file = File::create(path)?;
        Self::new(BufWriter::new(file), dim, inputs, weights)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W, dim: usize, inputs: usize, weights: usize) -> Result<Self, csv::Error> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(header(dim, inputs, weights))?;
        Ok(CsvSink {
            writer,
            row: Vec::new(),
            error: None,
            rows: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<W, csv::Error> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| e.into_error().into())
    }
}

impl<W: Write> TelemetrySink for CsvSink<W> {
    fn record(&mut self, rec: &TelemetryRecord) {
        if self.error.is_some() {
            return;
        }
        self.row.clear();
        self.row.push(format!("{:?}", rec.t));
        for v in rec.z.iter().chain(&rec.u_applied).chain(&rec.weights) {
            self.row.push(format!("{v:?}"));
        }
        self.row.push(format!("{:?}", rec.e_hjb));
        self.row.push(format!("{:?}", rec.g1));
        self.row.push(u8::from(rec.xi).to_string());
        self.row.push(format!("{:?}", rec.sigma));
        self.row.push(format!("{:?}", rec.v_hat));
        match self.writer.write_record(&self.row) {
            Ok(()) => self.rows += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

fn count(h: &csv::StringRecord, prefix: char) -> usize {
    h.iter()
        .filter(|c| {
            c.strip_prefix(prefix)
                .is_some_and(|r| !r.is_empty() && r.bytes().all(|b| b.is_ascii_digit()))
        })
        .count()
}

/// Reads a telemetry file written by [`CsvSink`].
pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRecord>, ReadError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let h = rdr.headers()?.clone();
    let (dim, m, n_w) = (count(&h, 'z'), count(&h, 'u'), count(&h, 'W'));
    let expected = header(dim, m, n_w);
    if h.iter().ne(expected.iter().map(String::as_str)) {
        return Err(ReadError::Format(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let vals: Vec<f64> = row
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ReadError::Format(format!("{}: row {}: {e}", path.display(), i + 2)))?;
        let (a, b, c) = (1 + dim, 1 + dim + m, 1 + dim + m + n_w);
        out.push(TelemetryRecord {
            t: vals[0],
            z: vals[1..a].to_vec(),
            u_applied: vals[a..b].to_vec(),
            weights: vals[b..c].to_vec(),
            e_hjb: vals[c],
            g1: vals[c + 1],
            xi: vals[c + 2] != 0.0,
            sigma: vals[c + 3],
            v_hat: vals[c + 4],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            header(4, 1, 2).join(","),
            "t,z1,z2,z3,z4,u1,W1,W2,e_hjb,g1,xi,sigma,V_hat"
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let rec = TelemetryRecord {
            t: 0.1 + 0.2,
            z: vec![1.0 / 3.0, -2e-300, f64::MIN_POSITIVE, 7.0],
            u_applied: vec![-8.999999999999998],
            weights: vec![std::f64::consts::PI, -0.0],
            e_hjb: 1e300,
            g1: 0.01,
            xi: true,
            sigma: -3.5,
            v_hat: 2.0f64.sqrt(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut sink = CsvSink::create(&path, 4, 1, 2).unwrap();
        sink.record(&rec);
        sink.record(&TelemetryRecord {
            xi: false,
            ..rec.clone()
        });
        sink.finish().unwrap();
        let back = read_telemetry(&path).unwrap();
        assert_eq!(back[0], rec);
        assert!(!back[1].xi);
        assert_eq!(back[0].weights[1].to_bits(), (-0.0f64).to_bits());
    }
}
