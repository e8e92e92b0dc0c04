//! Labeled-sample dataset file: `subject,session,t_ms,f00..f35,label_kg`.
//!
//! An empty `label_kg` field marks an unlabeled sample.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::domain::{LabeledSample, CHANNELS};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

pub fn feature_column(c: usize) -> String {
    format!("f{c:02}")
}

pub fn header() -> String {
    let mut h = String::from("subject,session,t_ms");
    for c in 0..CHANNELS {
        h.push(',');
        h.push_str(&feature_column(c));
    }
    h.push_str(",label_kg");
    h
}

pub fn write_dataset(path: &Path, samples: &[LabeledSample]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(&mut w);
    let head = header();
    wtr.write_record(head.split(','))
        .map_err(|e| io(e.into()))?;
    let mut row: Vec<String> = Vec::with_capacity(CHANNELS + 4);
    for s in samples {
        row.clear();
        row.push(s.subject_id.clone());
        row.push(s.session_index.to_string());
        row.push(s.frame_timestamp_ms.to_string());
        row.extend(s.features.iter().map(f64::to_string));
        row.push(s.label_kg.map(|l| l.to_string()).unwrap_or_default());
        wtr.write_record(&row).map_err(|e| io(e.into()))?;
    }
    wtr.flush().map_err(io)?;
    drop(wtr);
    w.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledSample>, DatasetError> {
    let parse = |line: u64, message: String| DatasetError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => DatasetError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse(1, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| parse(1, e.to_string()))?;
    let expected = header();
    if headers.iter().collect::<Vec<_>>().join(",") != expected {
        return Err(parse(1, format!("expected header `{expected}`")));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record
            .map_err(|e| parse(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != CHANNELS + 4 {
            return Err(parse(
                line,
                format!("expected {} columns, found {}", CHANNELS + 4, record.len()),
            ));
        }
        let num = |i: usize| -> Result<f64, DatasetError> {
            let v: f64 = record[i]
                .parse()
                .map_err(|_| parse(line, format!("not a number: `{}`", &record[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse(line, format!("non-finite value `{}`", &record[i])))
            }
        };
        let mut features = [0.0; CHANNELS];
        for (c, f) in features.iter_mut().enumerate() {
            *f = num(3 + c)?;
        }
        let label_kg = if record[CHANNELS + 3].is_empty() {
            None
        } else {
            Some(num(CHANNELS + 3)?)
        };
        out.push(LabeledSample {
            features,
            label_kg,
            subject_id: record[0].to_string(),
            session_index: record[1]
                .parse()
                .map_err(|_| parse(line, format!("bad session `{}`", &record[1])))?,
            frame_timestamp_ms: record[2]
                .parse()
                .map_err(|_| parse(line, format!("bad timestamp `{}`", &record[2])))?,
        });
    }
    Ok(out)
}

/// Feature matrix and labels of labeled samples selected by `idx`.
pub fn design_matrix(samples: &[LabeledSample], idx: &[usize]) -> (Array2<f64>, Vec<f64>) {
    let mut x = Array2::zeros((idx.len(), CHANNELS));
    let mut y = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        let s = &samples[i];
        for c in 0..CHANNELS {
            x[[r, c]] = s.features[c];
        }
        y.push(s.label_kg.unwrap_or(f64::NAN));
    }
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = header();
        assert!(h.starts_with("subject,session,t_ms,f00,f01"));
        assert!(h.ends_with("f35,label_kg"));
        assert_eq!(h.split(',').count(), CHANNELS + 4);
    }
}
