//! CSV dataset files and report output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::PairedDataset;
use crate::error::{Error, Result};
use crate::estimator::{HardLabelCount, HardLabelCounts, SoftLabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Soft,
    Counts,
    Paired,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Soft => "soft",
            Format::Counts => "counts",
            Format::Paired => "paired",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            Format::Soft => &["eta"],
            Format::Counts => &["pos", "total"],
            Format::Paired => &["eta_tilde", "y"],
        }
    }

    fn from_header(header: &[&str]) -> Option<Format> {
        [Format::Soft, Format::Counts, Format::Paired]
            .into_iter()
            .find(|f| f.header() == header)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Soft(SoftLabelSet),
    Counts(HardLabelCounts),
    Paired(PairedDataset),
}

impl Dataset {
    pub fn format(&self) -> Format {
        match self {
            Dataset::Soft(_) => Format::Soft,
            Dataset::Counts(_) => Format::Counts,
            Dataset::Paired(_) => Format::Paired,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Soft(s) => s.len(),
            Dataset::Counts(c) => c.len(),
            Dataset::Paired(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Identity of an input file as read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub format: Format,
    pub rows: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn data_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}:{line}: {msg}", path.display()))
}

fn parse_real(field: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| data_err(path, line, format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(data_err(path, line, format!("'{field}' is not finite")));
    }
    Ok(v)
}

fn parse_probability(field: &str, path: &Path, line: usize) -> Result<f64> {
    let v = parse_real(field, path, line)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(data_err(path, line, format!("{v} not in [0, 1]")));
    }
    Ok(v)
}

fn parse_count(field: &str, path: &Path, line: usize) -> Result<u64> {
    field.trim().parse().map_err(|_| {
        data_err(
            path,
            line,
            format!("'{field}' is not a nonnegative integer"),
        )
    })
}

/// Parses a dataset from CSV bytes. The format is taken from `expected` or,
/// when absent, inferred from the header.
pub fn parse_dataset(bytes: &[u8], path: &Path, expected: Option<Format>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = reader.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let detected = Format::from_header(&names);
    let format = match (expected, detected) {
        (Some(e), Some(d)) if e == d => e,
        (None, Some(d)) => d,
        (Some(e), _) => {
            return Err(Error::Data(format!(
                "{}: header {:?} does not match format {} (expected columns {})",
                path.display(),
                names,
                e.name(),
                e.header().join(",")
            )))
        }
        (None, None) => {
            return Err(Error::Data(format!(
                "{}: unrecognized header {:?}; expected eta | pos,total | eta_tilde,y",
                path.display(),
                names
            )))
        }
    };

    let mut reals = Vec::new();
    let mut counts = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != format.header().len() {
            return Err(data_err(
                path,
                line,
                format!("expected {} fields", format.header().len()),
            ));
        }
        match format {
            Format::Soft => reals.push(parse_probability(&record[0], path, line)?),
            Format::Counts => {
                let positives = parse_count(&record[0], path, line)?;
                let total = parse_count(&record[1], path, line)?;
                if total == 0 || positives > total {
                    return Err(data_err(
                        path,
                        line,
                        "need 0 <= pos <= total and total >= 1",
                    ));
                }
                counts.push(HardLabelCount { positives, total });
            }
            Format::Paired => {
                reals.push(parse_probability(&record[0], path, line)?);
                labels.push(match record[1].trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(data_err(path, line, format!("label '{other}' not 0 or 1")))
                    }
                });
            }
        }
    }
    let wrap = |e: Error| Error::Data(format!("{}: {e}", path.display()));
    Ok(match format {
        Format::Soft => Dataset::Soft(SoftLabelSet::new(reals).map_err(wrap)?),
        Format::Counts => Dataset::Counts(HardLabelCounts::new(counts).map_err(wrap)?),
        Format::Paired => Dataset::Paired(PairedDataset::new(reals, labels).map_err(wrap)?),
    })
}

pub fn read_dataset(path: &Path, expected: Option<Format>) -> Result<(Dataset, FileDigest)> {
    let bytes =
        fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let data = parse_dataset(&bytes, path, expected)?;
    let digest = FileDigest {
        path: path.display().to_string(),
        format: data.format(),
        rows: data.len(),
        sha256: sha256_hex(&bytes),
    };
    Ok((data, digest))
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn dataset_to_csv(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(data.format().header())?;
    match data {
        Dataset::Soft(s) => {
            for &v in s.values() {
                w.write_record([format_real(v)])?;
            }
        }
        Dataset::Counts(c) => {
            for e in c.entries() {
                w.write_record([e.positives.to_string(), e.total.to_string()])?;
            }
        }
        Dataset::Paired(p) => {
            for (&s, &y) in p.scores().iter().zip(p.labels()) {
                w.write_record([format_real(s), u8::from(y).to_string()])?;
            }
        }
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Writes all files or none of the final paths: every file goes to a
/// temporary sibling first and is renamed once all writes succeeded.
pub fn write_files_atomically(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    let result = (|| {
        for (path, bytes) in files {
            let name = path
                .file_name()
                .ok_or_else(|| Error::Usage(format!("invalid output path {}", path.display())))?;
            let tmp = path.with_file_name(format!(".{}.partial", name.to_string_lossy()));
            let mut f = fs::File::create(&tmp)?;
            staged.push((tmp.clone(), path.clone()));
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    for (tmp, path) in staged {
        fs::rename(&tmp, &path)?;
    }
    Ok(())
}
