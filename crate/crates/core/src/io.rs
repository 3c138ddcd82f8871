//! File formats: signal CSV, FRF CSV and transfer-function JSON.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FrequencyResponse;
use crate::signal::SampledSignal;
use crate::tf::RationalTF;

const SIGNAL_HEADER: &str = "# sample_rate_hz=";
pub const FRF_HEADER: &str = "f_hz,re,im,coherence";

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn malformed(what: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Malformed {
        what: what.into(),
        reason: reason.into(),
    }
}

/// Header line followed by one plain-decimal sample per line.
pub fn format_signal(signal: &SampledSignal) -> String {
    let mut out = String::with_capacity(24 * signal.len() + 32);
    let _ = writeln!(out, "{SIGNAL_HEADER}{}", signal.sample_rate());
    for v in signal.samples() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn parse_signal(text: &str, source: &str) -> Result<SampledSignal> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed(source, "empty file"))?;
    let rate = header
        .trim()
        .strip_prefix(SIGNAL_HEADER)
        .ok_or_else(|| malformed(source, format!("first line must be `{SIGNAL_HEADER}<value>`")))?;
    let sample_rate: f64 = rate
        .trim()
        .parse()
        .map_err(|_| malformed(source, format!("sample_rate_hz `{rate}` is not a number")))?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| malformed(source, format!("line {}: `{line}` is not a number", i + 2)))?;
        samples.push(v);
    }
    SampledSignal::new(samples, sample_rate).map_err(|e| malformed(source, e.to_string()))
}

pub fn write_signal(path: impl AsRef<Path>, signal: &SampledSignal) -> Result<()> {
    write(path.as_ref(), &format_signal(signal))
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<SampledSignal> {
    let path = path.as_ref();
    parse_signal(&read(path)?, &path.display().to_string())
}

/// `f_hz,re,im,coherence` rows; the coherence field is empty when absent.
pub fn format_frf(frf: &FrequencyResponse) -> String {
    let mut out = String::with_capacity(64 * frf.len() + 32);
    let _ = writeln!(out, "{FRF_HEADER}");
    for (i, (f, v)) in frf.freqs().iter().zip(frf.values()).enumerate() {
        match frf.coherence() {
            Some(c) => {
                let _ = writeln!(out, "{f},{},{},{}", v.re, v.im, c[i]);
            }
            None => {
                let _ = writeln!(out, "{f},{},{},", v.re, v.im);
            }
        }
    }
    out
}

/// Parses an FRF CSV. The sample rate is not part of the format and must be supplied.
pub fn parse_frf(text: &str, sample_rate: f64, source: &str) -> Result<FrequencyResponse> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed(source, "empty file"))?;
    if header.trim() != FRF_HEADER {
        return Err(malformed(source, format!("header must be `{FRF_HEADER}`")));
    }
    let (mut freqs, mut values, mut coherence) = (Vec::new(), Vec::new(), Vec::new());
    let mut has_coherence = None;
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = i + 2;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(malformed(source, format!("line {row}: expected 4 fields, got {}", fields.len())));
        }
        let num = |k: usize, name: &str| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| malformed(source, format!("line {row}: column {name} `{}` is not a number", fields[k])))
        };
        let f = num(0, "f_hz")?;
        if let Some(&prev) = freqs.last() {
            if f <= prev {
                return Err(malformed(
                    source,
                    format!("line {row}: column f_hz must be strictly increasing ({f} after {prev})"),
                ));
            }
        }
        freqs.push(f);
        values.push(Complex64::new(num(1, "re")?, num(2, "im")?));
        let present = !fields[3].is_empty();
        if *has_coherence.get_or_insert(present) != present {
            return Err(malformed(source, format!("line {row}: column coherence is only partially filled")));
        }
        if present {
            coherence.push(num(3, "coherence")?);
        }
    }
    let coherence = has_coherence.unwrap_or(false).then_some(coherence);
    FrequencyResponse::new(freqs, values, coherence, sample_rate).map_err(|e| malformed(source, e.to_string()))
}

pub fn write_frf(path: impl AsRef<Path>, frf: &FrequencyResponse) -> Result<()> {
    write(path.as_ref(), &format_frf(frf))
}

pub fn read_frf(path: impl AsRef<Path>, sample_rate: f64) -> Result<FrequencyResponse> {
    let path = path.as_ref();
    parse_frf(&read(path)?, sample_rate, &path.display().to_string())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TfDoc {
    sample_rate_hz: f64,
    b: Vec<f64>,
    a: Vec<f64>,
}

pub fn format_tf(tf: &RationalTF) -> String {
    let doc = TfDoc {
        sample_rate_hz: tf.sample_rate(),
        b: tf.b().to_vec(),
        a: tf.a().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("finite coefficients serialize");
    s.push('\n');
    s
}

pub fn parse_tf(text: &str, source: &str) -> Result<RationalTF> {
    let doc: TfDoc = serde_json::from_str(text).map_err(|e| malformed(source, e.to_string()))?;
    RationalTF::new(doc.b, doc.a, doc.sample_rate_hz).map_err(|e| malformed(source, e.to_string()))
}

pub fn write_tf(path: impl AsRef<Path>, tf: &RationalTF) -> Result<()> {
    write(path.as_ref(), &format_tf(tf))
}

pub fn read_tf(path: impl AsRef<Path>) -> Result<RationalTF> {
    let path = path.as_ref();
    parse_tf(&read(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn signal_csv_round_trips_exactly(
            samples in prop::collection::vec(-1e6f64..1e6, 1..64),
            rate in 1.0f64..1e5,
        ) {
            let s = SampledSignal::new(samples, rate).unwrap();
            let back = parse_signal(&format_signal(&s), "mem").unwrap();
            prop_assert_eq!(back, s);
        }
    }

    #[test]
    fn tiny_values_are_plain_decimal() {
        let s = SampledSignal::new(vec![1e-20, -3.5e-9], 4000.0).unwrap();
        let text = format_signal(&s);
        assert!(text.lines().skip(1).all(|l| !l.contains('e')));
        assert_eq!(parse_signal(&text, "mem").unwrap(), s);
    }

    #[test]
    fn signal_header_is_required() {
        assert!(parse_signal("1.0\n2.0\n", "mem").is_err());
    }

    #[test]
    fn frf_csv_round_trip_with_and_without_coherence() {
        let f = vec![0.0, 10.0, 20.0];
        let v = vec![Complex64::new(1.0, -0.5), Complex64::new(0.25, 2.0), Complex64::new(-1e-9, 0.0)];
        let with = FrequencyResponse::new(f.clone(), v.clone(), Some(vec![0.0, 0.5, 1.0]), 100.0).unwrap();
        assert_eq!(parse_frf(&format_frf(&with), 100.0, "mem").unwrap(), with);
        let without = FrequencyResponse::new(f, v, None, 100.0).unwrap();
        assert_eq!(parse_frf(&format_frf(&without), 100.0, "mem").unwrap(), without);
    }

    #[test]
    fn frf_non_increasing_frequency_names_column() {
        let text = "f_hz,re,im,coherence\n1,0,0,1\n1,0,0,1\n";
        let err = parse_frf(text, 100.0, "frf.csv").unwrap_err().to_string();
        assert!(err.contains("f_hz"), "{err}");
        assert!(err.contains("frf.csv"), "{err}");
    }

    #[test]
    fn tf_json_round_trip() {
        let tf = RationalTF::new(vec![0.1, 0.2], vec![1.0, -0.5], 4000.0).unwrap();
        assert_eq!(parse_tf(&format_tf(&tf), "mem").unwrap(), tf);
    }
}
