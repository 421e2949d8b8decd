//! Binary fingerprint sets and their CSV format:
//! `id,bit_0,...,bit_{B-1}[,value]`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintSet {
    pub vectors: Vec<Vec<u8>>,
    pub identifiers: Vec<String>,
    pub values: Option<Vec<f64>>,
    index: HashMap<Vec<u8>, usize>,
}

impl FingerprintSet {
    pub fn new(vectors: Vec<Vec<u8>>, identifiers: Vec<String>, values: Option<Vec<f64>>) -> Result<Self> {
        if vectors.len() != identifiers.len() || values.as_ref().is_some_and(|v| v.len() != vectors.len()) {
            return Err(Error::Data("fingerprint columns have different lengths".into()));
        }
        let bits = vectors.first().map_or(0, Vec::len);
        let mut index = HashMap::with_capacity(vectors.len());
        for (row, v) in vectors.iter().enumerate() {
            if v.len() != bits {
                return Err(Error::Data(format!("row {row}: {} bits, expected {bits}", v.len())));
            }
            if v.iter().any(|&b| b > 1) {
                return Err(Error::Data(format!("row {row}: entries must be 0 or 1")));
            }
            index.entry(v.clone()).or_insert(row);
        }
        Ok(Self {
            vectors,
            identifiers,
            values,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.vectors[i].iter().map(|&b| f64::from(b)).collect()
    }

    /// Row whose bits equal `x` (entries compared after rounding).
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let key: Vec<u8> = x.iter().map(|&v| u8::from(v >= 0.5)).collect();
        self.index.get(&key).copied()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.bits()).map(|i| format!("bit_{i}")));
        if self.values.is_some() {
            header.push("value".into());
        }
        w.write_record(&header)?;
        for (i, v) in self.vectors.iter().enumerate() {
            let mut rec = vec![self.identifiers[i].clone()];
            rec.extend(v.iter().map(u8::to_string));
            if let Some(vals) = &self.values {
                rec.push(format!("{:?}", vals[i]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let header = reader.headers()?.clone();
        if header.get(0).map(str::trim) != Some("id") {
            return Err(Error::Data("header must start with `id`".into()));
        }
        let has_value = header.iter().last().map(str::trim) == Some("value");
        let bits = header.len() - 1 - usize::from(has_value);
        for (i, name) in header.iter().skip(1).take(bits).enumerate() {
            if name.trim() != format!("bit_{i}") {
                return Err(Error::Data(format!("header column {} should be `bit_{i}`, found `{name}`", i + 1)));
            }
        }

        let mut vectors = Vec::new();
        let mut identifiers = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Data(format!(
                    "row {row}: {} fields, header has {}",
                    rec.len(),
                    header.len()
                )));
            }
            let id = rec[0].trim();
            if id.is_empty() {
                return Err(Error::Data(format!("row {row}: missing identifier")));
            }
            let mut v = Vec::with_capacity(bits);
            for field in rec.iter().skip(1).take(bits) {
                match field.trim() {
                    "0" => v.push(0),
                    "1" => v.push(1),
                    other => {
                        return Err(Error::Data(format!("row {row} ({id}): bit `{other}` is not 0 or 1")));
                    }
                }
            }
            if has_value {
                let raw = rec[bits + 1].trim();
                let val: f64 = raw
                    .parse()
                    .map_err(|_| Error::Data(format!("row {row} ({id}): value `{raw}` is not a number")))?;
                values.push(val);
            }
            identifiers.push(id.to_string());
            vectors.push(v);
        }
        Self::new(vectors, identifiers, has_value.then_some(values))
    }
}

pub fn load_fingerprints(path: impl AsRef<Path>) -> Result<FingerprintSet> {
    FingerprintSet::read_csv(std::fs::File::open(path)?)
}

/// Random fingerprints with bit density `density`. Values are the negated
/// Tanimoto similarity to a hidden random target, so lower is better.
pub fn synthetic_fingerprints<R: Rng + ?Sized>(n: usize, bits: usize, density: f64, rng: &mut R) -> FingerprintSet {
    let draw = |rng: &mut R| -> Vec<u8> { (0..bits).map(|_| u8::from(rng.random_bool(density))).collect() };
    let target = draw(rng);
    let mut seen = std::collections::HashSet::new();
    let mut vectors = Vec::with_capacity(n);
    while vectors.len() < n {
        let v = draw(rng);
        if seen.insert(v.clone()) {
            vectors.push(v);
        }
    }
    let values = vectors
        .iter()
        .map(|v| {
            let inter = v.iter().zip(&target).filter(|(a, b)| **a == 1 && **b == 1).count() as f64;
            let na = v.iter().filter(|&&b| b == 1).count() as f64;
            let nb = target.iter().filter(|&&b| b == 1).count() as f64;
            let denom = na + nb - inter;
            -(if denom > 0.0 { inter / denom } else { 0.0 })
        })
        .collect();
    let identifiers = (0..n).map(|i| format!("mol{i:05}")).collect();
    FingerprintSet::new(vectors, identifiers, Some(values)).expect("synthetic set is well formed")
}
