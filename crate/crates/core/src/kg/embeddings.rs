use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::KgError;

/// Entity name to fixed-width real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    names: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(names: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self, KgError> {
        let dim = vectors.first().map_or(0, Vec::len);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(KgError::DimensionMismatch { line: i + 1, expected: dim, found: v.len() });
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(KgError::BadNumber { line: i + 1, value: x.to_string() });
            }
        }
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(EmbeddingTable { names, vectors, dim, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&[f64], KgError> {
        self.index
            .get(name)
            .map(|&i| self.vectors[i].as_slice())
            .ok_or_else(|| KgError::UnknownEntityAtLookup(name.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self, KgError> {
        let mut names = Vec::new();
        let mut vectors = Vec::new();
        let mut dim = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let name = cols.next().unwrap_or_default().trim().to_string();
            let values = cols
                .map(|c| match c.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(KgError::BadNumber { line: n + 1, value: c.to_string() }),
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected || values.is_empty() {
                return Err(KgError::DimensionMismatch { line: n + 1, expected, found: values.len() });
            }
            names.push(name);
            vectors.push(values);
        }
        Self::new(names, vectors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KgError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| KgError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    /// Shortest round-trip decimal form, so `parse(to_tsv())` is exact.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.names.iter().zip(&self.vectors) {
            out.push_str(name);
            for x in v {
                write!(out, "\t{x}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KgError> {
        fs::write(path.as_ref(), self.to_tsv()).map_err(|e| KgError::Io(e.to_string()))
    }
}
