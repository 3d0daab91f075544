//! Correspondences between a source and a target point cloud, and the shared
//! plain-text file format (`x y z u v w` per line, `#` starts a comment line).

use std::io::{BufRead, Write};

use nalgebra::{Vector3, Vector6};

use crate::error::{Error, Result};

/// A matched pair of 3D points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: Vector3<f64>,
    pub target: Vector3<f64>,
}

impl Correspondence {
    pub fn new(source: Vector3<f64>, target: Vector3<f64>) -> Self {
        Self { source, target }
    }

    pub fn from_array(c: [f64; 6]) -> Self {
        Self { source: Vector3::new(c[0], c[1], c[2]), target: Vector3::new(c[3], c[4], c[5]) }
    }

    /// The correspondence as a single 6-vector `(x, y, z, u, v, w)`.
    pub fn as_vector6(&self) -> Vector6<f64> {
        Vector6::new(self.source.x, self.source.y, self.source.z, self.target.x, self.target.y, self.target.z)
    }

    pub fn is_finite(&self) -> bool {
        self.source.iter().chain(self.target.iter()).all(|v| v.is_finite())
    }
}

/// Ordered, non-empty set of correspondences. Node `i` of every graph built
/// from the set refers to `items()[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(items: Vec<Correspondence>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidInput("correspondence set is empty".into()));
        }
        if let Some(i) = items.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("correspondence {i} has a non-finite coordinate")));
        }
        Ok(Self { items })
    }

    pub fn from_arrays(rows: &[[f64; 6]]) -> Result<Self> {
        Self::new(rows.iter().copied().map(Correspondence::from_array).collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn get(&self, i: usize) -> &Correspondence {
        &self.items[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.items.iter()
    }

    /// Subset in the order given by `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.items[i]).collect())
    }

    /// Reads the shared text format.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut items = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut vals = [0.0f64; 6];
            let mut fields = trimmed.split_whitespace();
            for (k, slot) in vals.iter_mut().enumerate() {
                let tok = fields
                    .next()
                    .ok_or_else(|| Error::Parse { line: lineno + 1, msg: format!("expected 6 values, found {k}") })?;
                *slot = tok
                    .parse()
                    .map_err(|_| Error::Parse { line: lineno + 1, msg: format!("not a number: {tok:?}") })?;
            }
            if fields.next().is_some() {
                return Err(Error::Parse { line: lineno + 1, msg: "more than 6 values".into() });
            }
            let c = Correspondence::from_array(vals);
            if !c.is_finite() {
                return Err(Error::Parse { line: lineno + 1, msg: "non-finite coordinate".into() });
            }
            items.push(c);
        }
        Self::new(items)
    }

    pub fn read_path(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(f))
    }

    /// Writes the shared text format. `header` lines are emitted as `#` comments.
    pub fn write_text<W: Write>(&self, mut w: W, header: &[String]) -> Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        for c in &self.items {
            writeln!(w, "{} {} {} {} {} {}", c.source.x, c.source.y, c.source.z, c.target.x, c.target.y, c.target.z)?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a CorrespondenceSet {
    type Item = &'a Correspondence;
    type IntoIter = std::slice::Iter<'a, Correspondence>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
