use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of points in ambient space `R^d`, tagged with the
/// intrinsic dimension `m` of the manifold they were drawn from.
///
/// Coordinates are stored row-major in a single buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    intrinsic_dim: usize,
    ambient_dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(intrinsic_dim: usize, ambient_dim: usize) -> Result<Self> {
        Self::from_flat(intrinsic_dim, ambient_dim, Vec::new())
    }

    pub fn with_capacity(intrinsic_dim: usize, ambient_dim: usize, n: usize) -> Result<Self> {
        let mut cloud = Self::new(intrinsic_dim, ambient_dim)?;
        cloud.coords.reserve(n * ambient_dim);
        Ok(cloud)
    }

    /// Builds a cloud from a row-major coordinate buffer.
    pub fn from_flat(intrinsic_dim: usize, ambient_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if intrinsic_dim == 0 || ambient_dim == 0 {
            return Err(Error::InvalidParameter(
                "dimensions must be positive".into(),
            ));
        }
        if intrinsic_dim > ambient_dim {
            return Err(Error::InvalidParameter(format!(
                "intrinsic dimension {intrinsic_dim} exceeds ambient dimension {ambient_dim}"
            )));
        }
        if coords.len() % ambient_dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                got: coords.len() % ambient_dim,
            });
        }
        Ok(Self {
            intrinsic_dim,
            ambient_dim,
            coords,
        })
    }

    pub fn from_points<P: AsRef<[f64]>>(
        intrinsic_dim: usize,
        ambient_dim: usize,
        points: &[P],
    ) -> Result<Self> {
        let mut cloud = Self::with_capacity(intrinsic_dim, ambient_dim, points.len())?;
        for p in points {
            cloud.push(p.as_ref())?;
        }
        Ok(cloud)
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: point.len(),
            });
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.ambient_dim;
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.ambient_dim)
    }

    /// Applies `f` to every point, producing a cloud with the same dimensions.
    pub fn map_points(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self
            .coords
            .chunks_exact(self.ambient_dim)
            .zip(coords.chunks_exact_mut(self.ambient_dim))
        {
            f(src, dst);
        }
        Self {
            intrinsic_dim: self.intrinsic_dim,
            ambient_dim: self.ambient_dim,
            coords,
        }
    }

    /// Dilation `y -> t * y`.
    pub fn scaled(&self, t: f64) -> Self {
        self.map_points(|src, dst| {
            for (a, b) in src.iter().zip(dst.iter_mut()) {
                *b = t * a;
            }
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.ambient_dim).map(|j| format!("x{j}")))?;
        for p in self.iter() {
            w.write_record(p.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format written by [`PointCloud::write_csv`]. The CSV
    /// carries no intrinsic dimension, so the caller supplies it.
    pub fn read_csv<R: Read>(reader: R, intrinsic_dim: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let d = headers.len();
        for (j, h) in headers.iter().enumerate() {
            if h.trim() != format!("x{j}") {
                return Err(Error::InvalidParameter(format!(
                    "unexpected CSV header {h:?} in column {j}"
                )));
            }
        }
        let mut cloud = Self::new(intrinsic_dim, d)?;
        let mut row = Vec::with_capacity(d);
        for record in r.records() {
            let record = record?;
            row.clear();
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidParameter(format!("not a number: {field:?}"))
                })?;
                row.push(v);
            }
            cloud.push(&row)?;
        }
        Ok(cloud)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CloudRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: CloudRecord = serde_json::from_str(s)?;
        rec.try_into()
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: impl AsRef<Path>, intrinsic_dim: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, intrinsic_dim)
    }
}

/// JSON form `{"m": .., "d": .., "points": [[..], ..]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CloudRecord {
    pub m: usize,
    pub d: usize,
    pub points: Vec<Vec<f64>>,
}

impl From<&PointCloud> for CloudRecord {
    fn from(c: &PointCloud) -> Self {
        CloudRecord {
            m: c.intrinsic_dim,
            d: c.ambient_dim,
            points: c.iter().map(|p| p.to_vec()).collect(),
        }
    }
}

impl TryFrom<CloudRecord> for PointCloud {
    type Error = Error;

    fn try_from(rec: CloudRecord) -> Result<Self> {
        PointCloud::from_points(rec.m, rec.d, &rec.points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let c = PointCloud::from_points(1, 2, &[[0.0, 1.5], [-2.0, 3.25]]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x0,x1\n0,1.5\n-2,3.25\n");
        let back = PointCloud::read_csv(text.as_bytes(), 1).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn json_shape() {
        let c = PointCloud::from_points(2, 3, &[[1.0, 0.0, 0.0]]).unwrap();
        let s = c.to_json().unwrap();
        assert_eq!(s, r#"{"m":2,"d":3,"points":[[1.0,0.0,0.0]]}"#);
        assert_eq!(PointCloud::from_json(&s).unwrap(), c);
    }

    #[test]
    fn rejects_ragged_points() {
        let err = PointCloud::from_json(r#"{"m":1,"d":2,"points":[[1.0]]}"#).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn rejects_m_above_d() {
        assert!(PointCloud::new(3, 2).is_err());
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = "a,b\n1,2\n";
        assert!(PointCloud::read_csv(text.as_bytes(), 1).is_err());
    }
}
