//! Datasets: loaders, synthetic generators and the binary container.

mod delimited;
mod idx;
mod synthetic;

pub use delimited::{load_delimited, DelimitedOptions};
pub use idx::{load_idx, read_idx_images, read_idx_labels};
pub use synthetic::{gen_blobs, gen_circle, gen_rotation_manifold};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use ndarray::{Array2, Axis};

use crate::binio::{checked_len, write_f64s, write_string, OffsetReader};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MAXOUTDS";
const FORMAT_VERSION: u16 = 1;
const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    None,
    /// Every row has unit Euclidean norm.
    UnitSphere,
    /// Raw 8-bit intensities divided by 255.
    Scale255,
}

impl Normalization {
    fn code(self) -> u8 {
        match self {
            Normalization::None => 0,
            Normalization::UnitSphere => 1,
            Normalization::Scale255 => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Normalization::None),
            1 => Some(Normalization::UnitSphere),
            2 => Some(Normalization::Scale255),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::UnitSphere => "unit_sphere",
            Normalization::Scale255 => "scale_255",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `N × d`, row per example.
    pub x: Array2<f64>,
    pub labels: Option<Vec<u32>>,
    pub name: String,
    pub normalization: Normalization,
}

impl Dataset {
    /// Builds a dataset, checking finiteness, label count and, for
    /// [`Normalization::UnitSphere`], row norms.
    pub fn new(
        x: Array2<f64>,
        labels: Option<Vec<u32>>,
        name: impl Into<String>,
        normalization: Normalization,
    ) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset entries must be finite"));
        }
        if let Some(l) = &labels {
            if l.len() != x.nrows() {
                return Err(Error::invalid(format!(
                    "{} labels for {} rows",
                    l.len(),
                    x.nrows()
                )));
            }
        }
        if normalization == Normalization::UnitSphere {
            for (i, row) in x.rows().into_iter().enumerate() {
                let n = row.dot(&row).sqrt();
                if (n - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(Error::invalid(format!("row {i} has norm {n}, expected 1")));
                }
            }
        }
        Ok(Self {
            x,
            labels,
            name: name.into(),
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rescales every row to unit norm. Zero rows are rejected.
    pub fn normalized_to_sphere(&self) -> Result<Self> {
        let mut x = self.x.clone();
        for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
            let n = row.dot(&row).sqrt();
            if n == 0.0 {
                return Err(Error::invalid(format!(
                    "row {i} is zero and cannot be normalized"
                )));
            }
            row.mapv_inplace(|v| v / n);
        }
        Dataset::new(
            x,
            self.labels.clone(),
            self.name.clone(),
            Normalization::UnitSphere,
        )
    }

    /// Rows `range` as a new dataset.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            x: self.x.slice(ndarray::s![range.clone(), ..]).to_owned(),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
            name: self.name.clone(),
            normalization: self.normalization,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.x.nrows() as u64)?;
        w.write_u64::<LittleEndian>(self.x.ncols() as u64)?;
        w.write_u8(self.normalization.code())?;
        write_string(&mut w, &self.name)?;
        let x = self.x.as_standard_layout();
        write_f64s(&mut w, x.as_slice().expect("standard layout"))?;
        match &self.labels {
            Some(l) => {
                w.write_u8(1)?;
                for v in l {
                    w.write_u32::<LittleEndian>(*v)?;
                }
            }
            None => w.write_u8(0)?,
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = OffsetReader::new(r);
        r.expect_magic(MAGIC)?;
        r.expect_version(FORMAT_VERSION)?;
        let at = r.offset();
        let n = r.u64("N")?;
        let d = r.u64("d")?;
        let len = checked_len(&[n, d], at)?;
        let at = r.offset();
        let normalization = Normalization::from_code(r.u8("normalization")?)
            .ok_or_else(|| Error::format(at, "unknown normalization"))?;
        let name = r.string("name")?;
        let x_at = r.offset();
        let x = Array2::from_shape_vec((n as usize, d as usize), r.f64_vec(len, "data")?)
            .map_err(|e| Error::format(x_at, e.to_string()))?;
        let at = r.offset();
        let labels = match r.u8("label flag")? {
            0 => None,
            1 => Some((0..n).map(|_| r.u32("label")).collect::<Result<Vec<_>>>()?),
            _ => return Err(Error::format(at, "bad label flag")),
        };
        r.expect_end()?;
        Dataset::new(x, labels, name, normalization).map_err(|e| Error::format(x_at, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn validation() {
        assert!(Dataset::new(array![[f64::NAN]], None, "x", Normalization::None).is_err());
        assert!(Dataset::new(
            array![[1.0], [2.0]],
            Some(vec![0]),
            "x",
            Normalization::None
        )
        .is_err());
        assert!(Dataset::new(array![[2.0, 0.0]], None, "x", Normalization::UnitSphere).is_err());
        let d = Dataset::new(array![[3.0, 4.0]], None, "x", Normalization::None).unwrap();
        let u = d.normalized_to_sphere().unwrap();
        assert_eq!(u.x, array![[0.6, 0.8]]);
        assert_eq!(u.normalization, Normalization::UnitSphere);
        let z = Dataset::new(array![[0.0, 0.0]], None, "x", Normalization::None).unwrap();
        assert!(z.normalized_to_sphere().is_err());
    }

    #[test]
    fn container_rejects_corruption() {
        let d = Dataset::new(array![[1.0, 2.0]], Some(vec![3]), "t", Normalization::None).unwrap();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"MAXOUTDS");
        assert_eq!(Dataset::read_from(&buf[..]).unwrap(), d);
        let mut bad = buf.clone();
        bad[3] = 0;
        assert!(matches!(
            Dataset::read_from(&bad[..]),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(Dataset::read_from(&buf[..buf.len() - 2]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(Dataset::read_from(&extra[..]).is_err());
    }
}
