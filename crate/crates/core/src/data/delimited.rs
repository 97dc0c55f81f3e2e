//! Comma-separated numeric text: one example per line, optionally a header
//! row and a leading integer label column.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, Normalization};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DelimitedOptions {
    pub has_header: bool,
    pub label_first: bool,
}

pub fn load_delimited(path: impl AsRef<Path>, opts: DelimitedOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "delimited".to_string());
    parse_delimited(File::open(path)?, opts, name)
}

pub(crate) fn parse_delimited<R: Read>(
    reader: R,
    opts: DelimitedOptions,
    name: String,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let offset = e.position().map(|p| p.byte()).unwrap_or(0);
            Error::format(offset, e.to_string())
        })?;
        let offset = record.position().map(|p| p.byte()).unwrap_or(0);
        let mut fields = record.iter();
        if opts.label_first {
            let raw = fields
                .next()
                .ok_or_else(|| Error::format(offset, "missing label column"))?;
            labels.push(
                raw.parse::<u32>()
                    .map_err(|_| Error::format(offset, format!("bad label {raw:?}")))?,
            );
        }
        let before = data.len();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(offset, format!("bad number {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(offset, format!("non-finite value {f:?}")));
            }
            data.push(v);
        }
        let w = data.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(Error::format(
                    offset,
                    format!("row has {w} values, expected {expected}"),
                ))
            }
            Some(_) => {}
        }
    }
    let d = width.unwrap_or(0);
    let n = data.len().checked_div(d).unwrap_or(labels.len());
    let x = Array2::from_shape_vec((n, d), data).map_err(|e| Error::invalid(e.to_string()))?;
    Dataset::new(
        x,
        opts.label_first.then_some(labels),
        name,
        Normalization::None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn header_and_labels() {
        let text = "label,a,b\n1, 0.5, 2\n0,-1,3e2\n";
        let d = parse_delimited(
            text.as_bytes(),
            DelimitedOptions {
                has_header: true,
                label_first: true,
            },
            "t".into(),
        )
        .unwrap();
        assert_eq!(d.x, array![[0.5, 2.0], [-1.0, 300.0]]);
        assert_eq!(d.labels, Some(vec![1, 0]));
    }

    #[test]
    fn plain_rows_and_errors() {
        let d = parse_delimited(
            "1,2\n3,4\n".as_bytes(),
            DelimitedOptions::default(),
            "t".into(),
        )
        .unwrap();
        assert_eq!(d.x, array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(d.labels.is_none());
        let err = parse_delimited(
            "1,2\n3,x\n".as_bytes(),
            DelimitedOptions::default(),
            "t".into(),
        );
        assert!(matches!(err, Err(Error::Format { offset: 4, .. })));
        let ragged = parse_delimited(
            "1,2\n3\n".as_bytes(),
            DelimitedOptions::default(),
            "t".into(),
        );
        assert!(ragged.is_err());
    }
}
