use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};
use nalgebra::DMatrix;

use super::{class_indices, relabel_sorted, LabeledDataset};
use crate::error::{Error, Result};

/// Matrix-valued samples (images scaled to `[0, 1]`) with dense class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    images: Vec<DMatrix<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl ImageDataset {
    pub fn new(images: Vec<DMatrix<f64>>, labels: Vec<usize>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let first = images.first().ok_or(Error::EmptyInput)?.shape();
        if images.iter().any(|im| im.shape() != first) {
            return Err(Error::shape("images have mixed shapes"));
        }
        if images.iter().flat_map(|im| im.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite pixel value".into()));
        }
        // reuse the label validation of the vector container
        let probe = LabeledDataset::new(DMatrix::zeros(0, labels.len()), labels)?;
        Ok(Self {
            images,
            classes: probe.classes(),
            labels: probe.labels,
        })
    }

    pub fn images(&self) -> &[DMatrix<f64>] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `(h, w)` of every image.
    pub fn shape(&self) -> (usize, usize) {
        self.images[0].shape()
    }

    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        class_indices(&self.labels, self.classes)
    }

    /// Same contract as [`LabeledDataset::subset`].
    pub fn subset(&self, idx: &[usize]) -> Result<(ImageDataset, Vec<usize>)> {
        let images = idx.iter().map(|&i| self.images[i].clone()).collect();
        let orig: Vec<usize> = idx.iter().map(|&i| self.labels[i]).collect();
        let (labels, map) = relabel_sorted(&orig);
        Ok((ImageDataset::new(images, labels)?, map))
    }
}

/// Reads `label,f1,...,fm` rows into a column-per-sample dataset.
pub fn load_csv_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_dataset(&text)
}

pub(crate) fn parse_csv_dataset(text: &str) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut raw_labels = Vec::new();
    let mut columns: Vec<f64> = Vec::new();
    let mut width = None;
    for (row, record) in reader.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| Error::Format {
            row,
            msg: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let m = record.len() - 1;
        match width {
            None if m == 0 => {
                return Err(Error::Format {
                    row,
                    msg: "row has a label but no features".into(),
                })
            }
            None => width = Some(m),
            Some(w) if w != m => {
                return Err(Error::Format {
                    row,
                    msg: format!("expected {w} features, found {m}"),
                })
            }
            _ => {}
        }
        let parse_err = |field: usize, value: &str| Error::Parse {
            row,
            field,
            value: value.to_string(),
        };
        let label = &record[0];
        raw_labels.push(label.parse::<i64>().map_err(|_| parse_err(0, label))?);
        for (k, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| parse_err(k, field))?;
            if !v.is_finite() {
                return Err(parse_err(k, field));
            }
            columns.push(v);
        }
    }
    let m = width.ok_or(Error::EmptyInput)?;
    let features = DMatrix::from_column_slice(m, raw_labels.len(), &columns);
    LabeledDataset::from_raw_labels(features, &raw_labels)
}

/// Loads `root/<class>/<image>.pgm` into an [`ImageDataset`].
///
/// Classes are numbered by lexicographic directory order; files within a
/// class are read in lexicographic order. Pixels are scaled to `[0, 1]`.
pub fn load_image_tree(root: impl AsRef<Path>, resize: Option<(usize, usize)>) -> Result<ImageDataset> {
    let root = root.as_ref();
    let class_dirs = sorted_entries(root, |p| p.is_dir())?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (c, dir) in class_dirs.iter().enumerate() {
        for file in sorted_entries(dir, |p| p.is_file())? {
            let mut img = read_pgm(&file)?;
            if let Some((h, w)) = resize {
                img = resize_bilinear(&img, h, w);
            }
            images.push(img);
            labels.push(c + 1);
        }
    }
    if images.is_empty() {
        return Err(Error::EmptyInput);
    }
    let shape = images[0].shape();
    if let Some(bad) = images.iter().position(|im| im.shape() != shape) {
        return Err(Error::shape(format!(
            "image {} is {:?}, expected {:?}; set a resize target",
            bad,
            images[bad].shape(),
            shape
        )));
    }
    // a class directory without files leaves a gap in the labels
    let (labels, _) = relabel_sorted(&labels);
    ImageDataset::new(images, labels)
}

fn sorted_entries(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if !hidden && keep(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn read_pgm(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decode_err = |msg: String| Error::Decode {
        path: path.to_path_buf(),
        msg,
    };
    if !(bytes.starts_with(b"P2") || bytes.starts_with(b"P5")) {
        return Err(decode_err("not a P2/P5 PGM file".into()));
    }
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm)
        .map_err(|e| decode_err(e.to_string()))?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => return Err(decode_err(format!("unsupported pixel layout {:?}", other.color()))),
    };
    let (w, h) = gray.dimensions();
    Ok(DMatrix::from_fn(h as usize, w as usize, |r, c| {
        f64::from(gray.get_pixel(c as u32, r as u32)[0]) / 255.0
    }))
}

/// Bilinear resize with corner alignment: output corners sample the input
/// corners exactly.
pub fn resize_bilinear(src: &DMatrix<f64>, h: usize, w: usize) -> DMatrix<f64> {
    let (sh, sw) = src.shape();
    let scale = |out: usize, inp: usize| {
        if out > 1 {
            (inp - 1) as f64 / (out - 1) as f64
        } else {
            0.0
        }
    };
    let (ry, rx) = (scale(h, sh), scale(w, sw));
    DMatrix::from_fn(h, w, |i, j| {
        let y = i as f64 * ry;
        let x = j as f64 * rx;
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(sh - 1), (x0 + 1).min(sw - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let top = src[(y0, x0)] * (1.0 - fx) + src[(y0, x1)] * fx;
        let bottom = src[(y1, x0)] * (1.0 - fx) + src[(y1, x1)] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_two_rows() {
        let d = parse_csv_dataset("1,0,0\n2,1,1").unwrap();
        assert_eq!((d.dim(), d.len(), d.classes()), (2, 2, 2));
        assert_eq!(d.features().column(1).as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn csv_crlf_and_trailing_newline() {
        let d = parse_csv_dataset("5,1.5,2\r\n9,0,0\r\n5,3,4\r\n").unwrap();
        assert_eq!(d.labels(), &[1, 2, 1]);
        assert_eq!(d.features()[(1, 2)], 4.0);
    }

    #[test]
    fn csv_ragged_reports_row() {
        match parse_csv_dataset("1,0,0\n2,1\n") {
            Err(Error::Format { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_non_numeric() {
        assert!(matches!(
            parse_csv_dataset("1,0,x\n"),
            Err(Error::Parse { row: 1, field: 2, .. })
        ));
    }

    #[test]
    fn csv_empty() {
        assert!(matches!(parse_csv_dataset(""), Err(Error::EmptyInput)));
        assert!(matches!(parse_csv_dataset("\n\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn resize_keeps_corners() {
        let src = DMatrix::from_fn(112, 92, |r, c| ((r * 7 + c * 13) % 256) as f64 / 255.0);
        let out = resize_bilinear(&src, 32, 32);
        assert_eq!(out[(0, 0)], src[(0, 0)]);
        assert_eq!(out[(0, 31)], src[(0, 91)]);
        assert_eq!(out[(31, 0)], src[(111, 0)]);
        assert_eq!(out[(31, 31)], src[(111, 91)]);
    }

    #[test]
    fn resize_identity_when_same_shape() {
        let src = DMatrix::from_fn(5, 4, |r, c| (r * 4 + c) as f64);
        assert_eq!(resize_bilinear(&src, 5, 4), src);
    }
}
