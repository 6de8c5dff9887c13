//! Reading and writing feature matrices, labels, dataset manifests and reports.
//!
//! Arrays use the NPY v1.0 format (little-endian, C order) or headerless CSV,
//! chosen by file extension.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, EpisodeData};
use crate::episodes::{EvalReport, SweepPoint};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

const NPY_MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I32(Vec<i32>),
    I64(Vec<i64>),
}

impl NpyData {
    fn len(&self) -> usize {
        match self {
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
            NpyData::I32(v) => v.len(),
            NpyData::I64(v) => v.len(),
        }
    }

    fn descr(&self) -> &'static str {
        match self {
            NpyData::F32(_) => "<f4",
            NpyData::F64(_) => "<f8",
            NpyData::I32(_) => "<i4",
            NpyData::I64(_) => "<i8",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

fn header_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let needle = format!("'{key}'");
    let start = header.find(&needle)? + needle.len();
    let rest = header[start..].trim_start().strip_prefix(':')?.trim_start();
    Some(rest)
}

fn parse_header(path: &Path, header: &str) -> Result<(String, bool, Vec<usize>)> {
    let fmt_err = |m: &str| Error::format(path, m);
    let descr = header_value(header, "descr")
        .and_then(|r| {
            let q = r.chars().next()?;
            let body = &r[1..];
            Some(body[..body.find(q)?].to_string())
        })
        .ok_or_else(|| fmt_err("header lacks 'descr'"))?;
    let fortran = header_value(header, "fortran_order").ok_or_else(|| fmt_err("header lacks 'fortran_order'"))?;
    let fortran = if fortran.starts_with("True") {
        true
    } else if fortran.starts_with("False") {
        false
    } else {
        return Err(fmt_err("unreadable 'fortran_order'"));
    };
    let shape_src = header_value(header, "shape")
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.find(')').map(|e| &r[..e]))
        .ok_or_else(|| fmt_err("header lacks 'shape'"))?;
    let shape = shape_src
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_end_matches('L').parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| fmt_err("unreadable 'shape'"))?;
    Ok((descr, fortran, shape))
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_npy(path, &bytes)
}

fn parse_npy(path: &Path, bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err(Error::format(path, "missing NPY magic bytes"));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::format(
            path,
            format!("unsupported NPY version {}.{}", bytes[6], bytes[7]),
        ));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body_start = 10 + header_len;
    if bytes.len() < body_start {
        return Err(Error::format(path, "truncated header"));
    }
    let header = std::str::from_utf8(&bytes[10..body_start])
        .map_err(|_| Error::format(path, "header is not ASCII"))?;
    let (descr, fortran, shape) = parse_header(path, header)?;
    if fortran {
        return Err(Error::UnsupportedLayout {
            path: path.to_path_buf(),
            msg: "Fortran-order arrays are not supported".into(),
        });
    }
    let count: usize = shape.iter().product();
    let body = &bytes[body_start..];
    let width = match descr.as_str() {
        "<f4" | "<i4" => 4,
        "<f8" | "<i8" => 8,
        other => {
            return Err(Error::format(path, format!("unsupported dtype '{other}'")));
        }
    };
    if body.len() != count * width {
        return Err(Error::format(
            path,
            format!("expected {} data bytes, found {}", count * width, body.len()),
        ));
    }
    let chunks4 = || body.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
    let chunks8 = || {
        body.chunks_exact(8)
            .map(|c| [c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
    };
    let data = match descr.as_str() {
        "<f4" => NpyData::F32(chunks4().map(f32::from_le_bytes).collect()),
        "<i4" => NpyData::I32(chunks4().map(i32::from_le_bytes).collect()),
        "<f8" => NpyData::F64(chunks8().map(f64::from_le_bytes).collect()),
        _ => NpyData::I64(chunks8().map(i64::from_le_bytes).collect()),
    };
    Ok(NpyArray { shape, data })
}

/// Serializes as NPY v1.0, padding the header so the data starts on a
/// 64-byte boundary.
pub fn npy_bytes(shape: &[usize], data: &NpyData) -> Result<Vec<u8>> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::Shape(format!(
            "shape {shape:?} does not hold {} values",
            data.len()
        )));
    }
    let shape_txt = match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        data.descr(),
        shape_txt
    );
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + data.len() * 8);
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match data {
        NpyData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(out)
}

pub fn write_npy(path: impl AsRef<Path>, shape: &[usize], data: &NpyData) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, npy_bytes(shape, data)?).map_err(|e| Error::io(path, e))
}

fn is_npy(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("npy"))
}

fn read_csv_records(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(out)
}

/// Loads an `n x d` feature matrix from `.npy` (float32 or float64) or headerless CSV.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    if is_npy(path) {
        let arr = read_npy(path)?;
        if arr.shape.len() != 2 {
            return Err(Error::Shape(format!(
                "{}: features must be 2-D, found shape {:?}",
                path.display(),
                arr.shape
            )));
        }
        let values = match arr.data {
            NpyData::F32(v) => v.into_iter().map(f64::from).collect(),
            NpyData::F64(v) => v,
            _ => return Err(Error::format(path, "features must be float32 or float64")),
        };
        return FeatureMatrix::new(arr.shape[0], arr.shape[1], values);
    }
    let records = read_csv_records(path)?;
    let rows = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_rows(&rows)
}

fn to_label(path: &Path, v: i64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::format(path, format!("negative label {v}")))
}

/// Loads a 1-D integer label vector from `.npy` (int64 or int32) or a one-column CSV.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    if is_npy(path) {
        let arr = read_npy(path)?;
        if arr.shape.len() != 1 {
            return Err(Error::Shape(format!(
                "{}: labels must be 1-D, found shape {:?}",
                path.display(),
                arr.shape
            )));
        }
        return match arr.data {
            NpyData::I64(v) => v.into_iter().map(|x| to_label(path, x)).collect(),
            NpyData::I32(v) => v.into_iter().map(|x| to_label(path, x.into())).collect(),
            _ => Err(Error::format(path, "labels must be int64 or int32")),
        };
    }
    read_csv_records(path)?
        .into_iter()
        .flatten()
        .map(|s| {
            let v: i64 = s
                .parse()
                .map_err(|e| Error::format(path, format!("bad label '{s}': {e}")))?;
            to_label(path, v)
        })
        .collect()
}

/// Writes float64 NPY, or CSV when the extension is not `.npy`.
pub fn save_features(path: impl AsRef<Path>, features: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    if is_npy(path) {
        return write_npy(
            path,
            &[features.rows(), features.cols()],
            &NpyData::F64(features.as_slice().to_vec()),
        );
    }
    let mut out = String::new();
    for r in features.iter_rows() {
        let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes int64 NPY, or one label per line when the extension is not `.npy`.
pub fn save_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    if is_npy(path) {
        return write_npy(
            path,
            &[labels.len()],
            &NpyData::I64(labels.iter().map(|&l| l as i64).collect()),
        );
    }
    let out: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One split of a dataset manifest. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Manifest {
    Single(SplitEntry),
    Splits(Vec<SplitEntry>),
}

impl Manifest {
    pub fn entries(&self) -> &[SplitEntry] {
        match self {
            Manifest::Single(e) => std::slice::from_ref(e),
            Manifest::Splits(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub train: Option<Dataset>,
    pub test: Option<Dataset>,
    pub class_names: Option<Vec<String>>,
}

impl LoadedDataset {
    /// With both splits, episodes come from `test` and the pool from `train`;
    /// with one split, that split serves both roles.
    pub fn into_episode_data(self) -> Result<EpisodeData> {
        match (self.test, self.train) {
            (Some(test), Some(train)) => EpisodeData::with_unlabeled(test, train),
            (Some(only), None) | (None, Some(only)) => Ok(EpisodeData::single_split(only)),
            (None, None) => Err(Error::EmptySet("manifest names no splits".into())),
        }
    }

    /// The training split if present, else the test split.
    pub fn analysis_split(&self) -> Option<&Dataset> {
        self.train.as_ref().or(self.test.as_ref())
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<LoadedDataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let mut loaded = LoadedDataset {
        train: None,
        test: None,
        class_names: None,
    };
    for entry in manifest.entries() {
        let features = load_features(base.join(&entry.features))?;
        let labels = load_labels(base.join(&entry.labels))?;
        if features.rows() != labels.len() {
            return Err(Error::Consistency(format!(
                "{}: {} feature rows but {} labels",
                manifest_path.display(),
                features.rows(),
                labels.len()
            )));
        }
        let slot = match entry.split {
            Split::Train => &mut loaded.train,
            Split::Test => &mut loaded.test,
        };
        if slot.is_some() {
            return Err(Error::Consistency(format!(
                "{}: split {:?} listed twice",
                manifest_path.display(),
                entry.split
            )));
        }
        *slot = Some(Dataset::new(features, labels)?);
        if let Some(names) = &entry.class_names {
            let p = base.join(names);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            loaded.class_names = Some(serde_json::from_str(&text)?);
        }
    }
    if let (Some(a), Some(b)) = (&loaded.train, &loaded.test) {
        if a.dim() != b.dim() {
            return Err(Error::Consistency(format!(
                "train and test feature dimensions differ ({} vs {})",
                a.dim(),
                b.dim()
            )));
        }
    }
    Ok(loaded)
}

/// On-disk report. Everything under `report` is a pure function of the inputs;
/// `timestamp` is the only run-dependent field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub report: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamp {
    pub unix_seconds: u64,
}

impl Timestamp {
    pub fn now() -> Self {
        Self {
            unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>.json` and `<stem>_accuracies.csv` into `dir`; returns both paths.
pub fn write_report(
    report: &EvalReport,
    dataset: Option<&str>,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = ReportFile {
        report: report.clone(),
        dataset: dataset.map(str::to_owned),
        timestamp: Timestamp::now(),
    };
    let json_path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    write_text(&json_path, &text)?;

    let csv_path = dir.join(format!("{stem}_accuracies.csv"));
    let mut csv = String::from("task,accuracy\n");
    for (i, a) in report.accuracies.iter().enumerate() {
        csv.push_str(&format!("{i},{a:?}\n"));
    }
    write_text(&csv_path, &csv)?;
    Ok((json_path, csv_path))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `extra_labels,mean,se` rows.
pub fn write_sweep_csv(points: &[SweepPoint], path: impl AsRef<Path>) -> Result<()> {
    let mut csv = String::from("extra_labels,mean,se\n");
    for p in points {
        csv.push_str(&format!("{},{:?},{:?}\n", p.extra_labels, p.mean, p.se));
    }
    write_text(path.as_ref(), &csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_npy_f64() -> Vec<u8> {
        // header: magic, v1.0, len, dict padded to 64 bytes total prefix
        let dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }";
        let mut header = dict.to_string();
        while !(10 + header.len() + 1).is_multiple_of(64) {
            header.push(' ');
        }
        header.push('\n');
        let mut b = b"\x93NUMPY\x01\x00".to_vec();
        b.extend_from_slice(&(header.len() as u16).to_le_bytes());
        b.extend_from_slice(header.as_bytes());
        for v in [1.5f64, -2.25, 0.1, 1e300] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn hand_built_float64_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.npy");
        fs::write(&p, hand_npy_f64()).unwrap();
        let m = load_features(&p).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.as_slice(), &[1.5, -2.25, 0.1, 1e300]);
        // our writer produces the same bytes
        assert_eq!(
            npy_bytes(&[2, 2], &NpyData::F64(vec![1.5, -2.25, 0.1, 1e300])).unwrap(),
            hand_npy_f64()
        );
    }

    #[test]
    fn float32_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.npy");
        let vals = vec![0.1f32, 2.5, -3.75, 1e-7, 4.0, 6.5];
        write_npy(&p, &[2, 3], &NpyData::F32(vals.clone())).unwrap();
        let m = load_features(&p).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        for (a, b) in m.as_slice().iter().zip(&vals) {
            assert_eq!(*a as f32, *b);
        }
    }

    #[test]
    fn csv_literal() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        fs::write(&p, "1.0,2.0\n3.0,4.0").unwrap();
        let m = load_features(&p).unwrap();
        assert_eq!(m, FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
    }

    #[test]
    fn bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.npy");
        fs::write(&p, b"NOTNUMPY0000").unwrap();
        assert!(matches!(load_features(&p), Err(Error::Format { .. })));

        let mut v2 = hand_npy_f64();
        v2[6] = 2;
        fs::write(&p, &v2).unwrap();
        assert!(matches!(load_features(&p), Err(Error::Format { .. })));

        let mut b = hand_npy_f64();
        let pos = b.windows(5).position(|w| w == b"False").unwrap();
        b[pos..pos + 5].copy_from_slice(b"True ");
        fs::write(&p, &b).unwrap();
        assert!(matches!(load_features(&p), Err(Error::UnsupportedLayout { .. })));

        write_npy(&p, &[4], &NpyData::F64(vec![1.0; 4])).unwrap();
        assert!(matches!(load_features(&p), Err(Error::Shape(_))));

        write_npy(&p, &[2], &NpyData::I64(vec![0, -1])).unwrap();
        assert!(matches!(load_labels(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["l.npy", "l.csv"] {
            let p = dir.path().join(name);
            save_labels(&p, &[0, 0, 3, 1]).unwrap();
            assert_eq!(load_labels(&p).unwrap(), vec![0, 0, 3, 1]);
        }
    }

    #[test]
    fn manifest_mismatch_is_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        save_features(dir.path().join("f.npy"), &FeatureMatrix::zeros(3, 2)).unwrap();
        save_labels(dir.path().join("l.npy"), &[0, 1]).unwrap();
        fs::write(
            dir.path().join("m.json"),
            r#"{"features": "f.npy", "labels": "l.npy", "split": "train"}"#,
        )
        .unwrap();
        assert!(matches!(
            load_dataset(dir.path().join("m.json")),
            Err(Error::Consistency(_))
        ));
    }
}
