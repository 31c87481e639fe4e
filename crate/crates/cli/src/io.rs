//! Delimited-text matrix files and JSON reports.
//!
//! Matrix files are comma separated with a header row; lines starting with
//! `#` are comments. Reals are written with 17 significant digits so every
//! file round-trips bit for bit.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use classweight_core::{
    AccuracyMatrix, ClassSet, ClassifierSet, PredictionRecord, PredictionSet, SelectionVector, WeightMatrix,
};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Seconds since the Unix epoch, or `None` when stamps are suppressed.
pub fn timestamp(enabled: bool) -> Option<u64> {
    enabled.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    CliError::parse(path, line, message)
}

fn headers(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    let h = rdr.headers().map_err(|e| csv_error(path, e))?;
    Ok(h.iter().map(str::to_owned).collect())
}

fn records(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<(u64, Vec<String>)>> {
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            let line = r.position().map_or(0, |p| p.line());
            Ok((line, r.iter().map(str::to_owned).collect()))
        })
        .collect()
}

fn parse_real(path: &Path, line: u64, column: &str, text: &str) -> Result<f64> {
    text.parse::<f64>().map_err(|_| CliError::parse(path, line, format!("column `{column}`: `{text}` is not a number")))
}

fn create(path: &Path, stamp: Option<u64>) -> Result<BufWriter<File>> {
    let io_err = |source| CliError::Io { path: path.into(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    if let Some(t) = stamp {
        writeln!(out, "# generated_at_unix={t}").map_err(io_err)?;
    }
    Ok(out)
}

fn write_rows(path: &Path, stamp: Option<u64>, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let out = create(path, stamp)?;
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| CliError::Io { path: path.into(), source: io::Error::other(e.to_string()) };
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row).map_err(to_err)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.into(), source })
}

/// Header `classifier,<class1>,...`; one row per classifier.
pub fn read_accuracy_matrix(path: &Path) -> Result<AccuracyMatrix> {
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header.len() < 2 {
        return Err(CliError::parse(path, 1, "header needs a classifier column and at least one class"));
    }
    let classes =
        ClassSet::with_normal(header[1..].iter().cloned(), &[]).map_err(|e| CliError::parse(path, 1, e.to_string()))?;
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in records(path, &mut rdr)? {
        let mut row = Vec::with_capacity(rec.len() - 1);
        for (col, text) in rec.iter().enumerate().skip(1) {
            let value = parse_real(path, line, &header[col], text)?;
            if !(0.0..=1.0).contains(&value) {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("accuracy {value} for classifier `{}`, class `{}` is outside [0, 1]", rec[0], header[col]),
                ));
            }
            row.push(value);
        }
        names.push(rec[0].clone());
        rows.push(row);
    }
    let classifiers = ClassifierSet::new(names).map_err(|e| CliError::parse(path, 0, e.to_string()))?;
    Ok(AccuracyMatrix::new(classifiers, classes, &rows)?)
}

pub fn write_accuracy_matrix(v: &AccuracyMatrix, path: &Path, stamp: Option<u64>) -> Result<()> {
    let mut header = vec!["classifier".to_owned()];
    header.extend(v.classes().names().iter().cloned());
    let rows: Vec<Vec<String>> = v
        .rows()
        .iter()
        .zip(v.classifiers().names())
        .map(|(row, name)| std::iter::once(name.clone()).chain(row.iter().map(|&x| fmt_real(x))).collect())
        .collect();
    write_rows(path, stamp, &header, &rows)
}

/// Contents of a weight file.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub classifiers: ClassifierSet,
    pub classes: ClassSet,
    pub weights: WeightMatrix,
    pub selection: SelectionVector,
}

/// Accuracy-matrix header plus a trailing `selected` column.
pub fn write_weight_matrix(
    path: &Path,
    classifiers: &ClassifierSet,
    classes: &ClassSet,
    weights: &WeightMatrix,
    selection: &SelectionVector,
    stamp: Option<u64>,
) -> Result<()> {
    let mut header = vec!["classifier".to_owned()];
    header.extend(classes.names().iter().cloned());
    header.push("selected".to_owned());
    let rows: Vec<Vec<String>> = (0..weights.n())
        .map(|i| {
            std::iter::once(classifiers.names()[i].clone())
                .chain(weights.row(i).into_iter().map(fmt_real))
                .chain(std::iter::once(selection.is_selected(i).to_string()))
                .collect()
        })
        .collect();
    write_rows(path, stamp, &header, &rows)
}

pub fn read_weight_matrix(path: &Path) -> Result<WeightFile> {
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header.len() < 3 || header.last().map(String::as_str) != Some("selected") {
        return Err(CliError::parse(path, 1, "expected header `classifier,<classes...>,selected`"));
    }
    let m = header.len() - 2;
    let classes = ClassSet::with_normal(header[1..=m].iter().cloned(), &[])
        .map_err(|e| CliError::parse(path, 1, e.to_string()))?;
    let (mut names, mut rows, mut flags) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in records(path, &mut rdr)? {
        let mut row = Vec::with_capacity(m);
        for col in 1..=m {
            let value = parse_real(path, line, &header[col], &rec[col])?;
            if !value.is_finite() || value < 0.0 {
                return Err(CliError::parse(path, line, format!("weight {value} must be finite and >= 0")));
            }
            row.push(value);
        }
        let flag = match rec[m + 1].to_ascii_lowercase().as_str() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(CliError::parse(path, line, format!("selected flag `{other}` is not true/false"))),
        };
        names.push(rec[0].clone());
        rows.push(row);
        flags.push(flag);
    }
    let classifiers = ClassifierSet::new(names).map_err(|e| CliError::parse(path, 0, e.to_string()))?;
    let weights = WeightMatrix::from_rows(&rows).map_err(|e| CliError::parse(path, 0, e.to_string()))?;
    Ok(WeightFile { classifiers, classes, weights, selection: SelectionVector::new(flags) })
}

fn class_index(path: &Path, line: u64, classes: &ClassSet, name: &str) -> Result<usize> {
    classes.index_of(name).ok_or_else(|| CliError::parse(path, line, format!("unknown class `{name}`")))
}

/// Reads `instance_id,true_class,...` where the remaining columns are either
/// n·m soft scores named `<classifier>:<class>` or n hard labels named after
/// the classifiers (expanded to one-hot scores).
pub fn read_predictions(path: &Path, classifiers: &ClassifierSet, classes: &ClassSet) -> Result<PredictionSet> {
    let (n, m) = (classifiers.len(), classes.len());
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header.len() < 3 || header[0] != "instance_id" || header[1] != "true_class" {
        return Err(CliError::parse(path, 1, "header must start with `instance_id,true_class`"));
    }
    let soft = header[2..].iter().all(|h| h.contains(':'));

    // Target slot of every score column.
    let mut slots = Vec::with_capacity(header.len() - 2);
    let mut seen = vec![false; if soft { n * m } else { n }];
    for (col, h) in header.iter().enumerate().skip(2) {
        let slot = if soft {
            let (clf, class) = h.split_once(':').expect("soft header");
            let i = classifiers.index_of(clf);
            let j = classes.index_of(class);
            match (i, j) {
                (Some(i), Some(j)) => i * m + j,
                _ => {
                    return Err(CliError::parse(
                        path,
                        1,
                        format!("column {} `{h}` names an unknown classifier or class", col + 1),
                    ))
                }
            }
        } else {
            classifiers.index_of(h).ok_or_else(|| {
                CliError::parse(path, 1, format!("column {} `{h}` is not a known classifier", col + 1))
            })?
        };
        if std::mem::replace(&mut seen[slot], true) {
            return Err(CliError::parse(path, 1, format!("column {} `{h}` is repeated", col + 1)));
        }
        slots.push(slot);
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        let what = if soft {
            format!("{}:{}", classifiers.names()[missing / m], classes.names()[missing % m])
        } else {
            classifiers.names()[missing].clone()
        };
        return Err(CliError::parse(path, 1, format!("missing score column `{what}`")));
    }

    let mut out = Vec::new();
    for (line, rec) in records(path, &mut rdr)? {
        let truth = class_index(path, line, classes, &rec[1])?;
        let mut scores = vec![0.0; n * m];
        for (k, &slot) in slots.iter().enumerate() {
            let text = &rec[k + 2];
            if soft {
                let s = parse_real(path, line, &header[k + 2], text)?;
                if !s.is_finite() || s < 0.0 {
                    return Err(CliError::parse(
                        path,
                        line,
                        format!("score {s} in `{}` must be finite and >= 0", header[k + 2]),
                    ));
                }
                scores[slot] = s;
            } else {
                scores[slot * m + class_index(path, line, classes, text)?] = 1.0;
            }
        }
        out.push(PredictionRecord { instance_id: rec[0].clone(), true_class: truth, scores });
    }
    Ok(PredictionSet::new(n, m, out)?)
}

/// Soft-score predictions file.
pub fn write_predictions(
    path: &Path,
    preds: &PredictionSet,
    classifiers: &ClassifierSet,
    classes: &ClassSet,
    stamp: Option<u64>,
) -> Result<()> {
    let mut header = vec!["instance_id".to_owned(), "true_class".to_owned()];
    for c in classifiers.names() {
        header.extend(classes.names().iter().map(|k| format!("{c}:{k}")));
    }
    let rows: Vec<Vec<String>> = preds
        .instances()
        .iter()
        .map(|r| {
            [r.instance_id.clone(), classes.names()[r.true_class].clone()]
                .into_iter()
                .chain(r.scores.iter().map(|&s| fmt_real(s)))
                .collect()
        })
        .collect();
    write_rows(path, stamp, &header, &rows)
}

/// Instance labels with class indices into `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFile {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub classes: ClassSet,
}

/// Reads `instance_id,class`. Classes are ordered as given in `order`, or by
/// first appearance when `order` is empty.
pub fn read_labels(path: &Path, order: &[String]) -> Result<LabelFile> {
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header != ["instance_id", "class"] {
        return Err(CliError::parse(path, 1, "expected header `instance_id,class`"));
    }
    let rows = records(path, &mut rdr)?;
    let mut names: Vec<String> = order.to_vec();
    if names.is_empty() {
        for (_, rec) in &rows {
            if !names.contains(&rec[1]) {
                names.push(rec[1].clone());
            }
        }
    }
    if names.is_empty() {
        return Err(CliError::parse(path, 1, "no labelled instances"));
    }
    let classes = ClassSet::with_normal(names, &[]).map_err(|e| CliError::config(e.to_string()))?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        labels.push(class_index(path, line, &classes, &rec[1])?);
        ids.push(rec[0].clone());
    }
    Ok(LabelFile { ids, labels, classes })
}

/// Resampled instances as `index,instance_id,class`.
pub fn write_indices(path: &Path, indices: &[usize], labels: &LabelFile, stamp: Option<u64>) -> Result<()> {
    let header = ["index", "instance_id", "class"].map(str::to_owned);
    let rows: Vec<Vec<String>> = indices
        .iter()
        .map(|&i| vec![i.to_string(), labels.ids[i].clone(), labels.classes.names()[labels.labels[i]].clone()])
        .collect();
    write_rows(path, stamp, &header, &rows)
}

/// Improvement tables and other plain string tables.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>], stamp: Option<u64>) -> Result<()> {
    write_rows(path, stamp, header, rows)
}

#[derive(Serialize)]
struct Document<'a, T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with an optional leading `generated_at_unix` field; `None`
/// writes to standard output.
pub fn write_json<T: Serialize>(path: Option<&Path>, body: &T, stamp: Option<u64>) -> Result<()> {
    let doc = Document { generated_at_unix: stamp, body };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::config(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => {
            let mut out = create(p, None)?;
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: p.into(), source })
        }
        None => {
            io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}
