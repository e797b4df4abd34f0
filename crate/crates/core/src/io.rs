//! File formats: measures and datasets (JSON), distance and kernel matrices
//! (CSV), persistence diagrams (text) and tree ensembles (JSON).

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::build::TreeEnsemble;
use crate::datagen::LabeledCloud;
use crate::measures::{DiscreteMeasure, PersistenceDiagram};
use crate::{Error, Point, Result};

/// One atom of the measure file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

pub fn measure_to_atoms(m: &DiscreteMeasure) -> Vec<Atom> {
    m.iter()
        .map(|(p, w)| Atom {
            point: p.clone(),
            weight: w,
        })
        .collect()
}

pub fn measure_from_atoms(atoms: Vec<Atom>) -> Result<DiscreteMeasure> {
    let weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
    DiscreteMeasure::new(atoms.into_iter().map(|a| a.point).collect(), &weights)
}

/// A dataset file: either arrays of atoms or labeled point clouds (each
/// cloud read as a uniform measure).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DatasetFile {
    Atoms(Vec<Vec<Atom>>),
    Clouds(Vec<LabeledCloud>),
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

pub fn parse_dataset(text: &str) -> Result<Vec<DiscreteMeasure>> {
    match serde_json::from_str::<DatasetFile>(text)? {
        DatasetFile::Atoms(sets) => sets.into_iter().map(measure_from_atoms).collect(),
        DatasetFile::Clouds(clouds) => clouds
            .into_iter()
            .map(|c| DiscreteMeasure::uniform(c.points))
            .collect(),
    }
}

pub fn read_dataset(path: &Path) -> Result<Vec<DiscreteMeasure>> {
    let text = read_file(path)?;
    parse_dataset(&text).map_err(|e| match e {
        Error::Json(e) => json_error(path, e),
        other => other,
    })
}

pub fn dataset_to_json(measures: &[DiscreteMeasure]) -> Result<String> {
    let sets: Vec<Vec<Atom>> = measures.iter().map(measure_to_atoms).collect();
    Ok(serde_json::to_string(&sets)?)
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let atoms: Vec<Atom> = serde_json::from_str(&read_file(path)?).map_err(|e| json_error(path, e))?;
    measure_from_atoms(atoms)
}

pub fn clouds_to_json(clouds: &[LabeledCloud]) -> Result<String> {
    Ok(serde_json::to_string(clouds)?)
}

pub fn read_clouds(path: &Path) -> Result<Vec<LabeledCloud>> {
    serde_json::from_str(&read_file(path)?).map_err(|e| json_error(path, e))
}

pub fn read_ensemble(path: &Path) -> Result<TreeEnsemble> {
    let ens: TreeEnsemble =
        serde_json::from_str(&read_file(path)?).map_err(|e| json_error(path, e))?;
    if ens.trees.is_empty() || ens.trees.len() != ens.point_to_node.len() {
        return Err(Error::invalid(format!(
            "{}: ensemble needs one point map per tree",
            path.display()
        )));
    }
    Ok(ens)
}

pub fn read_diagram(path: &Path) -> Result<PersistenceDiagram> {
    PersistenceDiagram::parse(&read_file(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Square matrix as CSV: a header `id,<ids...>`, then one row per item
/// starting with its id. Values carry 17 significant digits.
pub fn matrix_to_csv(m: &DMatrix<f64>, ids: Option<&[String]>) -> Result<String> {
    let n = m.nrows();
    let default_ids: Vec<String>;
    let ids = match ids {
        Some(ids) if ids.len() == n => ids,
        Some(ids) => {
            return Err(Error::Cardinality {
                left: ids.len(),
                right: n,
            })
        }
        None => {
            default_ids = (0..n).map(|i| i.to_string()).collect();
            &default_ids
        }
    };
    let mut out = String::from("id");
    for id in ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..m.ncols() {
            out.push_str(&format!(",{:.16e}", m[(i, j)]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Inverse of [`matrix_to_csv`]; returns the matrix and the ids.
pub fn matrix_from_csv(text: &str) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let ids: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let n = ids.len();
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                lineno + 1,
                n + 1,
                fields.len()
            )));
        }
        if fields[0].trim() != ids[rows.min(n.saturating_sub(1))] {
            return Err(Error::Parse(format!("row {} has id {:?}", lineno + 1, fields[0])));
        }
        for f in &fields[1..] {
            data.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {f:?}: {e}", lineno + 1)))?,
            );
        }
        rows += 1;
    }
    if rows != n || n == 0 {
        return Err(Error::Parse(format!("expected {n} rows, got {rows}")));
    }
    Ok((DMatrix::from_row_slice(n, n, &data), ids))
}

pub fn read_matrix_csv(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    matrix_from_csv(&read_file(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
