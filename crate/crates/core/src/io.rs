//! Structured text documents: named real matrices in TOML.
//!
//! ```toml
//! name = "plant"
//! [matrices.A]
//! rows = 2
//! cols = 2
//! data = [0.5, 0.0, 0.1, 0.3]   # row-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::realize::RealizedController;
use crate::sysmodel::StateSpaceModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NamedMatrix {
    pub fn from_mat(m: &Mat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_mat(&self, name: &str) -> std::result::Result<Mat, String> {
        if self.data.len() != self.rows * self.cols {
            return Err(format!(
                "matrix {name}: declared {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            ));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Trailing controller states that replicate the plant state, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica_states: Option<usize>,
    pub matrices: BTreeMap<String, NamedMatrix>,
}

impl MatrixDocument {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e.message()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("matrix documents always serialize")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn insert(&mut self, name: &str, m: &Mat) {
        self.matrices.insert(name.to_string(), NamedMatrix::from_mat(m));
    }

    pub fn get(&self, name: &str, origin: &Path) -> Result<Mat> {
        self.matrices
            .get(name)
            .ok_or_else(|| Error::parse(origin, format!("missing matrix {name}")))?
            .to_mat(name)
            .map_err(|m| Error::parse(origin, m))
    }
}

/// Parses a plant from its document text and validates it.
pub fn parse_model(text: &str, origin: &Path) -> Result<StateSpaceModel> {
    let doc = MatrixDocument::parse(text, origin)?;
    StateSpaceModel::new(
        doc.get("A", origin)?,
        doc.get("B_u", origin)?,
        doc.get("B_w", origin)?,
        doc.get("C", origin)?,
    )
}

pub fn read_model(path: &Path) -> Result<StateSpaceModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

pub fn model_document(model: &StateSpaceModel, name: &str) -> MatrixDocument {
    let mut doc = MatrixDocument { name: Some(name.to_string()), ..Default::default() };
    doc.insert("A", &model.a);
    doc.insert("B_u", &model.b_u);
    doc.insert("B_w", &model.b_w);
    doc.insert("C", &model.c);
    doc
}

pub fn controller_document(ctrl: &RealizedController, name: &str) -> MatrixDocument {
    let mut doc = MatrixDocument { name: Some(name.to_string()), ..Default::default() };
    doc.insert("F", &ctrl.f);
    doc.insert("G", &ctrl.g);
    doc.insert("H", &ctrl.h);
    doc.insert("J", &ctrl.j);
    doc.replica_states = Some(ctrl.replica_states);
    doc
}

pub fn read_controller(path: &Path) -> Result<RealizedController> {
    let doc = MatrixDocument::read(path)?;
    let replica_states = doc.replica_states.unwrap_or(0);
    RealizedController::new(
        doc.get("F", path)?,
        doc.get("G", path)?,
        doc.get("H", path)?,
        doc.get("J", path)?,
        replica_states,
    )
}

/// Writes `contents` to `path`, mapping failures to [`Error::Io`].
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
