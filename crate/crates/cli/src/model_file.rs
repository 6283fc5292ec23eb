//! Versioned JSON model files.
//!
//! Matrices are stored row-major. Floats are written with shortest round-trip
//! formatting, so a saved model reloads bit-for-bit.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use ldrkit::{
    Activation, DisplacementRep, LdrLayer, Matrix, NetworkModel, OperatorKind, OperatorMatrix,
    OperatorPair, Vector,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT: &str = "ldrkit-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorDescriptor {
    UnitCirculant {
        n: usize,
        f: f64,
        #[serde(default)]
        transposed: bool,
    },
    Diagonal {
        d: Vec<f64>,
    },
    Dense {
        n: usize,
        data: Vec<f64>,
    },
}

impl OperatorDescriptor {
    pub fn from_operator(op: &OperatorMatrix) -> Self {
        match op.kind() {
            OperatorKind::UnitCirculant { f, transposed } => OperatorDescriptor::UnitCirculant {
                n: op.n(),
                f: *f,
                transposed: *transposed,
            },
            OperatorKind::Diagonal(d) => OperatorDescriptor::Diagonal {
                d: d.iter().copied().collect(),
            },
            OperatorKind::Dense(m) => OperatorDescriptor::Dense {
                n: op.n(),
                data: row_major(m),
            },
        }
    }

    /// `field` names the descriptor in error messages.
    pub fn build(&self, field: &str) -> Result<OperatorMatrix> {
        match self {
            OperatorDescriptor::UnitCirculant { n, f, transposed } => {
                if *n == 0 || !f.is_finite() {
                    return Err(CliError::validation(format!("{field}: invalid unit circulant (n = {n}, f = {f})")));
                }
                Ok(if *transposed {
                    OperatorMatrix::unit_circulant_transposed(*n, *f)
                } else {
                    OperatorMatrix::unit_circulant(*n, *f)
                })
            }
            OperatorDescriptor::Diagonal { d } => {
                if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::validation(format!("{field}.d: must be nonempty and finite")));
                }
                Ok(OperatorMatrix::diagonal(Vector::from_column_slice(d)))
            }
            OperatorDescriptor::Dense { n, data } => {
                let m = matrix_from_row_major(&format!("{field}.data"), data, *n, *n)?;
                OperatorMatrix::dense(m).map_err(|e| CliError::validation(format!("{field}: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: OperatorDescriptor,
    pub b: OperatorDescriptor,
}

impl PairRecord {
    pub fn from_pair(pair: &OperatorPair) -> Self {
        Self {
            a: OperatorDescriptor::from_operator(pair.a()),
            b: OperatorDescriptor::from_operator(pair.b()),
        }
    }

    pub fn build(&self, field: &str) -> Result<OperatorPair> {
        let a = self.a.build(&format!("{field}.a"))?;
        let b = self.b.build(&format!("{field}.b"))?;
        if a.n() != b.n() {
            return Err(CliError::validation(format!(
                "{field}: operator sizes differ ({} vs {})",
                a.n(),
                b.n()
            )));
        }
        OperatorPair::new(a, b).map_err(|e| CliError::validation(format!("{field}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub pair: PairRecord,
    /// `n × r`, row-major.
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub activation: Activation,
    pub theta: Vec<f64>,
    pub blocks: Vec<BlockRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRecord {
    pub alpha: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub layers: Vec<LayerRecord>,
    pub readout: ReadoutRecord,
}

impl ModelFile {
    pub fn from_model(model: &NetworkModel) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|layer| LayerRecord {
                n: layer.n(),
                k: layer.k(),
                r: layer.r(),
                activation: layer.activation(),
                theta: layer.theta().iter().copied().collect(),
                blocks: layer
                    .blocks()
                    .iter()
                    .map(|b| BlockRecord {
                        pair: PairRecord::from_pair(b.pair()),
                        g: row_major(b.g()),
                        h: row_major(b.h()),
                    })
                    .collect(),
            })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            layers,
            readout: ReadoutRecord {
                alpha: model.alpha().iter().copied().collect(),
                bias: model.bias(),
            },
        }
    }

    pub fn to_model(&self) -> Result<NetworkModel> {
        if self.format != FORMAT {
            return Err(CliError::validation(format!(
                "format: expected \"{FORMAT}\", found \"{}\"",
                self.format
            )));
        }
        if self.version != VERSION {
            return Err(CliError::validation(format!(
                "version: unsupported model version {} (this build reads version {VERSION})",
                self.version
            )));
        }
        if self.layers.is_empty() {
            return Err(CliError::validation("layers: a model needs at least one layer"));
        }
        // Blocks sharing an operator pair share one Arc, as they did when saved.
        let mut pairs: HashMap<String, Arc<OperatorPair>> = HashMap::new();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (li, rec) in self.layers.iter().enumerate() {
            let field = format!("layers[{li}]");
            if rec.k != rec.blocks.len() {
                return Err(CliError::validation(format!(
                    "{field}.blocks: expected {} blocks, found {}",
                    rec.k,
                    rec.blocks.len()
                )));
            }
            check_len(&format!("{field}.theta"), rec.theta.len(), rec.n * rec.k)?;
            let mut blocks = Vec::with_capacity(rec.k);
            for (bi, block) in rec.blocks.iter().enumerate() {
                let bfield = format!("{field}.blocks[{bi}]");
                let key = serde_json::to_string(&block.pair).expect("descriptor serialises");
                let pair = match pairs.get(&key) {
                    Some(p) => Arc::clone(p),
                    None => {
                        let p = Arc::new(block.pair.build(&format!("{bfield}.pair"))?);
                        pairs.insert(key, Arc::clone(&p));
                        p
                    }
                };
                if pair.n() != rec.n {
                    return Err(CliError::validation(format!(
                        "{bfield}.pair: operator size {} does not match layer size {}",
                        pair.n(),
                        rec.n
                    )));
                }
                if pair.transform().is_none() {
                    return Err(CliError::validation(format!(
                        "{bfield}.pair.a: operator has no power equal to a multiple of the identity"
                    )));
                }
                let g = matrix_from_row_major(&format!("{bfield}.g"), &block.g, rec.n, rec.r)?;
                let h = matrix_from_row_major(&format!("{bfield}.h"), &block.h, rec.n, rec.r)?;
                blocks.push(DisplacementRep::new(pair, g, h).map_err(|e| CliError::validation(format!("{bfield}: {e}")))?);
            }
            if li > 0 {
                let prev = &self.layers[li - 1];
                check_len(&format!("{field}.n"), rec.n, prev.n * prev.k)?;
            }
            let theta = Vector::from_column_slice(&rec.theta);
            layers.push(
                LdrLayer::new(blocks, theta, rec.activation)
                    .map_err(|e| CliError::validation(format!("{field}: {e}")))?,
            );
        }
        let last = self.layers.last().expect("nonempty");
        check_len("readout.alpha", self.readout.alpha.len(), last.n * last.k)?;
        check_finite("readout.alpha", &self.readout.alpha)?;
        check_finite("readout.bias", &[self.readout.bias])?;
        NetworkModel::new(layers, Vector::from_column_slice(&self.readout.alpha), self.readout.bias)
            .map_err(|e| CliError::validation(format!("model: {e}")))
    }
}

pub fn save_model(model: &NetworkModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("model serialises");
    std::fs::write(path, json).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_model(&text).map_err(|e| match e {
        CliError::Validation(msg) => CliError::validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_model(text: &str) -> Result<NetworkModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            CliError::validation(format!("malformed model file (truncated): {e}"))
        } else {
            CliError::validation(format!("malformed model file: {e}"))
        }
    })?;
    file.to_model()
}

fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter().copied());
    }
    out
}

fn matrix_from_row_major(field: &str, data: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    check_len(field, data.len(), rows * cols)?;
    check_finite(field, data)?;
    Ok(Matrix::from_row_slice(rows, cols, data))
}

fn check_len(field: &str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(CliError::validation(format!(
            "{field}: expected {expected} entries, found {found}"
        )));
    }
    Ok(())
}

fn check_finite(field: &str, data: &[f64]) -> Result<()> {
    if let Some(i) = data.iter().position(|x| !x.is_finite()) {
        return Err(CliError::validation(format!("{field}[{i}]: not finite")));
    }
    Ok(())
}
