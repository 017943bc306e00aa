//! Versioned JSON documents for trained models. Round-trips are bit-exact:
//! floats are emitted in shortest-exact form, so load(save(m)) == m down to
//! the last bit.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TargetModel;

pub const FORMAT_VERSION: u32 = 1;

/// A trained model plus enough metadata to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub version: u32,
    /// Layer/shape summary, outermost first (d, then hidden sizes, then c).
    pub dims: Vec<usize>,
    #[serde(flatten)]
    pub model: TargetModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper: Option<serde_json::Value>,
}

fn dims_of(model: &TargetModel) -> Vec<usize> {
    match model {
        TargetModel::Blr(m) => vec![m.dim(), 2],
        TargetModel::Mlr(m) => vec![m.dim(), m.class_count()],
        TargetModel::Mlp(m) => vec![m.dim(), m.hidden_count(), m.class_count()],
        TargetModel::Tree(t) => vec![t.d, t.c],
    }
}

impl ModelDoc {
    pub fn new(model: TargetModel) -> Self {
        ModelDoc {
            version: FORMAT_VERSION,
            dims: dims_of(&model),
            model,
            train_seed: None,
            hyper: None,
        }
    }

    pub fn with_train_meta<H: Serialize>(mut self, seed: u64, hyper: &H) -> Result<Self> {
        self.train_seed = Some(seed);
        self.hyper = Some(serde_json::to_value(hyper)?);
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model document version {}",
                self.version
            )));
        }
        if self.dims != dims_of(&self.model) {
            return Err(Error::Parse(format!(
                "declared dims {:?} do not match the parameters",
                self.dims
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        doc.check()?;
        Ok(doc)
    }
}

pub fn save_model(doc: &ModelDoc, path: &Path) -> Result<()> {
    doc.check()?;
    fs::write(path, doc.to_json()?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelDoc> {
    ModelDoc::from_json(&fs::read_to_string(path)?)
}

/// Small helpers shared by every other document this crate writes.
pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
