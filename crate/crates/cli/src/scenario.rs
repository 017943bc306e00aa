//! Campaign scenario files: TOML with the campaign configuration at the top
//! level and a `[target]` section describing the defender under attack. The
//! campaign keys are exactly the configuration type's fields, so a scenario
//! stays valid as a config fragment elsewhere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use killchain_core::campaign::{CampaignConfig, DefenderState, TrainerSpec};
use killchain_core::datagen::{dataset_from_csv, LabeledDataset};
use killchain_core::error::{Error, Result};
use killchain_core::models::{
    train_blr, train_mlp, train_mlr, train_tree, BlrHyper, MlpHyper, MlrHyper, TargetModel,
    TreeHyper,
};
use killchain_core::persist::load_model;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub target: TargetSection,
    #[serde(flatten)]
    pub campaign: CampaignConfig,
}

/// Where the defender comes from. `data` is required either way, because
/// retrains always mix the poisoned traffic back into the original dataset;
/// without a `model` file the initial model is fitted here with the family's
/// default hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSection {
    pub data: PathBuf,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub train_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Blr,
    Mlr,
    Mlp,
    Tree,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))
}

/// Resolve `p` against the scenario file's directory unless it is absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl TargetSection {
    /// The retraining recipe the defender keeps using all campaign long.
    pub fn trainer(&self) -> TrainerSpec {
        match self.family {
            Family::Blr => TrainerSpec::Blr(BlrHyper::default()),
            Family::Mlr => TrainerSpec::Mlr(MlrHyper {
                seed: self.train_seed,
                ..MlrHyper::default()
            }),
            Family::Mlp => TrainerSpec::Mlp(MlpHyper {
                seed: self.train_seed,
                ..MlpHyper::default()
            }),
            Family::Tree => TrainerSpec::Tree(TreeHyper::default()),
        }
    }

    /// Load the dataset, then load or fit the served model.
    pub fn build(&self, base: &Path) -> Result<DefenderState> {
        let data_path = resolve(base, &self.data);
        let (train, _grades) = dataset_from_csv(&fs::read_to_string(&data_path)?)?;
        let model = match &self.model {
            Some(m) => load_model(&resolve(base, m))?.model,
            None => fit(&self.trainer(), &train)?,
        };
        Ok(DefenderState::new(model, train, self.trainer()))
    }
}

fn fit(spec: &TrainerSpec, ds: &LabeledDataset) -> Result<TargetModel> {
    Ok(match spec {
        TrainerSpec::Blr(h) => TargetModel::Blr(train_blr(ds, h)?),
        TrainerSpec::Mlr(h) => TargetModel::Mlr(train_mlr(ds, h)?),
        TrainerSpec::Mlp(h) => TargetModel::Mlp(train_mlp(ds, h)?),
        TrainerSpec::Tree(h) => TargetModel::Tree(train_tree(ds, h)?),
    })
}
