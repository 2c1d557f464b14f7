//! JSON checkpoints: a topology tag, the run seed, and every layer's
//! parameters in declaration order with explicit shapes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::Conv2d;
use super::net::{SegNetSmall, LAYER_NAMES, TOPOLOGY};
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Image, ProbMask};

/// Topology tag of the ground-truth passthrough used to test pipelines.
pub const ORACLE_TOPOLOGY: &str = "oracle";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    /// `[out_channels, in_channels, kernel, kernel]`
    pub shape: [usize; 4],
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub topology: String,
    pub seed: u64,
    #[serde(default)]
    pub in_channels: usize,
    #[serde(default)]
    pub layers: Vec<LayerRecord>,
}

/// Something that maps an image to a probability map.
#[derive(Clone, Debug)]
pub enum Predictor {
    Net(SegNetSmall),
    /// Returns the ground truth; scores perfectly by construction.
    Oracle,
}

impl Predictor {
    pub fn predict(&self, image: &Image, truth: &BinaryMask) -> Result<ProbMask> {
        match self {
            Predictor::Net(net) => net.predict(image),
            Predictor::Oracle => Ok(truth.to_prob()),
        }
    }
}

impl Checkpoint {
    pub fn from_net(net: &SegNetSmall, seed: u64) -> Self {
        Self {
            topology: TOPOLOGY.into(),
            seed,
            in_channels: net.in_channels,
            layers: LAYER_NAMES
                .iter()
                .zip(&net.layers)
                .map(|(name, l)| LayerRecord {
                    name: (*name).into(),
                    shape: [l.out_channels, l.in_channels, l.kernel, l.kernel],
                    weight: l.weight.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn oracle(seed: u64) -> Self {
        Self {
            topology: ORACLE_TOPOLOGY.into(),
            seed,
            in_channels: 0,
            layers: Vec::new(),
        }
    }

    pub fn predictor(&self) -> Result<Predictor> {
        match self.topology.as_str() {
            ORACLE_TOPOLOGY => Ok(Predictor::Oracle),
            TOPOLOGY => {
                let mut layers = Vec::with_capacity(self.layers.len());
                for (rec, name) in self.layers.iter().zip(LAYER_NAMES) {
                    if rec.name != name {
                        return Err(Error::Checkpoint(format!(
                            "expected layer {name}, found {}",
                            rec.name
                        )));
                    }
                    let [out_c, in_c, k, k2] = rec.shape;
                    if k != k2 {
                        return Err(Error::Checkpoint(format!("layer {name} kernel is not square")));
                    }
                    layers.push(Conv2d {
                        in_channels: in_c,
                        out_channels: out_c,
                        kernel: k,
                        weight: rec.weight.clone(),
                        bias: rec.bias.clone(),
                    });
                }
                if self.layers.len() != LAYER_NAMES.len() {
                    return Err(Error::Checkpoint(format!(
                        "expected {} layers, found {}",
                        LAYER_NAMES.len(),
                        self.layers.len()
                    )));
                }
                Ok(Predictor::Net(SegNetSmall::from_layers(
                    self.in_channels,
                    layers,
                )?))
            }
            other => Err(Error::Checkpoint(format!("unknown topology '{other}'"))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
