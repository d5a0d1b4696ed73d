//! The pipeline stages. Each reads only the files written by earlier
//! stages, so any stage can be rerun on its own.

pub mod evaluate;
pub mod generate;
pub mod importance;
pub mod prepare;
pub mod report;
pub mod train;

use skyport_core::features::{apply_encoder, read_samples, Encoder, Partition, Sample};
use skyport_core::FeatureMatrix;

use crate::artifacts::{open, read_json, Layout};
use crate::error::CliResult;

/// A prepared dataset of one K, as persisted by `prepare`.
pub struct Prepared {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub encoder: Encoder,
}

impl Prepared {
    pub fn load(layout: &Layout, k: usize) -> CliResult<Self> {
        let hint = "run `skyport prepare` first";
        let (samples, parts) = read_samples(open(&layout.k_file(k, "samples.csv"), hint)?)?;
        let encoder: Encoder = read_json(&layout.k_file(k, "encoder.json"), hint)?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (s, p) in samples.into_iter().zip(parts) {
            match p {
                Partition::Train => train.push(s),
                Partition::Test => test.push(s),
            }
        }
        Ok(Prepared {
            train,
            test,
            encoder,
        })
    }

    pub fn train_matrix(&self) -> CliResult<FeatureMatrix> {
        Ok(apply_encoder(&self.encoder, &self.train)?)
    }

    pub fn test_matrix(&self) -> CliResult<FeatureMatrix> {
        Ok(apply_encoder(&self.encoder, &self.test)?)
    }
}
