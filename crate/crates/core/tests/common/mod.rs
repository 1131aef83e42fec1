#![allow(dead_code)]

use usskill::geometry::{Action, Quaternion};
use usskill::io::RunConfig;
use usskill::policy::ArchConfig;
use usskill::sim::{Image, Observation, Wrench};
use usskill::train::{Dataset, Record};

/// A 16x16 desk run small enough for debug-speed tests.
pub fn small_config() -> RunConfig {
    let mut c = RunConfig { episodes: 12, seed: 7, ..RunConfig::default() };
    c.sim.image_height = 16;
    c.sim.image_width = 16;
    c.arch = ArchConfig {
        image_height: 16,
        image_width: 16,
        conv1_channels: 4,
        conv2_channels: 4,
        kernel: 3,
        stride: 2,
        feature_dim: 8,
        encoder_hidden: 8,
        action_hidden: 16,
        quality_hidden: 8,
    };
    c.bc.epochs = 4;
    c.quality.epochs = 4;
    c.guidance.epochs = 3;
    c.guidance.rollouts_per_epoch = 2;
    c.guidance.max_steps = 10;
    c.eval.episodes = 3;
    c.eval.max_steps = 15;
    c
}

/// `n` records with 1x1 images, seven per episode.
pub fn synthetic(n: usize) -> Dataset {
    let records = (0..n)
        .map(|i| Record {
            episode_id: (i / 7) as u32,
            step: (i % 7) as u32,
            observation: Observation {
                image: Image { height: 1, width: 1, pixels: vec![i as f32] },
                position: [0.0; 3],
                orientation: Quaternion::IDENTITY,
                wrench: Wrench::default(),
            },
            action: Action::ZERO,
            label: (i % 2) as u8,
        })
        .collect();
    Dataset { records }
}
