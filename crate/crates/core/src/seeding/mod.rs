//! Initial seed generation: a small attention-pooled linear classifier is
//! trained on video labels, its class activation sequences (CAS) are
//! thresholded into sparse foreground seeds, and shot-change cues paired
//! with low activations become background seeds.

mod baseline;
mod labels;
mod seeds;

pub use baseline::{compute_cas, train_cas_baseline, CasBaselineParams, CasSequence};
pub(crate) use baseline::label_target;
pub use labels::SeedLabelMap;
pub use seeds::{
    build_seed_map, extract_background_seeds, extract_foreground_seeds, read_seed_file,
    write_seed_file, SeedThresholds, VideoSeeds,
};
