//! Semantic matrices, feature datasets, class splits and their file formats.

mod bytes;
mod features;
mod semantic;
mod split;
mod synth;

pub use features::{
    read_feature_file, write_feature_file, FeatureDataset, FeatureRecord, Role, FEATURE_MAGIC,
    FEATURE_VERSION,
};
pub use semantic::{
    load_semantic_matrix, manifest_path, parse_manifest, write_semantic_matrix, SemanticMatrix,
};
pub use split::{read_split, validate_split, write_split, ClassSplit, LabelSpace};
pub use synth::{generate_synthetic, SynthSpec, SyntheticData};

pub(crate) use bytes::{expect_len, put_f32s, put_u32, read_file, to_u32, write_file, Reader};
