//! Saliency-guided image augmentation.
//!
//! Regions are scored by summing a per-pixel saliency map over candidate rectangles.
//! Cutting avoids high-scoring regions; pasting keeps one of them from the original
//! image after an image-level transform. Saliency comes from input gradients of a small
//! convolutional classifier, optionally at reduced resolution or through an early head.
//!
//! Core types are generic over the scalar (`f32` or `f64`); aliases below fix `f32`.

pub mod augment;
pub mod error;
pub mod eval;
pub mod io;
pub mod net;
pub mod region;
pub mod resample;
pub mod rng;
pub mod saliency;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use augment::{
    augment_batch, keep_cutmix, keep_cutout, keep_paste, plain_cutout, AugmentConfig, MixedLabel, Mode,
    SaliencySource, TransformPolicy,
};
pub use error::{Error, Result};
pub use io::DatasetRecord;
pub use net::{NetSpec, ToyNet};
pub use region::{candidate_scores, CandidateScores, SummedAreaTable};
pub use rng::RngStream;
pub use saliency::{SaliencyMap, SaliencyStrategy};
pub use scalar::Scalar;
pub use tensor::{Image, Rect};

pub type Image32 = Image<f32>;
pub type Image64 = Image<f64>;
pub type SaliencyMap32 = SaliencyMap<f32>;
pub type SaliencyMap64 = SaliencyMap<f64>;
pub type ToyNet32 = ToyNet<f32>;
pub type ToyNet64 = ToyNet<f64>;
pub type DatasetRecord32 = DatasetRecord<f32>;
pub type CandidateScores32 = CandidateScores<f32>;
