//! Augmentation procedures: saliency-aware cut, paste and cut-mix, the plain baselines,
//! and the batch driver.

mod batch;
mod config;
mod keep;
mod policy;

pub use batch::{apply_mode, augment_batch, augment_one, draw_partner, AugmentedExample, SaliencySource, SidecarRecord};
pub use config::{AugmentConfig, Mode, RegionSize, DEFAULT_REGION, DEFAULT_TAU};
pub use keep::{keep_cutmix, keep_cutout, keep_paste, plain_cutout, random_rect, MixedLabel};
pub use policy::{apply_ops, apply_policy, apply_policy_logged, AppliedOp, PolicyOp, TransformPolicy, MAX_MAGNITUDE};
