//! Pre-training recommender, exported encoder snapshots and fine-tuning heads.

mod blocks;
mod finetune;
mod nrs;

pub use blocks::{Branch, Head};
pub use finetune::{
    build_finetune, random_baseline, FinetuneConfig, FinetuneModel, FinetuneScalers, FINETUNE_HEAD_WIDTHS,
};
pub use nrs::{
    build_pretrain, Encoder, EncoderSnapshot, PretrainConfig, PretrainModel, PretrainTrace, BLOCKS_PER_BRANCH,
    BRANCH_WIDTHS, EMBEDDING_DIM, PRETRAIN_HEAD_WIDTHS,
};
