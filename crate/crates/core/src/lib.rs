//! Code-switched data augmentation and contrastive sentence-embedding
//! training.

pub mod augment;
pub mod concse;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod linalg;
pub mod synthetic;
pub mod trainer;
pub mod treebank;
