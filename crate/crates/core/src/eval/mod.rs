//! Simple-sum fusion and evaluation (ROC for verification, CMC for
//! identification), plus their CSV forms.

mod cmc;
mod fusion;
mod roc;

pub use cmc::{cmc, cmc_lenient, write_cmc_csv, CmcCurve};
pub use fusion::{fuse_simple_sum, read_fused_csv, write_fused_csv, FusedRow, FusedScores, Provenance};
pub use roc::{roc, write_roc_csv, EerPoint, RocCurve, RocPoint};
