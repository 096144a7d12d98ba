//! ROC-AUC, the Wilcoxon signed-rank test and result aggregation.

mod metrics;
mod records;

pub use metrics::{
    auc_roc, average_ranks, wilcoxon_exact_p, wilcoxon_normal_p, wilcoxon_ranks,
    wilcoxon_signed_rank, PValueMethod, WilcoxonResult, WILCOXON_EXACT_MAX, WILCOXON_MIN_PAIRS,
};
pub use records::{
    aggregate, format_summary, mean_std, read_records, write_records, EvalRecord, GroupField,
    KeyPart, SummaryRow,
};
