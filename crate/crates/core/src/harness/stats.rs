//! Training-data statistics in the layout of an injection-rate table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::inject::records::error_rate_tenths;

/// Pool sizes and injected-program counts for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub dataset: String,
    pub pool_incorrect: u64,
    pub pool_correct: u64,
    pub greedy: Option<u64>,
    pub mask_best: Option<u64>,
}

fn rate(n: Option<u64>, pool: u64) -> Option<String> {
    let tenths = error_rate_tenths(n?, pool).ok()?;
    Some(format!("{}.{}%", tenths / 10, tenths % 10))
}

impl StatsRow {
    /// Greedy error rate, e.g. `"21.7%"`; `None` without a count or pool.
    pub fn greedy_rate(&self) -> Option<String> {
        rate(self.greedy, self.pool_correct)
    }

    pub fn mask_best_rate(&self) -> Option<String> {
        rate(self.mask_best, self.pool_correct)
    }
}

/// Renders rows as a tab-separated table.
pub fn render_table(rows: &[StatsRow]) -> String {
    let mut out = String::from(
        "dataset\t|P0_inc|\t|P0_corr|\tgreedy |P1_inc|\tgreedy rate\tmask-best |P1_inc|\tmask-best rate\n",
    );
    let opt = |v: Option<u64>| v.map_or("-".to_string(), |n| n.to_string());
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.dataset,
            r.pool_incorrect,
            r.pool_correct,
            opt(r.greedy),
            r.greedy_rate().unwrap_or_else(|| "-".into()),
            opt(r.mask_best),
            r.mask_best_rate().unwrap_or_else(|| "-".into()),
        ));
    }
    out
}

/// Number of non-blank lines in a JSONL file.
pub fn count_jsonl(path: &Path) -> std::io::Result<u64> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).count() as u64)
}

/// Builds a row by counting records in pool and injection files.
pub fn dataset_stats(
    dataset: &str,
    pool_correct: &Path,
    pool_incorrect: &Path,
    greedy: Option<&Path>,
    mask_best: Option<&Path>,
) -> std::io::Result<StatsRow> {
    Ok(StatsRow {
        dataset: dataset.to_string(),
        pool_incorrect: count_jsonl(pool_incorrect)?,
        pool_correct: count_jsonl(pool_correct)?,
        greedy: greedy.map(count_jsonl).transpose()?,
        mask_best: mask_best.map(count_jsonl).transpose()?,
    })
}
