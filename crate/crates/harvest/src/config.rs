/// Crawl thresholds. Size and usability bounds are inclusive on the accept
/// side; the upvote bound is exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestConfig {
    pub min_usability_score: f64,
    pub max_dataset_bytes: u64,
    /// Notebooks to fetch in one run.
    pub target_notebook_count: u64,
    pub max_upvotes_exclusive: u64,
    pub max_pages: u32,
    pub page_size: u32,
    pub min_distinct_datasets: u64,
    /// Request pacing; `0` disables it.
    pub rate_per_minute: u32,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self {
            min_usability_score: 0.7,
            max_dataset_bytes: 10_000_000,
            target_notebook_count: 100,
            max_upvotes_exclusive: 10,
            max_pages: 20,
            page_size: 100,
            min_distinct_datasets: 1,
            rate_per_minute: 60,
        }
    }
}
