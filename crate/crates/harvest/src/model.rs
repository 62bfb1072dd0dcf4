use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// `owner/slug`.
    #[serde(rename = "ref")]
    pub dataset_ref: String,
    pub size_bytes: u64,
    pub usability_score: f64,
    #[serde(default)]
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotebookMeta {
    #[serde(rename = "ref")]
    pub notebook_ref: String,
    #[serde(default)]
    pub dataset_refs: Vec<String>,
    pub upvotes: u64,
    pub language_tag: String,
}
