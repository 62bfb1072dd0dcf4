pub mod syntax;
pub mod diagnostics;
pub mod ingest;
pub mod imports;
pub mod roles;
pub mod lineage;
pub mod ops;
pub mod report;
