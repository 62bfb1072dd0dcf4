//! The harvest, report and term-analysis stages, and the pipeline that
//! chains harvest, convert and report.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nbwrangle_core::ingest;
use nbwrangle_core::lineage;
use nbwrangle_core::report::{self, CorpusStats};
use nbwrangle_core::roles::{RoleIndex, VariableRoleReport};
use nbwrangle_harvest::backoff::{SystemClock, VirtualClock};
use nbwrangle_harvest::crawl::{DirSink, HarvestEnv};
use nbwrangle_harvest::fixture::FixtureClient;
use nbwrangle_harvest::ledger::StoredNotebook;
use nbwrangle_harvest::live::{Credentials, KaggleClient};
use nbwrangle_harvest::{run_harvest, CatalogClient, CrawlLedger, HarvestResult};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::config::PipelineConfig;
use crate::convert::{self, ConvertJob, ConvertSummary};

/// Seed for backoff jitter in mock mode, so mock runs replay exactly.
pub const MOCK_SEED: u64 = 0x6e62;

pub struct HarvestOutcome {
    pub result: HarvestResult,
    /// Everything the ledger holds, including earlier runs.
    pub stored: Vec<StoredNotebook>,
}

/// Runs one crawl. A configured `fixture_dir` selects the mock catalog with a
/// virtual clock; otherwise the live API is used with credentials from the
/// environment.
pub fn harvest(config: &PipelineConfig) -> Result<HarvestOutcome> {
    let ledger_path = config.ledger_path();
    let mut ledger = CrawlLedger::open(&ledger_path)
        .with_context(|| format!("opening ledger {}", ledger_path.display()))?;
    let mut sink = DirSink::new(config.store_dir());

    let result = if let Some(dir) = &config.fixture_dir {
        let mut client = FixtureClient::open(dir)?;
        let mut clock = VirtualClock::default();
        let mut rng = StdRng::seed_from_u64(MOCK_SEED);
        let env = HarvestEnv {
            clock: &mut clock,
            rng: &mut rng,
        };
        run_harvest(&mut client, &config.harvest, &mut ledger, &mut sink, env)?
    } else {
        let credentials = Credentials::from_env().context(
            "live mode needs KAGGLE_USERNAME and KAGGLE_KEY; set fixture_dir for mock mode",
        )?;
        let mut client = KaggleClient::new(credentials, config.harvest.max_dataset_bytes)?;
        let mut clock = SystemClock::default();
        let mut rng = rand::rng();
        let env = HarvestEnv {
            clock: &mut clock,
            rng: &mut rng,
        };
        let client: &mut dyn CatalogClient = &mut client;
        run_harvest(client, &config.harvest, &mut ledger, &mut sink, env)?
    };
    Ok(HarvestOutcome {
        result,
        stored: ledger.notebooks().to_vec(),
    })
}

/// Where [`DirSink`] put a stored notebook.
pub fn stored_path(store_dir: &Path, stored: &StoredNotebook) -> PathBuf {
    store_dir
        .join(&stored.dataset_ref)
        .join(format!("{}.ipynb", stored.notebook_ref))
}

pub fn report(traces_dir: &Path, out_dir: &Path) -> Result<(usize, CorpusStats)> {
    let traces = report::load_trace_dir(traces_dir)?;
    let (rows, stats) = report::summarize(&traces);
    report::write_report(out_dir, &rows, &stats)?;
    Ok((rows.len(), stats))
}

/// Role reports for `terms` over all parseable code cells of a notebook.
pub fn analyze_terms(notebook: &Path, terms: &[String]) -> Result<Vec<VariableRoleReport>> {
    let raw = fs::read_to_string(notebook)
        .with_context(|| format!("reading {}", notebook.display()))?;
    let name = notebook.display().to_string();
    let nb = ingest::parse_notebook(&raw, &name)?;
    let (parsed, _) = lineage::parse_code_cells(&nb);
    let index = RoleIndex::build(&lineage::notebook_tree(&parsed));
    Ok(terms.iter().map(|t| index.report(t)).collect())
}

pub struct PipelineOutcome {
    pub harvest: HarvestResult,
    pub convert: ConvertSummary,
    pub rows: usize,
    pub stats: CorpusStats,
}

/// Harvest, then convert every notebook the ledger holds, then report.
pub fn pipeline(config: &PipelineConfig, workers: usize) -> Result<PipelineOutcome> {
    let harvested = harvest(config)?;
    let jobs: Vec<ConvertJob> = harvested
        .stored
        .iter()
        .map(|s| ConvertJob {
            path: stored_path(config.store_dir(), s),
            notebook_ref: s.notebook_ref.clone(),
            dataset_ref: s.dataset_ref.clone(),
        })
        .collect();
    let converted = convert::convert(&jobs, &config.out_dir, workers)?;
    let (rows, stats) = report(&config.traces_dir(), &config.out_dir)?;
    Ok(PipelineOutcome {
        harvest: harvested.result,
        convert: converted,
        rows,
        stats,
    })
}
