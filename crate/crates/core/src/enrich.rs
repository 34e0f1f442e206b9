//! Offline enrichment: metadata augmentation, granularity annotation and
//! the three embedding families (dataset, attribute, purpose).

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::corpus::{make_preview, ColumnSample, RawDatasetRecord};
use crate::embedding::EmbeddingVector;
use crate::granularity::GranularityTags;
use crate::llm::{bindings, GatewayError, LlmGateway, TemplateName};

/// Rows of the stored preview handed to the augmentation prompts.
pub const PREVIEW_ROWS: usize = 10;
/// Rows included in the dataset embedding input.
pub const EMBEDDING_ROWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDescription {
    pub column_name: String,
    #[serde(rename = "type")]
    pub data_type: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedMetadata {
    pub description_summary: String,
    pub dataset_purposes: Vec<String>,
    pub dataset_sources: String,
    pub column_descriptions: Vec<ColumnDescription>,
    /// Set when the provider produced no purposes or no summary.
    #[serde(default)]
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnrichStatus {
    Pending,
    Enriched,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEmbedding {
    pub column_name: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedDataset {
    pub record: RawDatasetRecord,
    pub status: EnrichStatus,
    pub augmented: Option<AugmentedMetadata>,
    pub granularity: GranularityTags,
    pub dataset_embedding: Option<EmbeddingVector>,
    pub attribute_embeddings: Vec<AttributeEmbedding>,
    pub purpose_embedding: Option<EmbeddingVector>,
    /// Provider attempts spent on the augmentation prompt.
    pub attempts: u32,
}

impl EnrichedDataset {
    pub fn pending(record: RawDatasetRecord) -> Self {
        Self {
            record,
            status: EnrichStatus::Pending,
            augmented: None,
            granularity: GranularityTags::default(),
            dataset_embedding: None,
            attribute_embeddings: Vec::new(),
            purpose_embedding: None,
            attempts: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    /// Only fully enriched datasets take part in embedding-based features.
    pub fn is_semantic(&self) -> bool {
        self.status == EnrichStatus::Enriched
    }

    pub fn is_done(&self) -> bool {
        self.status != EnrichStatus::Pending
    }

    pub fn summary(&self) -> &str {
        self.augmented.as_ref().map(|a| a.description_summary.as_str()).unwrap_or(&self.record.description)
    }
}

/// Title, newline, then a markdown table of the header and the first three
/// preview rows.
pub fn dataset_embedding_input(record: &RawDatasetRecord) -> String {
    let preview = make_preview(record, EMBEDDING_ROWS);
    if preview.rendered.is_empty() {
        record.title.clone()
    } else {
        format!("{}\n{}", record.title, preview.rendered)
    }
}

pub fn attribute_embedding_input(column: &ColumnSample) -> String {
    format!("{}: {}", column.name, column.sampled_values.join(", "))
}

pub fn purpose_embedding_input(augmented: &AugmentedMetadata) -> String {
    format!("{}\n{}", augmented.description_summary, augmented.dataset_purposes.join("; "))
}

fn record_bindings(record: &RawDatasetRecord) -> std::collections::BTreeMap<String, String> {
    bindings([
        ("title", record.title.clone()),
        ("description", record.description.clone()),
        ("example_rows", make_preview(record, PREVIEW_ROWS).rendered),
    ])
}

/// Aligns provider column descriptions with the record's actual columns:
/// unknown columns are dropped, missing ones back-filled as `unknown`.
pub fn reconcile_columns(record: &RawDatasetRecord, provided: Vec<ColumnDescription>) -> Vec<ColumnDescription> {
    record
        .columns
        .iter()
        .map(|col| {
            provided
                .iter()
                .find(|d| d.column_name == col.name)
                .or_else(|| provided.iter().find(|d| d.column_name.eq_ignore_ascii_case(&col.name)))
                .map(|d| ColumnDescription { column_name: col.name.clone(), ..d.clone() })
                .unwrap_or_else(|| ColumnDescription {
                    column_name: col.name.clone(),
                    data_type: "unknown".into(),
                    description: String::new(),
                })
        })
        .collect()
}

pub async fn augment(gateway: &LlmGateway, record: &RawDatasetRecord) -> Result<(AugmentedMetadata, u32), GatewayError> {
    let out = gateway
        .complete_structured::<AugmentedMetadata>(TemplateName::MetadataAugmentation, &record_bindings(record))
        .await?;
    let mut meta = out.parsed;
    meta.column_descriptions = reconcile_columns(record, std::mem::take(&mut meta.column_descriptions));
    meta.dataset_purposes = meta
        .dataset_purposes
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    meta.description_summary = meta.description_summary.trim().to_string();
    meta.dataset_sources = match meta.dataset_sources.trim() {
        "" => "N/A".into(),
        s => s.to_string(),
    };
    meta.low_confidence = meta.dataset_purposes.is_empty() || meta.description_summary.is_empty();
    if meta.description_summary.is_empty() {
        meta.description_summary = record.title.clone();
    }
    Ok((meta, out.attempts))
}

#[derive(Deserialize)]
struct GranularityReply {
    temporal_granularity: String,
    spatial_granularity: String,
}

/// Never fails: provider errors and out-of-vocabulary answers yield absent tags.
pub async fn annotate_granularity(gateway: &LlmGateway, record: &RawDatasetRecord) -> GranularityTags {
    match gateway
        .complete_structured::<GranularityReply>(TemplateName::GranularityAnnotation, &record_bindings(record))
        .await
    {
        Ok(out) => GranularityTags::coerce(&out.parsed.temporal_granularity, &out.parsed.spatial_granularity),
        Err(e) => {
            tracing::warn!(id = %record.id, "granularity annotation failed: {e}");
            GranularityTags::default()
        }
    }
}

/// Append-only record of finished datasets, used to resume an interrupted run.
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    pub fn path_for(catalog: &Path) -> PathBuf {
        let mut p = catalog.as_os_str().to_owned();
        p.push(".journal");
        PathBuf::from(p)
    }

    /// Opens (creating if needed) and returns the entries already recorded.
    /// A torn final line from a crash is ignored.
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<(Self, Vec<EnrichedDataset>)> {
        let path = path.into();
        let mut done = Vec::new();
        let mut intact = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(&path)?);
            let mut line = String::new();
            while reader.read_line(&mut line)? > 0 {
                if !line.ends_with('\n') {
                    tracing::warn!("dropping torn journal tail");
                    break;
                }
                intact += line.len() as u64;
                match serde_json::from_str::<EnrichedDataset>(&line) {
                    Ok(d) => done.push(d),
                    Err(e) => tracing::warn!("ignoring unreadable journal line: {e}"),
                }
                line.clear();
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.set_len(intact)?;
        Ok((Self { path, file }, done))
    }

    pub fn append(&mut self, dataset: &EnrichedDataset) -> std::io::Result<()> {
        let mut line = serde_json::to_string(dataset).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()
    }

    pub fn remove(self) -> std::io::Result<()> {
        drop(self.file);
        std::fs::remove_file(&self.path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrichOptions {
    pub batch_size: usize,
    pub concurrency: usize,
}

impl Default for EnrichOptions {
    fn default() -> Self {
        Self { batch_size: 32, concurrency: 8 }
    }
}

#[derive(Debug, Default)]
pub struct EnrichReport {
    pub datasets: Vec<EnrichedDataset>,
    /// Datasets processed in this run (enriched or failed).
    pub performed: usize,
    pub failed: usize,
}

pub struct Enricher {
    gateway: Arc<LlmGateway>,
    options: EnrichOptions,
}

struct Draft {
    dataset: EnrichedDataset,
    texts: Vec<String>,
}

impl Enricher {
    pub fn new(gateway: Arc<LlmGateway>, options: EnrichOptions) -> Self {
        let options = EnrichOptions { batch_size: options.batch_size.max(1), concurrency: options.concurrency.max(1) };
        Self { gateway, options }
    }

    async fn draft(&self, record: RawDatasetRecord) -> Draft {
        let (augmented, granularity) =
            futures::join!(augment(&self.gateway, &record), annotate_granularity(&self.gateway, &record));
        let mut dataset = EnrichedDataset::pending(record);
        dataset.granularity = granularity;
        match augmented {
            Ok((meta, attempts)) => {
                let mut texts = vec![dataset_embedding_input(&dataset.record), purpose_embedding_input(&meta)];
                texts.extend(dataset.record.columns.iter().map(attribute_embedding_input));
                dataset.attempts = attempts;
                dataset.augmented = Some(meta);
                Draft { dataset, texts }
            }
            Err(e) => {
                dataset.attempts = match &e {
                    GatewayError::SchemaViolation { attempts, .. } | GatewayError::Provider { attempts, .. } => *attempts,
                    _ => 0,
                };
                dataset.status = EnrichStatus::Failed { reason: e.to_string() };
                Draft { dataset, texts: Vec::new() }
            }
        }
    }

    /// Enriches `records` in order. Every finished dataset is appended to
    /// `journal` (when given) before the next chunk starts.
    pub async fn run(&self, records: Vec<RawDatasetRecord>, mut journal: Option<&mut Journal>) -> std::io::Result<EnrichReport> {
        let mut report = EnrichReport::default();
        let mut records = records.into_iter().peekable();
        while records.peek().is_some() {
            let chunk: Vec<RawDatasetRecord> = records.by_ref().take(self.options.batch_size).collect();
            let drafts: Vec<Draft> =
                stream::iter(chunk).map(|r| self.draft(r)).buffered(self.options.concurrency).collect().await;
            let finished = self.embed_drafts(drafts).await;
            for d in finished {
                let status = match &d.status {
                    EnrichStatus::Enriched => "enriched",
                    EnrichStatus::Failed { .. } => "failed",
                    EnrichStatus::Pending => "pending",
                };
                tracing::info!(id = %d.record.id, status, attempts = d.attempts, "enrich");
                if let Some(j) = journal.as_deref_mut() {
                    j.append(&d)?;
                }
                report.performed += 1;
                if !d.is_semantic() {
                    report.failed += 1;
                }
                report.datasets.push(d);
            }
        }
        Ok(report)
    }

    async fn embed_drafts(&self, drafts: Vec<Draft>) -> Vec<EnrichedDataset> {
        let mut owners = Vec::new();
        let mut texts = Vec::new();
        for (i, d) in drafts.iter().enumerate() {
            for t in &d.texts {
                owners.push(i);
                texts.push(t.clone());
            }
        }
        let mut vectors: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut errors: Vec<Option<String>> = vec![None; drafts.len()];
        for (b, batch) in texts.chunks(self.options.batch_size).enumerate() {
            let start = b * self.options.batch_size;
            match self.gateway.embed_texts(batch).await {
                Ok(vs) => {
                    for (j, v) in vs.into_iter().enumerate() {
                        vectors[start + j] = Some(v);
                    }
                }
                Err(e) => {
                    for &o in &owners[start..start + batch.len()] {
                        errors[o] = Some(format!("embedding failed: {e}"));
                    }
                }
            }
        }
        let mut vectors = vectors.into_iter();
        drafts
            .into_iter()
            .zip(errors)
            .map(|(draft, err)| {
                let mut d = draft.dataset;
                let mine: Vec<Option<EmbeddingVector>> = vectors.by_ref().take(draft.texts.len()).collect();
                if d.status != EnrichStatus::Pending {
                    return d;
                }
                if let Some(reason) = err {
                    d.status = EnrichStatus::Failed { reason };
                    return d;
                }
                let mut mine = mine.into_iter().map(|v| v.expect("batch succeeded"));
                d.dataset_embedding = mine.next();
                d.purpose_embedding = mine.next();
                d.attribute_embeddings = d
                    .record
                    .columns
                    .iter()
                    .zip(mine)
                    .map(|(c, vector)| AttributeEmbedding { column_name: c.name.clone(), vector })
                    .collect();
                d.status = EnrichStatus::Enriched;
                d
            })
            .collect()
    }
}
