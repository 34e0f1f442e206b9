//! Prompt bodies and their output schemas.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::shape::Shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    MetadataAugmentation,
    GranularityAnnotation,
    HypotheticalSchemas,
    Reformulation,
    ColumnConcepts,
    RelevanceIndicators,
}

impl TemplateName {
    pub const ALL: [TemplateName; 6] = [
        Self::MetadataAugmentation,
        Self::GranularityAnnotation,
        Self::HypotheticalSchemas,
        Self::Reformulation,
        Self::ColumnConcepts,
        Self::RelevanceIndicators,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MetadataAugmentation => "metadata_augmentation",
            Self::GranularityAnnotation => "granularity_annotation",
            Self::HypotheticalSchemas => "hypothetical_schemas",
            Self::Reformulation => "reformulation",
            Self::ColumnConcepts => "column_concepts",
            Self::RelevanceIndicators => "relevance_indicators",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: &'static str,
    pub output_schema: Shape,
}

const METADATA_AUGMENTATION: &str = r#"Given following dataset details, you must extract information about this dataset.
Dataset Details:
- Title: {title}
- Description: {description}
- Dataset Preview: {example_rows}

Directly answer each question, be brief and to the point:
1. Description Summary: In 1-3 sentences, provide a brief and summarized description of the dataset.
2. Purposes: Provide a list of analytical, data science, visualization, or machine learning tasks that can be performed with this dataset. e.g., ["training a regression model", "temporal analysis"]
3. Dataset Source & Collection Methods: Gather the source(s) of this dataset, which could include names and/or affiliations of persons, website URLs, web-APIs, synthetic sources, human annotations, and so on. If no information is available about the source of the data, output 'N/A'.
4. Column Descriptions: For each column in the dataset, provide a brief description for the column with its data type.
Output Schema:
{"description_summary": string,
"dataset_purposes": list[string],
"dataset_sources": string,
"column_descriptions": list[{"column_name": string, "type": string, "description": string}]
}"#;

const GRANULARITY_ANNOTATION: &str = r#"Given a dataset with the following details, determine the most likely temporal and/or spatial granularity reflected in the dataset.
Dataset Details:
- Title: {title}
- Description: {description}
- Dataset Preview: {example_rows}

Select the temporal granularity from the following options:
Year, Quarter, Month, Week, Day, Hour, Minute, or Second.
Select the spatial granularity from the following options:
Continent, Country, State/Province, County/District, City, Neighborhood/Region, Zip Code/Postal Code, Street Address, Residential Address, or Latitude/Longitude.
Identify the temporal and/or spatial granularity only if reflected in the dataset. Leave the respective field(s) empty if the granularity cannot be inferred from the table.
Output Schema:
{"temporal_granularity": string,
"spatial_granularity": string}"#;

const HYPOTHETICAL_SCHEMAS: &str = r#"Given the task of {query}, generate three dataset schemas to implement the task.
Only generate three table schemas, excluding any introductory phrases and focusing exclusively on the tasks themselves.
Generate the table names and corresponding column names, data types, and example rows. For example:
Example Task:
Datasets to train a machine learning model to predict housing prices

Example Output: (Parts omitted for brevity)
[
  {
    "table_name": "Properties",
    "column_names": ["id", "num_bedrooms", "num_bathrooms", "sqft", "year_built", "location", "price"],
    "data_types": ["INT", "INT", "INT", "FLOAT", "INT", "TEXT", "FLOAT"],
    "example_row": [101, 3, 2, 1450.5, 2005, "Seattle, WA", 675000.0]
  },
  {
    "table_name": "NeighborhoodStats",
    "column_names": [...],
    "data_types": [...],
    "example_row": [...]
  },
  {
    "table_name": "PropertySalesHistory",
    "column_names": [...],
    "data_types": [...],
    "example_row": [...]
  }
]

Output Schema:
list[{"table_name": string,
"column_names": list[string],
"data_types": list[string],
"example_row": list[string]}
]"#;

const REFORMULATION: &str = r#"Generate a dataset search query matching a collection of given dataset names, such that it:
- Incorporates the common theme of these dataset names: {cluster}
- Relates to the original task: {query}
- Is specific enough to include both a topic, as well as a clear objective.

Also provide a brief reason (under 10 words) why this query improves upon {query}.
Example Output:
{
    "query": "Analyze voter demographics in presidential elections", "reason": "adds demographic focus"
}

Output Schema:
{"query": string, "reason": string}"#;

// The concept prompt carries no placeholder for its nested input list, so
// the list is appended after the body.
const COLUMN_CONCEPTS: &str = r#"You are an assistant that returns a flat list of words. The input will be a list with nested elements. For each nested element, return 1 to 2 representative words that best represent the topic of the nested group. The representative word should also make sense in context with the {query}. The words should be lower case single words without special characters (like hyphens or underscores). The output must be a valid JSON array with no additional formatting, symbols, or repetitions.

Output Schema:
list[string]

Input: {cluster}"#;

const RELEVANCE_INDICATORS: &str = r#"You are an assistant that explains what makes the following dataset search result relevant or irrelevant, given my task and applied search filters.

Dataset Details:
- Description: {description}
- Example Rows: {schema}
- Purpose of dataset: {purpose}
- Dataset Collection Method: {source}

Dataset Search Specifications:
- Dataset search query: {query}
- Applied filters: {filters}

Instructions:
1. Utilities: Identify the strongest factors that make this dataset useful. Look for the presence of relevant attributes, high data quality, and matching intent. If there are no strong advantages, return "No significant utilities."

2. Limitations: Identify limitations such as missing relevant attributes, specific geographical locations (e.g., "dataset only contains records of location X"), specific temporal ranges (e.g., "data belongs to X and Y time range"), poor data quality and missing or incomplete data. If no major issues exist, return "No significant limitations."

Guidelines:
- Stay factual: Base responses strictly on the provided dataset details. Do not assume information that isn't explicitly stated.
- Be concise: Limit each response to 1-2 sentences.
- Avoid hallucination: If no strong reason exists for relevance or irrelevance, default to "No significant utilities" or "No significant limitations".

Output Schema:
{"utilities": string, "limitations": string}"#;

impl PromptTemplate {
    pub fn get(name: TemplateName) -> Self {
        use Shape::*;
        let (body, output_schema) = match name {
            TemplateName::MetadataAugmentation => (
                METADATA_AUGMENTATION,
                Shape::object([
                    ("description_summary", Text),
                    ("dataset_purposes", Shape::list(Text)),
                    ("dataset_sources", Text),
                    (
                        "column_descriptions",
                        Shape::list(Shape::object([
                            ("column_name", Text),
                            ("type", Text),
                            ("description", Text),
                        ])),
                    ),
                ]),
            ),
            TemplateName::GranularityAnnotation => (
                GRANULARITY_ANNOTATION,
                Shape::object([("temporal_granularity", Text), ("spatial_granularity", Text)]),
            ),
            TemplateName::HypotheticalSchemas => (
                HYPOTHETICAL_SCHEMAS,
                Shape::list(Shape::object([
                    ("table_name", Text),
                    ("column_names", Shape::list(Text)),
                    ("data_types", Shape::list(Text)),
                    ("example_row", Shape::list(Scalar)),
                ])),
            ),
            TemplateName::Reformulation => {
                (REFORMULATION, Shape::object([("query", Text), ("reason", Text)]))
            }
            TemplateName::ColumnConcepts => (COLUMN_CONCEPTS, Shape::list(Text)),
            TemplateName::RelevanceIndicators => (
                RELEVANCE_INDICATORS,
                Shape::object([("utilities", Text), ("limitations", Text)]),
            ),
        };
        Self { name, body, output_schema }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for name in scan_placeholders(self.body) {
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    /// Substitutes every placeholder. Values are inserted verbatim and are
    /// not rescanned, so a value containing `{query}` stays literal.
    pub fn fill(&self, bindings: &BTreeMap<String, String>) -> Result<String, String> {
        let body = self.body;
        let mut out = String::with_capacity(body.len() + 256);
        let mut last = 0;
        for (start, end, name) in placeholder_spans(body) {
            let value = bindings.get(name).ok_or_else(|| name.to_string())?;
            out.push_str(&body[last..start]);
            out.push_str(value);
            last = end;
        }
        out.push_str(&body[last..]);
        Ok(out)
    }
}

fn placeholder_spans(body: &str) -> Vec<(usize, usize, &str)> {
    let bytes = body.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                spans.push((i, j + 1, &body[i + 1..j]));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    spans
}

fn scan_placeholders(body: &'static str) -> Vec<&'static str> {
    placeholder_spans(body).into_iter().map(|(_, _, n)| n).collect()
}

/// True when `text` still contains a `{name}` token.
pub fn has_unresolved_placeholder(text: &str) -> bool {
    !placeholder_spans(text).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholder_sets() {
        let p = |n| PromptTemplate::get(n).placeholders();
        assert_eq!(p(TemplateName::MetadataAugmentation), vec!["title", "description", "example_rows"]);
        assert_eq!(p(TemplateName::GranularityAnnotation), vec!["title", "description", "example_rows"]);
        assert_eq!(p(TemplateName::HypotheticalSchemas), vec!["query"]);
        assert_eq!(p(TemplateName::Reformulation), vec!["cluster", "query"]);
        assert_eq!(p(TemplateName::ColumnConcepts), vec!["query", "cluster"]);
        assert_eq!(
            p(TemplateName::RelevanceIndicators),
            vec!["description", "schema", "purpose", "source", "query", "filters"]
        );
    }

    #[test]
    fn fill_resolves_everything() {
        for name in TemplateName::ALL {
            let t = PromptTemplate::get(name);
            let bindings: BTreeMap<String, String> =
                t.placeholders().into_iter().map(|p| (p.to_string(), format!("<{p}>"))).collect();
            let filled = t.fill(&bindings).unwrap();
            assert!(!has_unresolved_placeholder(&filled), "{name}");
        }
    }

    #[test]
    fn fill_reports_missing_binding() {
        let t = PromptTemplate::get(TemplateName::HypotheticalSchemas);
        assert_eq!(t.fill(&BTreeMap::new()), Err("query".to_string()));
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = PromptTemplate::get(TemplateName::HypotheticalSchemas);
        let b = BTreeMap::from([("query".to_string(), "{query}".to_string())]);
        let filled = t.fill(&b).unwrap();
        assert!(filled.starts_with("Given the task of {query}, generate"));
    }
}
