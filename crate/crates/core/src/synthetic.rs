//! Seeded synthetic corpora for scale and latency testing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ColumnSample, RawDatasetRecord};

const TOPICS: &[(&str, &[&str])] = &[
    ("Housing Prices", &["price", "bedrooms", "bathrooms", "sqft", "zipcode", "year_built", "city"]),
    ("Air Quality", &["pm25", "ozone", "station", "date", "city", "latitude", "longitude"]),
    ("Movie Ratings", &["movie_title", "genre", "rating", "votes", "release_year", "director"]),
    ("Employee Attrition", &["employee_id", "department", "salary", "attrition", "years_at_company", "gender"]),
    ("Retail Sales", &["store", "product", "units_sold", "revenue", "month", "region"]),
    ("Flight Delays", &["airline", "origin", "destination", "delay_minutes", "date", "distance"]),
    ("Crop Yields", &["crop", "country", "year", "yield", "rainfall", "temperature"]),
    ("Stock Prices", &["ticker", "date", "open", "close", "volume", "sector"]),
    ("Hospital Admissions", &["patient_id", "diagnosis", "age", "length_of_stay", "admission_date", "state"]),
    ("Energy Consumption", &["building", "timestamp", "kwh", "temperature", "occupancy", "county"]),
    ("Student Performance", &["student_id", "school", "math_score", "reading_score", "gender", "grade"]),
    ("Social Media Sentiment", &["post_id", "text", "sentiment", "likes", "date", "platform"]),
    ("Traffic Accidents", &["accident_id", "severity", "weather", "hour", "city", "latitude"]),
    ("Wine Quality", &["fixed_acidity", "alcohol", "ph", "quality", "type", "residual_sugar"]),
    ("Remote Work Survey", &["respondent_id", "remote_days", "stress_level", "hours_worked", "country", "year"]),
    ("Music Streaming", &["track", "artist", "streams", "genre", "week", "country"]),
    ("Global Temperatures", &["country", "year", "month", "avg_temperature", "uncertainty", "continent"]),
    ("Credit Card Fraud", &["transaction_id", "amount", "merchant", "is_fraud", "timestamp", "category"]),
    ("Bike Sharing", &["station", "date", "hour", "rentals", "temperature", "season"]),
    ("Happiness Index", &["country", "year", "happiness_score", "gdp_per_capita", "life_expectancy", "freedom"]),
];

const ADJECTIVES: &[&str] = &["Global", "US", "European", "Daily", "Monthly", "Annual", "Cleaned", "Historical", "Regional", "Open"];
const SUFFIXES: &[&str] = &["Dataset", "Data", "Records", "Statistics", "Survey", "Collection"];
const TAGS: &[&str] = &["economics", "health", "education", "finance", "environment", "entertainment", "transportation", "social science", "business", "sports"];

fn sample_value(col: &str, rng: &mut ChaCha8Rng) -> String {
    let c = col.to_ascii_lowercase();
    if c.contains("date") || c == "timestamp" {
        format!("20{:02}-{:02}-{:02}", rng.gen_range(10..25), rng.gen_range(1..13), rng.gen_range(1..29))
    } else if c.contains("year") {
        rng.gen_range(1990..2025).to_string()
    } else if c.ends_with("_id") || c == "votes" || c == "streams" || c == "volume" || c == "rentals" {
        rng.gen_range(1..100_000).to_string()
    } else if c.starts_with("is_") {
        rng.gen_bool(0.5).to_string()
    } else if ["country", "city", "state", "region", "county", "continent", "origin", "destination"].contains(&c.as_str()) {
        ["France", "Kenya", "Brazil", "India", "Canada", "Japan", "Chile", "Norway"][rng.gen_range(0..8)].to_string()
    } else if ["genre", "type", "category", "sector", "department", "platform", "season", "weather", "sentiment"].contains(&c.as_str()) {
        ["alpha", "beta", "gamma", "delta", "omega"][rng.gen_range(0..5)].to_string()
    } else {
        format!("{:.2}", rng.gen_range(0.0..1000.0))
    }
}

/// `n` records with ids `syn-00000..`, about five columns each.
pub fn corpus(n: usize, seed: u64) -> Vec<RawDatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (topic, cols) = TOPICS[rng.gen_range(0..TOPICS.len())];
            let title = format!(
                "{} {} {} {}",
                ADJECTIVES.choose(&mut rng).unwrap(),
                topic,
                SUFFIXES.choose(&mut rng).unwrap(),
                rng.gen_range(2000..2025)
            );
            let k = rng.gen_range(4..=cols.len().min(6));
            let mut picked: Vec<&str> = cols.to_vec();
            picked.shuffle(&mut rng);
            picked.truncate(k);
            let columns: Vec<ColumnSample> = picked
                .iter()
                .map(|c| ColumnSample { name: c.to_string(), sampled_values: (0..5).map(|_| sample_value(c, &mut rng)).collect() })
                .collect();
            let tags: Vec<String> = TAGS.choose_multiple(&mut rng, 2).map(|t| t.to_string()).collect();
            let num_rows = rng.gen_range(50..2_000_000);
            RawDatasetRecord {
                id: format!("syn-{i:05}"),
                filename: format!("{}.csv", title.to_lowercase().replace(' ', "_")),
                description: format!(
                    "{title} covering {}. Source: synthetic generator.",
                    picked.iter().map(|c| c.replace('_', " ")).collect::<Vec<_>>().join(", ")
                ),
                title,
                tags,
                size_bytes: num_rows * rng.gen_range(20..200),
                num_rows,
                num_cols: columns.len() as u64,
                usability_score: Some((rng.gen_range(30..=100) as f64) / 100.0),
                downloads: Some(rng.gen_range(0..50_000)),
                columns,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = corpus(200, 1);
        assert_eq!(a, corpus(200, 1));
        assert_ne!(a, corpus(200, 2));
        let ids: std::collections::HashSet<_> = a.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids.len(), 200);
        for r in &a {
            r.validate(true).unwrap();
            assert!((4..=6).contains(&r.columns.len()));
        }
    }
}
