//! Metadata catalog of satellite-image records: ingestion, the shared
//! filter-predicate engine behind the `filter_*` tools, and schema-summary
//! sampling for generation prompts.

pub mod geo;
pub mod synth;

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use geo::{haversine_km, KM_PER_DEG_LAT};

/// The supported source datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Xview1,
    Xview2,
    Xview3,
    Sarfish,
    Fair1m,
    Fmow,
    Bigearthnet,
}

impl Dataset {
    pub const ALL: [Dataset; 7] = [
        Dataset::Xview1,
        Dataset::Xview2,
        Dataset::Xview3,
        Dataset::Sarfish,
        Dataset::Fair1m,
        Dataset::Fmow,
        Dataset::Bigearthnet,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Xview1 => "xview1",
            Dataset::Xview2 => "xview2",
            Dataset::Xview3 => "xview3",
            Dataset::Sarfish => "sarfish",
            Dataset::Fair1m => "fair1m",
            Dataset::Fmow => "fmow",
            Dataset::Bigearthnet => "bigearthnet",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dataset::ALL
            .iter()
            .find(|d| d.name() == s.trim().to_ascii_lowercase())
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown dataset {s:?}")))
    }
}

/// A precomputed detection attached to a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub class: String,
    pub det_id: String,
}

/// One satellite-image metadata record, the unit the filter tools query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub id: String,
    pub dataset: Dataset,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub classes: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub lcc_labels: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detections: Vec<Detection>,
}

/// One filter predicate. Class and LCC matching is case-insensitive on
/// trimmed labels; everything else is inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    Radius { lat: f64, lon: f64, radius_km: f64 },
    Bbox { min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64 },
    DateRange { start: DateTime<Utc>, end: DateTime<Utc> },
    Class { classes: Vec<String> },
    LccClass { classes: Vec<String> },
}

/// Per-line ingestion rejection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Ingestion report: `{accepted, rejected: [{line, reason}]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<RejectedLine>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// Keep valid lines, report the rest.
    Lenient,
    /// Abort on the first report with any rejected line.
    Strict,
}

/// Immutable, indexed record store. Safe for concurrent readers.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    records: Vec<CatalogRecord>,
    by_id: BTreeMap<String, usize>,
    by_dataset: BTreeMap<Dataset, Vec<usize>>,
    grid: BTreeMap<(i16, i16), Vec<usize>>,
}

fn normalize_label(s: &str) -> String {
    s.trim().to_lowercase()
}

fn grid_cell(lat: f64, lon: f64) -> (i16, i16) {
    let lat_cell = (lat.floor() as i16).clamp(-90, 89);
    let mut lon = lon;
    if lon >= 180.0 {
        lon = -180.0;
    }
    let lon_cell = (lon.floor() as i16).clamp(-180, 179);
    (lat_cell, lon_cell)
}

fn validate_record_fields(
    lat: f64,
    lon: f64,
    timestamp: &str,
) -> std::result::Result<DateTime<Utc>, String> {
    if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
        return Err("lat out of range".into());
    }
    if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
        return Err("lon out of range".into());
    }
    parse_timestamp(timestamp).ok_or_else(|| format!("bad timestamp {timestamp:?}"))
}

/// Accepts RFC 3339 timestamps or bare `YYYY-MM-DD` dates (midnight UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|ndt| DateTime::from_naive_utc_and_offset(ndt, Utc))
}

/// End-of-day companion to [`parse_timestamp`]: bare dates resolve to the
/// last representable instant of that day, full timestamps stay exact.
pub fn parse_timestamp_end(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_nano_opt(23, 59, 59, 999_999_999))
        .map(|ndt| DateTime::from_naive_utc_and_offset(ndt, Utc))
}

#[derive(Deserialize)]
struct RawDetection {
    class: String,
    det_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    dataset: String,
    lat: f64,
    lon: f64,
    timestamp: String,
    #[serde(default)]
    classes: Vec<String>,
    #[serde(default)]
    lcc_labels: Vec<String>,
    #[serde(default)]
    detections: Vec<RawDetection>,
}

/// Ingest a JSONL file of [`CatalogRecord`]s into an indexed catalog.
pub fn ingest_records(path: &Path, mode: IngestMode) -> Result<(Catalog, IngestReport)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Ingest(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record_line(&line, &mut seen_ids) {
            Ok(record) => records.push(record),
            Err(reason) => report.rejected.push(RejectedLine { line: line_no, reason }),
        }
    }
    report.accepted = records.len();

    if mode == IngestMode::Strict && !report.rejected.is_empty() {
        let first = &report.rejected[0];
        return Err(Error::Ingest(format!(
            "{} malformed lines (first: line {}: {})",
            report.rejected.len(),
            first.line,
            first.reason
        )));
    }

    Ok((Catalog::from_records(records), report))
}

fn parse_record_line(
    line: &str,
    seen_ids: &mut BTreeSet<String>,
) -> std::result::Result<CatalogRecord, String> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| format!("invalid json: {e}"))?;
    let dataset =
        Dataset::from_str(&raw.dataset).map_err(|_| format!("unknown dataset {:?}", raw.dataset))?;
    let timestamp = validate_record_fields(raw.lat, raw.lon, &raw.timestamp)?;
    if raw.id.trim().is_empty() {
        return Err("empty id".into());
    }
    if !seen_ids.insert(raw.id.clone()) {
        return Err(format!("duplicate id {:?}", raw.id));
    }
    Ok(CatalogRecord {
        id: raw.id,
        dataset,
        lat: raw.lat,
        lon: raw.lon,
        timestamp,
        classes: raw.classes.into_iter().collect(),
        lcc_labels: raw.lcc_labels.into_iter().collect(),
        detections: raw
            .detections
            .into_iter()
            .map(|d| Detection { class: d.class, det_id: d.det_id })
            .collect(),
    })
}

impl Catalog {
    /// Index a set of already-validated records.
    pub fn from_records(records: Vec<CatalogRecord>) -> Self {
        let mut catalog = Catalog {
            records,
            by_id: BTreeMap::new(),
            by_dataset: BTreeMap::new(),
            grid: BTreeMap::new(),
        };
        for (i, r) in catalog.records.iter().enumerate() {
            catalog.by_id.insert(r.id.clone(), i);
            catalog.by_dataset.entry(r.dataset).or_default().push(i);
            catalog.grid.entry(grid_cell(r.lat, r.lon)).or_default().push(i);
        }
        catalog
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: &str) -> Option<&CatalogRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> impl Iterator<Item = &CatalogRecord> {
        self.records.iter()
    }

    pub fn datasets(&self) -> impl Iterator<Item = Dataset> + '_ {
        self.by_dataset.keys().copied()
    }

    pub fn has_dataset(&self, dataset: Dataset) -> bool {
        self.by_dataset.contains_key(&dataset)
    }

    /// All record ids belonging to one dataset.
    pub fn ids_of_dataset(&self, dataset: Dataset) -> BTreeSet<String> {
        self.by_dataset
            .get(&dataset)
            .map(|idxs| idxs.iter().map(|&i| self.records[i].id.clone()).collect())
            .unwrap_or_default()
    }

    /// Apply one filter predicate to a base id set; the result is always a
    /// subset of `base`. Ids unknown to the catalog never match.
    pub fn filter_records(&self, base: &BTreeSet<String>, spec: &FilterSpec) -> BTreeSet<String> {
        match spec {
            FilterSpec::Radius { lat, lon, radius_km } => {
                self.spatial_filter(base, self.radius_candidates(*lat, *lon, *radius_km), |r| {
                    haversine_km(*lat, *lon, r.lat, r.lon) <= *radius_km
                })
            }
            FilterSpec::Bbox { min_lat, min_lon, max_lat, max_lon } => {
                self.spatial_filter(base, self.bbox_candidates(*min_lat, *min_lon, *max_lat, *max_lon), |r| {
                    r.lat >= *min_lat && r.lat <= *max_lat && r.lon >= *min_lon && r.lon <= *max_lon
                })
            }
            FilterSpec::DateRange { start, end } => self.scan_filter(base, |r| {
                r.timestamp >= *start && r.timestamp <= *end
            }),
            FilterSpec::Class { classes } => {
                let wanted: BTreeSet<String> = classes.iter().map(|c| normalize_label(c)).collect();
                self.scan_filter(base, |r| r.classes.iter().any(|c| wanted.contains(&normalize_label(c))))
            }
            FilterSpec::LccClass { classes } => {
                let wanted: BTreeSet<String> = classes.iter().map(|c| normalize_label(c)).collect();
                self.scan_filter(base, |r| {
                    r.lcc_labels.iter().any(|c| wanted.contains(&normalize_label(c)))
                })
            }
        }
    }

    fn scan_filter<F: Fn(&CatalogRecord) -> bool>(
        &self,
        base: &BTreeSet<String>,
        pred: F,
    ) -> BTreeSet<String> {
        base.iter()
            .filter(|id| self.record(id).map(&pred).unwrap_or(false))
            .cloned()
            .collect()
    }

    /// Intersect grid candidates with the base set, then apply the exact
    /// predicate. The candidate set must be a superset of true matches.
    fn spatial_filter<F: Fn(&CatalogRecord) -> bool>(
        &self,
        base: &BTreeSet<String>,
        candidates: Vec<usize>,
        pred: F,
    ) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for i in candidates {
            let r = &self.records[i];
            if base.contains(&r.id) && pred(r) {
                out.insert(r.id.clone());
            }
        }
        out
    }

    fn cells_in_range(&self, lat_lo: f64, lat_hi: f64, lon_lo: f64, lon_hi: f64) -> Vec<usize> {
        let lat_lo_cell = (lat_lo.floor() as i32).clamp(-90, 89) as i16;
        let lat_hi_cell = (lat_hi.floor() as i32).clamp(-90, 89) as i16;
        let mut out = Vec::new();
        // Longitude span of 360 or more means every column.
        let full_lon = lon_hi - lon_lo >= 360.0;
        let lon_cells: Vec<i16> = if full_lon {
            (-180..180).map(|c| c as i16).collect()
        } else {
            let lo = lon_lo.floor() as i64;
            let hi = lon_hi.floor() as i64;
            (lo..=hi)
                .map(|c| (((c + 180).rem_euclid(360)) - 180) as i16)
                .collect::<BTreeSet<i16>>()
                .into_iter()
                .collect()
        };
        for lat_cell in lat_lo_cell..=lat_hi_cell {
            for &lon_cell in &lon_cells {
                if let Some(idxs) = self.grid.get(&(lat_cell, lon_cell)) {
                    out.extend_from_slice(idxs);
                }
            }
        }
        out
    }

    fn radius_candidates(&self, lat: f64, lon: f64, radius_km: f64) -> Vec<usize> {
        if !radius_km.is_finite() || radius_km < 0.0 {
            return Vec::new();
        }
        let lat_span = radius_km / KM_PER_DEG_LAT + 1e-9;
        let lat_lo = (lat - lat_span).max(-90.0);
        let lat_hi = (lat + lat_span).min(90.0);
        // Smallest |cos| over the latitude band bounds the longitude span.
        let min_cos = if lat_lo <= 0.0 && lat_hi >= 0.0 {
            lat_lo.to_radians().cos().min(lat_hi.to_radians().cos())
        } else {
            lat_lo.abs().max(lat_hi.abs()).to_radians().cos()
        };
        if min_cos < 1e-6 || lat_hi >= 90.0 || lat_lo <= -90.0 {
            // Near a pole every longitude can be in range.
            return self.cells_in_range(lat_lo, lat_hi, -180.0, 180.0 + 360.0);
        }
        let lon_span = radius_km / (KM_PER_DEG_LAT * min_cos) + 1e-9;
        if lon_span >= 180.0 {
            return self.cells_in_range(lat_lo, lat_hi, -180.0, 180.0 + 360.0);
        }
        self.cells_in_range(lat_lo, lat_hi, lon - lon_span, lon + lon_span)
    }

    fn bbox_candidates(&self, min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Vec<usize> {
        if min_lat > max_lat || min_lon > max_lon {
            return Vec::new();
        }
        self.cells_in_range(min_lat, max_lat, min_lon, max_lon)
    }

    /// Seeded uniform sample without replacement; `n >= len` samples everything.
    pub fn sample_schema(&self, n: usize, seed: u64) -> SchemaSummary {
        use rand::SeedableRng;
        let take = n.min(self.records.len());
        let indices: Vec<usize> = if take == self.records.len() {
            (0..take).collect()
        } else {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut picks = rand::seq::index::sample(&mut rng, self.records.len(), take).into_vec();
            picks.sort_unstable();
            picks
        };

        let mut per_dataset: BTreeMap<Dataset, DatasetSummary> = BTreeMap::new();
        for i in indices {
            let r = &self.records[i];
            let entry = per_dataset.entry(r.dataset).or_insert_with(|| DatasetSummary {
                records: 0,
                classes: BTreeSet::new(),
                lcc_labels: BTreeSet::new(),
                lat_min: r.lat,
                lat_max: r.lat,
                lon_min: r.lon,
                lon_max: r.lon,
                first_timestamp: r.timestamp,
                last_timestamp: r.timestamp,
            });
            entry.records += 1;
            entry.classes.extend(r.classes.iter().cloned());
            entry.lcc_labels.extend(r.lcc_labels.iter().cloned());
            entry.lat_min = entry.lat_min.min(r.lat);
            entry.lat_max = entry.lat_max.max(r.lat);
            entry.lon_min = entry.lon_min.min(r.lon);
            entry.lon_max = entry.lon_max.max(r.lon);
            entry.first_timestamp = entry.first_timestamp.min(r.timestamp);
            entry.last_timestamp = entry.last_timestamp.max(r.timestamp);
        }
        SchemaSummary { sample_size: take, per_dataset }
    }
}

/// Per-dataset schema digest computed from a sample of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub classes: BTreeSet<String>,
    pub lcc_labels: BTreeSet<String>,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub first_timestamp: DateTime<Utc>,
    pub last_timestamp: DateTime<Utc>,
}

/// Sampled catalog summary rendered into generation prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSummary {
    pub sample_size: usize,
    pub per_dataset: BTreeMap<Dataset, DatasetSummary>,
}

impl SchemaSummary {
    /// SQL-flavoured textual rendering for LLM context windows.
    pub fn render_sql_like(&self) -> String {
        let mut out = String::new();
        for (dataset, s) in &self.per_dataset {
            out.push_str(&format!(
                "CREATE TABLE {dataset} (id TEXT, lat REAL, lon REAL, timestamp TEXT, classes TEXT[], lcc_labels TEXT[]);\n"
            ));
            out.push_str(&format!("-- {} sampled rows\n", s.records));
            out.push_str(&format!(
                "-- lat in [{:.4}, {:.4}], lon in [{:.4}, {:.4}]\n",
                s.lat_min, s.lat_max, s.lon_min, s.lon_max
            ));
            out.push_str(&format!(
                "-- timestamps in [{}, {}]\n",
                s.first_timestamp.format("%Y-%m-%d"),
                s.last_timestamp.format("%Y-%m-%d")
            ));
            if !s.classes.is_empty() {
                out.push_str(&format!(
                    "-- classes: {}\n",
                    s.classes.iter().cloned().collect::<Vec<_>>().join(", ")
                ));
            }
            if !s.lcc_labels.is_empty() {
                out.push_str(&format!(
                    "-- lcc_labels: {}\n",
                    s.lcc_labels.iter().cloned().collect::<Vec<_>>().join(", ")
                ));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn ingest_counts_and_rejects() {
        let f = write_jsonl(&[
            r#"{"id":"a1","dataset":"xview1","lat":10.0,"lon":20.0,"timestamp":"2021-05-01T00:00:00Z","classes":["truck"]}"#,
            r#"{"id":"a2","dataset":"xview1","lat":123.0,"lon":20.0,"timestamp":"2021-05-01T00:00:00Z"}"#,
            r#"{"id":"a3","dataset":"fmow","lat":-10.0,"lon":-20.0,"timestamp":"2021-06-01","lcc_labels":["golf-course"]}"#,
            "not json at all",
        ]);
        let (catalog, report) = ingest_records(f.path(), IngestMode::Lenient).unwrap();
        assert_eq!(catalog.len(), 2);
        assert_eq!(report.accepted, 2);
        assert_eq!(report.rejected.len(), 2);
        assert_eq!(report.rejected[0].line, 2);
        assert_eq!(report.rejected[0].reason, "lat out of range");
        assert_eq!(report.rejected[1].line, 4);
        assert!(report.rejected[1].reason.starts_with("invalid json"));
    }

    #[test]
    fn strict_mode_aborts_on_rejects() {
        let f = write_jsonl(&[r#"{"id":"a","dataset":"nope","lat":0,"lon":0,"timestamp":"2021-01-01"}"#]);
        let err = ingest_records(f.path(), IngestMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Ingest(_)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_jsonl(&[
            r#"{"id":"dup","dataset":"xview1","lat":1.0,"lon":2.0,"timestamp":"2021-01-01"}"#,
            r#"{"id":"dup","dataset":"xview2","lat":1.0,"lon":2.0,"timestamp":"2021-01-01"}"#,
        ]);
        let (catalog, report) = ingest_records(f.path(), IngestMode::Lenient).unwrap();
        assert_eq!(catalog.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert!(report.rejected[0].reason.contains("duplicate id"));
    }

    #[test]
    fn reingest_is_deterministic() {
        let records = synth::synthetic_catalog(500, 11);
        let f = write_jsonl(
            &records
                .iter()
                .map(|r| serde_json::to_string(r).unwrap())
                .collect::<Vec<_>>()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
        );
        let (c1, _) = ingest_records(f.path(), IngestMode::Strict).unwrap();
        let (c2, _) = ingest_records(f.path(), IngestMode::Strict).unwrap();
        let s1 = c1.sample_schema(100, 7);
        let s2 = c2.sample_schema(100, 7);
        assert_eq!(s1, s2);
    }

    #[test]
    fn radius_zero_keeps_own_record() {
        let catalog = Catalog::from_records(synth::synthetic_catalog(200, 3));
        let base: BTreeSet<String> = catalog.records().map(|r| r.id.clone()).collect();
        let r = catalog.records().next().unwrap().clone();
        let out = catalog.filter_records(
            &base,
            &FilterSpec::Radius { lat: r.lat, lon: r.lon, radius_km: 0.0 },
        );
        assert!(out.contains(&r.id));
    }

    #[test]
    fn degenerate_date_range_matches_exact_timestamp() {
        let catalog = Catalog::from_records(synth::synthetic_catalog(200, 5));
        let base: BTreeSet<String> = catalog.records().map(|r| r.id.clone()).collect();
        let r = catalog.records().nth(17).unwrap().clone();
        let out = catalog.filter_records(
            &base,
            &FilterSpec::DateRange { start: r.timestamp, end: r.timestamp },
        );
        let brute: BTreeSet<String> = catalog
            .records()
            .filter(|x| x.timestamp == r.timestamp)
            .map(|x| x.id.clone())
            .collect();
        assert_eq!(out, brute);
        assert!(out.contains(&r.id));
    }

    #[test]
    fn unknown_class_names_yield_empty_intersection() {
        let catalog = Catalog::from_records(synth::synthetic_catalog(100, 9));
        let base: BTreeSet<String> = catalog.records().map(|r| r.id.clone()).collect();
        let out = catalog.filter_records(
            &base,
            &FilterSpec::Class { classes: vec!["no-such-class".into()] },
        );
        assert!(out.is_empty());
    }

    #[test]
    fn filters_are_monotone_and_compose_by_intersection() {
        let catalog = Catalog::from_records(synth::synthetic_catalog(400, 21));
        let base: BTreeSet<String> = catalog.records().map(|r| r.id.clone()).collect();
        let a = FilterSpec::Bbox { min_lat: -40.0, min_lon: -90.0, max_lat: 55.0, max_lon: 90.0 };
        let b = FilterSpec::DateRange {
            start: parse_timestamp("2016-01-01").unwrap(),
            end: parse_timestamp_end("2020-12-31").unwrap(),
        };
        let fa = catalog.filter_records(&base, &a);
        let fb = catalog.filter_records(&base, &b);
        let fab = catalog.filter_records(&fa, &b);
        assert!(fa.is_subset(&base));
        assert!(fab.is_subset(&fa));
        let expected: BTreeSet<String> = fa.intersection(&fb).cloned().collect();
        assert_eq!(fab, expected);
    }

    #[test]
    fn sample_schema_seeded_and_subset() {
        let catalog = Catalog::from_records(synth::synthetic_catalog(2000, 77));
        let s1 = catalog.sample_schema(300, 42);
        let s2 = catalog.sample_schema(300, 42);
        assert_eq!(s1, s2);
        let full = catalog.sample_schema(usize::MAX, 0);
        for (ds, summary) in &s1.per_dataset {
            let full_ds = &full.per_dataset[ds];
            assert!(summary.classes.is_subset(&full_ds.classes));
            assert!(summary.lcc_labels.is_subset(&full_ds.lcc_labels));
        }
        assert_eq!(full.sample_size, catalog.len());
    }

    #[test]
    fn schema_rendering_lists_datasets() {
        let catalog = Catalog::from_records(synth::synthetic_catalog(300, 8));
        let text = catalog.sample_schema(300, 1).render_sql_like();
        assert!(text.contains("CREATE TABLE xview1"));
        assert!(text.contains("classes:"));
    }
}
