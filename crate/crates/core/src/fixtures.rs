//! Deterministic stand-ins for live backends: a gazetteer instead of
//! geocoding, and token-overlap retrieval over small document corpora
//! instead of embedding search.
//!
//! On disk a fixture bundle is a directory of JSONL files:
//! `gazetteer.jsonl` with `{name, lat, lon}` lines and one `{id, title, text}`
//! corpus file per retrieval tool (`documents`, `wiki`, `arxiv`, `modelzoo`,
//! `web`).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One gazetteer row mapping a place name to coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// One retrievable document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
}

/// The corpora a fixture bundle must carry, one per retrieval tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CorpusKind {
    Documents,
    Wiki,
    Arxiv,
    Modelzoo,
    Web,
}

impl CorpusKind {
    pub const ALL: [CorpusKind; 5] = [
        CorpusKind::Documents,
        CorpusKind::Wiki,
        CorpusKind::Arxiv,
        CorpusKind::Modelzoo,
        CorpusKind::Web,
    ];

    pub fn file_name(&self) -> &'static str {
        match self {
            CorpusKind::Documents => "documents.jsonl",
            CorpusKind::Wiki => "wiki.jsonl",
            CorpusKind::Arxiv => "arxiv.jsonl",
            CorpusKind::Modelzoo => "modelzoo.jsonl",
            CorpusKind::Web => "web.jsonl",
        }
    }
}

/// Immutable fixture data backing the simulated tools.
#[derive(Debug, Clone)]
pub struct FixtureBundle {
    gazetteer_entries: Vec<GazetteerEntry>,
    gazetteer_index: BTreeMap<String, (f64, f64)>,
    corpora: BTreeMap<CorpusKind, Vec<Document>>,
}

fn normalize_place(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn tokenize(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

impl FixtureBundle {
    pub fn new(gazetteer: Vec<GazetteerEntry>, corpora: BTreeMap<CorpusKind, Vec<Document>>) -> Result<Self> {
        for kind in CorpusKind::ALL {
            if !corpora.contains_key(&kind) {
                return Err(Error::Config(format!("missing fixture corpus {}", kind.file_name())));
            }
        }
        let gazetteer_index = gazetteer
            .iter()
            .map(|e| (normalize_place(&e.name), (e.lat, e.lon)))
            .collect();
        Ok(Self { gazetteer_entries: gazetteer, gazetteer_index, corpora })
    }

    /// Load a bundle from a fixture directory. Every expected file must be
    /// present; a missing one is a configuration error naming the file.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let gaz_path = dir.join("gazetteer.jsonl");
        if !gaz_path.is_file() {
            return Err(Error::Config(format!("missing fixture file {}", gaz_path.display())));
        }
        let gazetteer = read_jsonl::<GazetteerEntry>(&gaz_path)?;
        let mut corpora = BTreeMap::new();
        for kind in CorpusKind::ALL {
            let path = dir.join(kind.file_name());
            if !path.is_file() {
                return Err(Error::Config(format!("missing fixture file {}", path.display())));
            }
            corpora.insert(kind, read_jsonl::<Document>(&path)?);
        }
        Self::new(gazetteer, corpora)
    }

    /// Write the bundle back out as a fixture directory.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut gaz = std::io::BufWriter::new(std::fs::File::create(dir.join("gazetteer.jsonl"))?);
        for entry in &self.gazetteer_entries {
            serde_json::to_writer(&mut gaz, entry)?;
            writeln!(gaz)?;
        }
        for (kind, docs) in &self.corpora {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(kind.file_name()))?);
            for d in docs {
                serde_json::to_writer(&mut f, d)?;
                writeln!(f)?;
            }
        }
        Ok(())
    }

    /// Resolve a place name; matching ignores case and internal whitespace.
    pub fn resolve_place(&self, name: &str) -> Option<(f64, f64)> {
        self.gazetteer_index.get(&normalize_place(name)).copied()
    }

    /// Place names as written in the gazetteer, in file order.
    pub fn place_names(&self) -> Vec<&str> {
        self.gazetteer_entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn corpus(&self, kind: CorpusKind) -> &[Document] {
        self.corpora.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Token-overlap retrieval: score each document by the number of distinct
    /// query tokens appearing in its title or text, return the top `k` with a
    /// positive score. Ties break on ascending document id, so identical
    /// queries always retrieve identical lists.
    pub fn retrieve(&self, kind: CorpusKind, query: &str, k: usize) -> Vec<&Document> {
        let query_tokens = tokenize(query);
        if query_tokens.is_empty() {
            return Vec::new();
        }
        let mut scored: Vec<(usize, &Document)> = self
            .corpus(kind)
            .iter()
            .map(|doc| {
                let doc_tokens = tokenize(&format!("{} {}", doc.title, doc.text));
                (query_tokens.intersection(&doc_tokens).count(), doc)
            })
            .filter(|(score, _)| *score > 0)
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        scored.into_iter().take(k).map(|(_, d)| d).collect()
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            Error::Config(format!("{}:{}: {e}", path.display(), idx + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Build the built-in synthetic fixture bundle: the anchor-place gazetteer
/// plus small hand-written corpora covering each retrieval tool.
pub fn synthetic_fixtures() -> FixtureBundle {
    let gazetteer = crate::catalog::synth::PLACES
        .iter()
        .map(|&(name, lat, lon)| GazetteerEntry { name: name.to_string(), lat, lon })
        .collect();

    let mut corpora = BTreeMap::new();
    corpora.insert(CorpusKind::Documents, builtin_docs());
    corpora.insert(CorpusKind::Wiki, builtin_wiki());
    corpora.insert(CorpusKind::Arxiv, builtin_arxiv());
    corpora.insert(CorpusKind::Modelzoo, builtin_modelzoo());
    corpora.insert(CorpusKind::Web, builtin_web());
    FixtureBundle::new(gazetteer, corpora).expect("builtin corpora are complete")
}

fn doc(id: &str, title: &str, text: &str) -> Document {
    Document { id: id.into(), title: title.into(), text: text.into() }
}

fn builtin_docs() -> Vec<Document> {
    vec![
        doc("doc-001", "Sentinel-1 GRD product guide", "Ground range detected products from the Sentinel-1 C-band SAR constellation, with radiometric calibration notes for vessel detection workflows."),
        doc("doc-002", "Annotation manual for building damage", "Grading scheme for building damage assessment: no damage, minor damage, major damage, destroyed. Applies to pre and post disaster imagery pairs."),
        doc("doc-003", "Coordinate conventions", "All records carry WGS84 latitude and longitude of the image center point together with an acquisition timestamp in UTC."),
        doc("doc-004", "Fishing vessel detection handbook", "Dark vessel detection on SAR imagery for monitoring illegal fishing activity, including grd preprocessing and threshold selection."),
        doc("doc-005", "Land cover label taxonomy", "Land cover classification labels include urban fabric, arable land, pastures, coniferous forest, water bodies, and golf course."),
        doc("doc-006", "Change detection cookbook", "Recipes for change detection heatmaps over repeated acquisitions, with tiling and alignment guidance."),
        doc("doc-007", "Data export formats", "Result sets export as JSONL with one record id per line; catalogs use snake case field names."),
        doc("doc-008", "Temporal filtering notes", "Date range filters are inclusive on both ends and interpret bare dates as whole days in UTC."),
    ]
}

fn builtin_wiki() -> Vec<Document> {
    vec![
        doc("wiki-001", "Earth observation", "Earth observation is the gathering of information about the physical, chemical and biological systems of the planet via satellite imagery."),
        doc("wiki-002", "Synthetic-aperture radar", "Synthetic aperture radar is a form of radar used to create two dimensional images of landscapes, independent of weather and daylight."),
        doc("wiki-003", "Land cover", "Land cover is the physical material at the surface of Earth, such as grass, asphalt, trees, bare ground and water."),
        doc("wiki-004", "Functional map of the world", "A multi label land use dataset covering buildings and land use categories from over 200 countries."),
        doc("wiki-005", "Object detection", "Object detection is a computer technology that detects instances of semantic objects of a certain class in digital images."),
        doc("wiki-006", "Geocoding", "Geocoding is the process of converting a place name or address into geographic coordinates."),
    ]
}

fn builtin_arxiv() -> Vec<Document> {
    vec![
        doc("arxiv-001", "SkyScript: a large semantic tag corpus for remote sensing", "SkyScript covers 29 thousand distinct semantic tags across remote sensing imagery; roughly four percent of image tag pairs was manually checked for tag accuracy."),
        doc("arxiv-002", "Foundation models for Earth observation", "A survey of foundation models applied to Earth observation applications, from detection to retrieval."),
        doc("arxiv-003", "Benchmarking long-horizon agents", "Long horizon benchmarks require multi tool execution traces rather than single step question answer pairs."),
        doc("arxiv-004", "Self-consistency improves chain of thought", "Sampling multiple solutions and taking the majority answer improves accuracy on reasoning benchmarks."),
        doc("arxiv-005", "Vessel detection from spaceborne SAR", "Deep detectors for maritime vessels in synthetic aperture radar scenes, evaluated on GRD products."),
    ]
}

fn builtin_modelzoo() -> Vec<Document> {
    vec![
        doc("model-001", "sar-vessel-detector-v2", "Detector best suited for vessels on SAR imagery. Trained on Sentinel-1 GRD scenes; strong recall on fishing vessels."),
        doc("model-002", "optical-vehicle-detector", "Detector for vehicle categories such as small car, truck and bus on high resolution optical imagery."),
        doc("model-003", "lcc-multilabel-resnet", "Multi label land cover classification model covering urban fabric, forest, water bodies and golf course labels."),
        doc("model-004", "building-damage-grader", "Classifier grading building damage from pre and post disaster image pairs."),
        doc("model-005", "change-detection-unet", "Segmentation model producing change detection masks between two acquisitions."),
    ]
}

fn builtin_web() -> Vec<Document> {
    vec![
        doc("https://example.org/eo/foundation-models", "Foundation models in Earth Observation apps", "Overview article on foundation models in Earth observation applications and geospatial copilots."),
        doc("https://example.org/eo/sar-basics", "SAR imagery basics", "Introduction to synthetic aperture radar imagery for maritime monitoring."),
        doc("https://example.org/eo/open-datasets", "Open Earth observation datasets", "A directory of open satellite imagery datasets with coordinates and time metadata."),
        doc("https://example.org/eo/illegal-fishing", "Tracking illegal fishing from space", "How dark vessel detection on radar scenes supports fisheries enforcement."),
        doc("https://example.org/eo/land-cover-mapping", "Land cover mapping guide", "Practical guide to land cover classification mapping workflows."),
        doc("https://example.org/eo/damage-assessment", "Rapid damage assessment", "Building damage assessment after natural disasters using paired imagery."),
    ]
}
