use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_case, CaseError, CaseRecord};
use crate::inquiry::Lexicon;
use crate::text::tokens;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyNode {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub children: Vec<String>,
}

/// Corpus manifest: the taxonomy plus case files relative to the manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub taxonomy: Vec<TaxonomyNode>,
    pub cases: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn parse_manifest(text: &str) -> Result<Manifest, CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CorpusError::Manifest {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub id: String,
    pub description: String,
    pub taxonomy_path: Vec<String>,
}

impl From<&CaseRecord> for CaseSummary {
    fn from(r: &CaseRecord) -> Self {
        Self { id: r.id.clone(), description: r.description.clone(), taxonomy_path: r.taxonomy_path.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaxonomyListing {
    /// `None` for the virtual root above the top-level specialties.
    pub node: Option<TaxonomyNode>,
    pub children: Vec<TaxonomyNode>,
    pub cases: Vec<CaseSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchHit {
    pub case: CaseSummary,
    pub matched_keywords: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest error at `{path}`: {message}")]
    Manifest { path: String, message: String },
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("case `{case}` is invalid: {source}")]
    Case { case: String, source: CaseError },
    #[error("case `{case}`: taxonomy path does not resolve root-to-leaf: {reason}")]
    CasePath { case: String, reason: String },
    #[error("duplicate case id `{0}`")]
    DuplicateCase(String),
    #[error("taxonomy segment `{segment}` at position {index} not found")]
    NotFound { segment: String, index: usize },
}

/// An immutable, validated corpus snapshot.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    nodes: Vec<TaxonomyNode>,
    index: HashMap<String, usize>,
    roots: Vec<String>,
    cases: BTreeMap<String, CaseRecord>,
    lexicon: Lexicon,
}

impl Corpus {
    /// Validates the taxonomy and every case against it.
    pub fn new(taxonomy: Vec<TaxonomyNode>, cases: Vec<CaseRecord>) -> Result<Self, CorpusError> {
        let index = check_taxonomy(&taxonomy)?;
        let referenced: HashSet<&str> = taxonomy.iter().flat_map(|n| n.children.iter().map(String::as_str)).collect();
        let roots = taxonomy.iter().filter(|n| !referenced.contains(n.id.as_str())).map(|n| n.id.clone()).collect();

        let mut corpus = Corpus { nodes: taxonomy, index, roots, cases: BTreeMap::new(), lexicon: Lexicon::default() };
        for case in cases {
            let report = super::validate_case(&case);
            if !report.is_valid() {
                return Err(CorpusError::Case { case: case.id.clone(), source: CaseError::Value(report.violations) });
            }
            corpus.check_case_path(&case)?;
            if corpus.cases.contains_key(&case.id) {
                return Err(CorpusError::DuplicateCase(case.id));
            }
            corpus.cases.insert(case.id.clone(), case);
        }
        corpus.lexicon = Lexicon::from_cases(corpus.cases.values());
        Ok(corpus)
    }

    /// Loads `manifest.json` and every case it lists from `dir`.
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|source| CorpusError::Io { path: manifest_path.clone(), source })?;
        let manifest = parse_manifest(&text)?;
        let mut cases = Vec::with_capacity(manifest.cases.len());
        for rel in &manifest.cases {
            let path = dir.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io { path: path.clone(), source })?;
            let case = parse_case(&text).map_err(|source| CorpusError::Case { case: rel.clone(), source })?;
            cases.push(case);
        }
        Self::new(manifest.taxonomy, cases)
    }

    pub fn taxonomy(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    pub fn case(&self, id: &str) -> Option<&CaseRecord> {
        self.cases.get(id)
    }

    /// Cases in id order.
    pub fn cases(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.values()
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Checks that `case` would be accepted into this corpus.
    pub fn check_case_path(&self, case: &CaseRecord) -> Result<(), CorpusError> {
        let err = |reason: String| CorpusError::CasePath { case: case.id.clone(), reason };
        let node = self.walk(&case.taxonomy_path).map_err(|e| err(e.to_string()))?;
        match node {
            Some(n) if n.children.is_empty() => Ok(()),
            Some(n) => Err(err(format!("`{}` is not a leaf", n.id))),
            None => Err(err("path is empty".into())),
        }
    }

    /// Returns a new snapshot with `case` added or replaced.
    pub fn with_case(&self, case: CaseRecord) -> Result<Self, CorpusError> {
        let mut cases: Vec<_> = self.cases.values().filter(|c| c.id != case.id).cloned().collect();
        cases.push(case);
        Self::new(self.nodes.clone(), cases)
    }

    fn walk(&self, path: &[String]) -> Result<Option<&TaxonomyNode>, CorpusError> {
        let mut current: Option<&TaxonomyNode> = None;
        for (index, segment) in path.iter().enumerate() {
            let allowed = match current {
                None => self.roots.contains(segment),
                Some(node) => node.children.contains(segment),
            };
            let next = self.index.get(segment).map(|&i| &self.nodes[i]);
            match next {
                Some(n) if allowed => current = Some(n),
                _ => return Err(CorpusError::NotFound { segment: segment.clone(), index }),
            }
        }
        Ok(current)
    }

    fn node(&self, id: &str) -> &TaxonomyNode {
        &self.nodes[self.index[id]]
    }

    /// Resolves a root-anchored path. The empty path lists the top-level
    /// nodes and no cases.
    pub fn resolve_taxonomy(&self, path: &[String]) -> Result<TaxonomyListing, CorpusError> {
        let node = self.walk(path)?;
        let Some(node) = node else {
            return Ok(TaxonomyListing {
                node: None,
                children: self.roots.iter().map(|id| self.node(id).clone()).collect(),
                cases: Vec::new(),
            });
        };
        Ok(TaxonomyListing {
            node: Some(node.clone()),
            children: node.children.iter().map(|id| self.node(id).clone()).collect(),
            cases: self
                .cases
                .values()
                .filter(|c| c.taxonomy_path.starts_with(path))
                .map(CaseSummary::from)
                .collect(),
        })
    }

    /// Ranks cases by how many distinct query keywords occur as tokens in
    /// their description or narrative; ties resolve by case id.
    pub fn search_cases(&self, query: &str, path_filter: Option<&[String]>) -> Vec<SearchHit> {
        let keywords: BTreeSet<String> = tokens(query).into_iter().collect();
        let mut hits: Vec<SearchHit> = self
            .cases
            .values()
            .filter(|c| path_filter.is_none_or(|p| c.taxonomy_path.starts_with(p)))
            .filter_map(|c| {
                let haystack: HashSet<String> =
                    tokens(&c.description).into_iter().chain(tokens(&c.initial_narrative)).collect();
                let matched = keywords.iter().filter(|k| haystack.contains(*k)).count();
                (keywords.is_empty() || matched > 0)
                    .then(|| SearchHit { case: CaseSummary::from(c), matched_keywords: matched })
            })
            .collect();
        hits.sort_by(|a, b| b.matched_keywords.cmp(&a.matched_keywords).then_with(|| a.case.id.cmp(&b.case.id)));
        hits
    }
}

fn check_taxonomy(nodes: &[TaxonomyNode]) -> Result<HashMap<String, usize>, CorpusError> {
    let bad = |m: String| Err(CorpusError::Taxonomy(m));
    let mut index = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if !super::is_safe_id(&n.id) {
            return bad(format!("node {i} has an invalid id `{}`", n.id));
        }
        if index.insert(n.id.clone(), i).is_some() {
            return bad(format!("node id `{}` repeats", n.id));
        }
    }

    let mut parent: HashMap<&str, &str> = HashMap::new();
    for n in nodes {
        let mut labels = HashSet::new();
        for child in &n.children {
            let Some(&ci) = index.get(child) else {
                return bad(format!("`{}` lists unknown child `{child}`", n.id));
            };
            if let Some(prev) = parent.insert(child.as_str(), n.id.as_str()) {
                return bad(format!("`{child}` has two parents: `{prev}` and `{}`", n.id));
            }
            if !labels.insert(nodes[ci].label.as_str()) {
                return bad(format!("`{}` has two children labelled `{}`", n.id, nodes[ci].label));
            }
        }
    }

    let mut root_labels = HashSet::new();
    for n in nodes.iter().filter(|n| !parent.contains_key(n.id.as_str())) {
        if !root_labels.insert(n.label.as_str()) {
            return bad(format!("two top-level nodes labelled `{}`", n.label));
        }
    }

    // Every node must reach a root by following parents; a cycle never does.
    for n in nodes {
        let mut seen = HashSet::new();
        let mut cur = n.id.as_str();
        while let Some(&p) = parent.get(cur) {
            if !seen.insert(cur) {
                return bad(format!("cycle through `{}`", n.id));
            }
            cur = p;
        }
    }
    Ok(index)
}
