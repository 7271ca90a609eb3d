use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{denial_sentence, InquiryResponse, SymptomVerdict, Verdict};
use crate::case::{CaseRecord, Polarity};
use crate::text::{normalize, tokens};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    /// Normalized tokens of the surface form.
    pub form: Vec<String>,
    pub canonical: String,
}

/// Maps every finding term and synonym in a corpus to its canonical term.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    by_first_token: HashMap<String, Vec<usize>>,
    terms: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_cases<'a>(cases: impl IntoIterator<Item = &'a CaseRecord>) -> Self {
        Self::from_terms(cases.into_iter().flat_map(|c| c.findings.iter().map(|f| (f.term.as_str(), f.synonyms.as_slice()))))
    }

    /// Builds a lexicon from `(term, synonyms)` pairs. When a surface form
    /// maps to several canonical terms, the term spelled identically to the
    /// form wins, otherwise the lexicographically smallest.
    pub fn from_terms<'a, S: AsRef<str> + 'a>(pairs: impl IntoIterator<Item = (&'a str, &'a [S])>) -> Self {
        let mut forms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut terms = BTreeSet::new();
        for (term, synonyms) in pairs {
            let canonical = normalize(term);
            if canonical.is_empty() {
                continue;
            }
            terms.insert(canonical.clone());
            forms.entry(canonical.clone()).or_default().insert(canonical.clone());
            for syn in synonyms {
                let s = normalize(syn.as_ref());
                if !s.is_empty() {
                    forms.entry(s).or_default().insert(canonical.clone());
                }
            }
        }

        let mut lexicon = Lexicon { terms, ..Default::default() };
        for (form, candidates) in forms {
            let canonical = if candidates.contains(&form) {
                form.clone()
            } else {
                candidates.into_iter().next().expect("non-empty candidate set")
            };
            let toks: Vec<String> = form.split(' ').map(str::to_owned).collect();
            lexicon.by_first_token.entry(toks[0].clone()).or_default().push(lexicon.entries.len());
            lexicon.entries.push(LexiconEntry { form: toks, canonical });
        }
        lexicon
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Canonical terms in sorted order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    /// Canonical term for an exact surface form, if any.
    pub fn canonicalize(&self, form: &str) -> Option<&str> {
        let form = normalize(form);
        let first = form.split(' ').next()?;
        self.by_first_token
            .get(first)?
            .iter()
            .map(|&i| &self.entries[i])
            .find(|e| e.form.join(" ") == form)
            .map(|e| e.canonical.as_str())
    }
}

/// Canonical terms mentioned in `raw_text`, deduplicated, ordered by first
/// occurrence. Forms starting at the same token order longest first.
pub fn extract_terms(raw_text: &str, lexicon: &Lexicon) -> Vec<String> {
    let toks = tokens(raw_text);
    // canonical -> (position, -form length)
    let mut first: HashMap<&str, (usize, isize)> = HashMap::new();
    for (pos, tok) in toks.iter().enumerate() {
        let Some(candidates) = lexicon.by_first_token.get(tok) else { continue };
        for &i in candidates {
            let entry = &lexicon.entries[i];
            if toks[pos..].starts_with(&entry.form) {
                let key = (pos, -(entry.form.len() as isize));
                first.entry(entry.canonical.as_str()).and_modify(|k| *k = (*k).min(key)).or_insert(key);
            }
        }
    }
    let mut found: Vec<(&str, (usize, isize))> = first.into_iter().collect();
    found.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    found.into_iter().map(|(t, _)| t.to_owned()).collect()
}

pub fn evaluate_symptom(record: &CaseRecord, term: &str) -> SymptomVerdict {
    match record.finding(term) {
        Some(f) if f.polarity == Polarity::Present => {
            SymptomVerdict { term: term.to_owned(), verdict: Verdict::Present, details: f.details.clone() }
        }
        Some(_) => SymptomVerdict { term: term.to_owned(), verdict: Verdict::Denied, details: denial_sentence(term) },
        None => SymptomVerdict { term: term.to_owned(), verdict: Verdict::NotInRecord, details: String::new() },
    }
}

/// Answers a learner question from the structured record alone.
pub fn answer_inquiry(record: &CaseRecord, lexicon: &Lexicon, raw_text: &str) -> InquiryResponse {
    let verdicts = extract_terms(raw_text, lexicon).iter().map(|t| evaluate_symptom(record, t)).collect();
    InquiryResponse::with_verdicts(verdicts)
}
