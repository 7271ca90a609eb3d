#![no_main]

use clinreason_core::inquiry::{parse_model_reply, Lexicon};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let no_synonyms: &[&str] = &[];
    let lexicon = Lexicon::from_terms([
        ("fever", &["pyrexia"][..]),
        ("headache", no_synonyms),
        ("blackouts", &["syncope"][..]),
        ("neck stiffness", no_synonyms),
    ]);
    let query = vec!["fever".to_string(), "headache".to_string()];
    let _ = parse_model_reply(text, &query, &lexicon);
});
