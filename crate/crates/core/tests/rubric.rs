use clinreason_core::reporting::{aggregate_scores, parse_rater_sheet, CrcStep, RaterSheet, ScoreError, RUBRIC};
use proptest::prelude::*;

fn sheet(rater: &str, scores: &[i64]) -> RaterSheet {
    RaterSheet { rater_id: rater.into(), scores: (1..=16).zip(scores.iter().copied()).collect() }
}

#[test]
fn two_raters_five_and_six() {
    let agg = aggregate_scores(&[sheet("a", &[5; 16]), sheet("b", &[6; 16])]).unwrap();
    for m in agg.per_criterion.values() {
        assert_eq!(m.to_string(), "5.50");
        assert_eq!(m.to_f64(), 5.5);
    }
    assert_eq!(agg.per_dimension[&CrcStep::Reflect].to_string(), "5.50");
    assert_eq!(agg.overall.to_string(), "5.50");
}

#[test]
fn out_of_range_rejected() {
    let mut scores = [4; 16];
    scores[3] = 8;
    let err = aggregate_scores(&[sheet("a", &scores)]).unwrap_err();
    assert!(matches!(err, ScoreError::InvalidScore { criterion: 4, .. }));
    scores[3] = -1;
    assert!(aggregate_scores(&[sheet("a", &scores)]).is_err());
}

#[test]
fn sheet_parsing() {
    let body: Vec<String> = (1..=16).map(|c| format!("\"{c}\": 3")).collect();
    let text = format!("{{\"rater_id\": \"r1\", \"scores\": {{{}}}}}", body.join(", "));
    let s = parse_rater_sheet(&text).unwrap();
    assert_eq!(s.scores.len(), 16);
    assert!(matches!(parse_rater_sheet("{\"rater_id\": 1}"), Err(ScoreError::Parse { .. })));
    let bad = text.replace("\"16\": 3", "\"16\": 8");
    assert!(matches!(parse_rater_sheet(&bad), Err(ScoreError::InvalidScore { criterion: 16, .. })));
}

/// Floating-point reference: criterion mean, then dimension mean of pairs.
fn reference(sheets: &[Vec<i64>]) -> (Vec<f64>, Vec<f64>) {
    let n = sheets.len() as f64;
    let crit: Vec<f64> = (0..16).map(|c| sheets.iter().map(|s| s[c] as f64).sum::<f64>() / n).collect();
    let dims: Vec<f64> = CrcStep::ALL
        .iter()
        .map(|d| {
            let ids: Vec<usize> = RUBRIC.iter().filter(|c| c.dimension == *d).map(|c| c.id as usize - 1).collect();
            ids.iter().map(|&i| crit[i]).sum::<f64>() / ids.len() as f64
        })
        .collect();
    (crit, dims)
}

proptest! {
    #[test]
    fn rater_order_does_not_matter(
        scores in prop::collection::vec(prop::collection::vec(0i64..=7, 16), 1..6),
        seed in any::<u64>(),
    ) {
        let sheets: Vec<RaterSheet> = scores.iter().enumerate().map(|(i, s)| sheet(&format!("r{i}"), s)).collect();
        let mut shuffled = sheets.clone();
        let k = shuffled.len();
        shuffled.rotate_left((seed as usize) % k);
        if seed % 2 == 1 {
            shuffled.reverse();
        }
        let a = aggregate_scores(&sheets).unwrap();
        let b = aggregate_scores(&shuffled).unwrap();
        prop_assert_eq!(&a, &b);

        let (crit, dims) = reference(&scores);
        for (i, m) in a.per_criterion.values().enumerate() {
            prop_assert!((m.to_f64() - crit[i]).abs() < 1e-9);
        }
        for (i, d) in CrcStep::ALL.iter().enumerate() {
            prop_assert!((a.per_dimension[d].to_f64() - dims[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn raising_one_score_never_lowers_means(
        scores in prop::collection::vec(prop::collection::vec(0i64..=6, 16), 1..4),
        criterion in 0usize..16,
    ) {
        let sheets: Vec<RaterSheet> = scores.iter().enumerate().map(|(i, s)| sheet(&format!("r{i}"), s)).collect();
        let mut raised = scores.clone();
        raised[0][criterion] += 1;
        let bumped: Vec<RaterSheet> = raised.iter().enumerate().map(|(i, s)| sheet(&format!("r{i}"), s)).collect();
        let (a, b) = (aggregate_scores(&sheets).unwrap(), aggregate_scores(&bumped).unwrap());
        prop_assert!(b.overall > a.overall);
        for (x, y) in a.per_criterion.values().zip(b.per_criterion.values()) {
            prop_assert!(y >= x);
        }
    }
}

#[test]
fn score_records_survive_the_log() {
    use clinreason_core::session::{decode_log, encode_record, Action, ActionRecord};
    use clinreason_core::Timestamp;

    let scores: Vec<i64> = (0..16).map(|c| c % 8).collect();
    let record = ActionRecord { seq: 0, timestamp: Timestamp(1), actor: "learner".into(), action: Action::SubmitScores(sheet("a", &scores)) };
    let line = encode_record(&record);
    assert_eq!(decode_log(&line).unwrap(), vec![record]);
}
