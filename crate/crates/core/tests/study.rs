//! Result analysis on hand-built and simulated survey responses.

mod common;

use std::collections::BTreeSet;

use careerrec::dataset::Gender;
use careerrec::linalg::Matrix;
use careerrec::pipeline::VariantKind;
use careerrec::study::*;
use common::{normal_equation_oracle, rng};
use rand::seq::SliceRandom;

#[test]
fn scoring_rules_are_exact() {
    assert_eq!(acceptance_score(AcceptanceAnswer::Yes), 1.0);
    assert_eq!(acceptance_score(AcceptanceAnswer::No), 0.0);
    assert_eq!(acceptance_score(AcceptanceAnswer::DontKnow), 0.5);

    use PerceivedDominance::*;
    let table = [
        (Gender::Female, FemaleDominated, 1.0),
        (Gender::Female, MaleDominated, 0.0),
        (Gender::Female, DontKnow, 0.5),
        (Gender::Male, MaleDominated, 1.0),
        (Gender::Male, FemaleDominated, 0.0),
        (Gender::Male, DontKnow, 0.5),
    ];
    for (g, d, want) in table {
        assert_eq!(pgc(g, d), want, "{g} {d:?}");
    }
    for g in [Gender::Nonbinary, Gender::Undisclosed] {
        for d in [FemaleDominated, MaleDominated, DontKnow] {
            assert_eq!(pgc(g, d), 0.5);
        }
    }
}

fn response(id: &str, gender: Gender, variant: VariantKind, answers: [(AcceptanceAnswer, PerceivedDominance); 3]) -> SurveyResponse {
    SurveyResponse {
        session_id: id.into(),
        gender,
        class_standing: ClassStanding::Junior,
        openness: Openness::Open,
        q_stereotype: Likert::new(3).unwrap(),
        q_disparity_personal: Likert::new(2).unwrap(),
        selections: BTreeSet::from(["i001".to_string()]),
        judgments: answers
            .iter()
            .enumerate()
            .map(|(k, &(a, d))| RecommendationJudgment {
                concentration_id: format!("c{k}"),
                acceptance_answer: a,
                perceived_dominance: d,
            })
            .collect(),
        q_use_again: Likert::new(4).unwrap(),
        q_recommend_to_others: Likert::new(5).unwrap(),
        variant_kind: variant,
    }
}

#[test]
fn group_means_and_welch_on_hand_fixture() {
    use AcceptanceAnswer::{DontKnow as Unsure, No, Yes};
    use PerceivedDominance::{DontKnow, FemaleDominated, MaleDominated};
    let rs = vec![
        response("a", Gender::Female, VariantKind::GenderAwareFemale, [
            (Yes, FemaleDominated),
            (Yes, MaleDominated),
            (No, DontKnow),
        ]),
        response("b", Gender::Male, VariantKind::GenderAwareMale, [
            (Yes, MaleDominated),
            (Unsure, MaleDominated),
            (Yes, FemaleDominated),
        ]),
        response("c", Gender::Nonbinary, VariantKind::GenderDebiased, [
            (No, FemaleDominated),
            (Unsure, MaleDominated),
            (No, DontKnow),
        ]),
        response("d", Gender::Female, VariantKind::GenderDebiased, [
            (No, MaleDominated),
            (Yes, FemaleDominated),
            (No, FemaleDominated),
        ]),
    ];
    let r = analyze(&rs).unwrap();
    assert_eq!(r.n_responses, 4);
    assert_eq!(r.n_judgments, 12);

    let aware = [1.0, 1.0, 0.0, 1.0, 0.5, 1.0];
    let debiased = [0.0, 0.5, 0.0, 0.0, 1.0, 0.0];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert_eq!(r.acceptance_by_system[SYSTEM_AWARE].mean, Some(mean(&aware)));
    assert_eq!(r.acceptance_by_system[SYSTEM_DEBIASED].mean, Some(mean(&debiased)));
    assert_eq!(r.acceptance_by_variant[&VariantKind::GenderAwareFemale].mean, Some(2.0 / 3.0));
    assert_eq!(r.acceptance_by_variant[&VariantKind::GenderAwareMale].mean, Some(2.5 / 3.0));
    let welch = r.welch.as_ref().unwrap();
    let oracle = welch_t_test(&aware, &debiased).unwrap();
    assert!((welch.t - oracle.t).abs() < 1e-12);
    assert!((welch.p - oracle.p).abs() < 1e-12);

    // PGC buckets: a -> 1, 0, 0.5; b -> 1, 1, 0; c -> all 0.5; d -> 0, 1, 1.
    let by = |k: &str| r.acceptance_by_pgc[k].clone();
    assert_eq!(by("1").n, 5);
    assert_eq!(by("1").mean, Some((1.0 + 1.0 + 0.5 + 1.0 + 0.0) / 5.0));
    assert_eq!(by("0").n, 3);
    assert_eq!(by("0").mean, Some((1.0 + 1.0 + 0.0) / 3.0));
    assert_eq!(by("0.5").n, 4);

    let u = &r.usability[&VariantKind::GenderDebiased];
    assert_eq!((u.use_again.n, u.use_again.mean), (2, Some(4.0)));
    // Controls that never vary in the fixture are dropped.
    let m = r.model(MODEL_PGC).unwrap();
    assert_eq!(m.dropped, ["gender[undisclosed]", "class_standing", "openness[determined]"]);
}

#[test]
fn single_group_gives_insufficient_welch_note() {
    use AcceptanceAnswer::{No, Yes};
    use PerceivedDominance::DontKnow;
    let rs = vec![response("a", Gender::Nonbinary, VariantKind::GenderDebiased, [
        (Yes, DontKnow),
        (No, DontKnow),
        (Yes, DontKnow),
    ])];
    let r = analyze(&rs).unwrap();
    assert!(r.welch.is_none());
    assert!(r.welch_note.as_deref().unwrap().starts_with("insufficient"));
    assert!(!r.acceptance_by_variant[&VariantKind::GenderAwareMale].sufficient);
    assert!(render_report(&r).contains("insufficient"));
    assert!(analyze(&[]).is_err());
}

#[test]
fn analysis_is_independent_of_response_order() {
    let rs = simulate_responses(&SimulationConfig { n_responses: 80, seed: 4, ..SimulationConfig::default() });
    let base = analyze(&rs).unwrap();
    let mut g = rng(1);
    for _ in 0..5 {
        let mut shuffled = rs.clone();
        shuffled.shuffle(&mut g);
        assert_eq!(analyze(&shuffled).unwrap().to_json().unwrap(), base.to_json().unwrap());
    }
}

#[test]
fn pgc_model_matches_normal_equations_with_controls() {
    let rs = simulate_responses(&SimulationConfig { seed: 2, ..SimulationConfig::default() });
    let r = analyze(&rs).unwrap();
    let fit = r.model(MODEL_PGC).unwrap().fit.as_ref().unwrap();
    assert_eq!(
        fit.names,
        ["intercept", "pgc", "gender[male]", "gender[nonbinary]", "gender[undisclosed]", "class_standing", "openness[determined]"]
    );
    let mut data = Vec::new();
    let mut y = Vec::new();
    for s in &rs {
        for j in &s.judgments {
            data.extend([
                1.0,
                pgc(s.gender, j.perceived_dominance),
                (s.gender == Gender::Male) as u8 as f64,
                (s.gender == Gender::Nonbinary) as u8 as f64,
                (s.gender == Gender::Undisclosed) as u8 as f64,
                s.class_standing.ordinal() as f64,
                (s.openness == Openness::Determined) as u8 as f64,
            ]);
            y.push(acceptance_score(j.acceptance_answer));
        }
    }
    let x = Matrix::from_vec(y.len(), 7, data).unwrap();
    let oracle = normal_equation_oracle(&x, &y);
    for (a, b) in fit.estimates.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    assert_eq!(fit.n, 600);
    assert_eq!(fit.df_resid, 593);

    let inter = r.model(MODEL_STEREOTYPE_X_PGC).unwrap().fit.as_ref().unwrap();
    assert_eq!(&inter.names[..4], ["intercept", "q_stereotype", "pgc", "q_stereotype:pgc"]);
}

#[test]
fn simulated_pgc_effect_is_recovered() {
    let r = analyze(&simulate_responses(&SimulationConfig::default())).unwrap();
    let fit = r.model(MODEL_PGC).unwrap().fit.as_ref().unwrap();
    let i = fit.coefficient("pgc").unwrap();
    let (beta, p) = (fit.estimates[i], fit.p_values[i]);
    assert!(beta > 0.0 && p < 0.05, "beta {beta} p {p}");
    assert!((beta - 0.13).abs() < 0.1);

    let null = analyze(&simulate_responses(&SimulationConfig { pgc_effect: 0.0, ..SimulationConfig::default() })).unwrap();
    let fit0 = null.model(MODEL_PGC).unwrap().fit.as_ref().unwrap();
    let beta0 = fit0.estimates[fit0.coefficient("pgc").unwrap()];
    assert!(beta0.abs() < 0.1, "{beta0}");
}

#[test]
fn report_json_round_trips() {
    let r = analyze(&simulate_responses(&SimulationConfig { n_responses: 50, ..SimulationConfig::default() })).unwrap();
    let back: AnalysisReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn responses_round_trip_through_jsonl() {
    let rs = simulate_responses(&SimulationConfig { n_responses: 20, ..SimulationConfig::default() });
    let mut buf = Vec::new();
    write_responses(&rs, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 20);
    assert_eq!(read_responses(&buf[..]).unwrap(), rs);

    let mut bad = buf.clone();
    bad.extend_from_slice(b"{\"session_id\": 3}\n");
    let err = read_responses(&bad[..]).unwrap_err().to_string();
    assert!(err.contains("21"), "{err}");
}
