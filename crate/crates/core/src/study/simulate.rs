//! Synthetic survey responses with a known acceptance-on-PGC effect.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    pgc, AcceptanceAnswer, ClassStanding, Likert, Openness, PerceivedDominance, RecommendationJudgment,
    SurveyResponse, JUDGMENTS_PER_RESPONSE,
};
use crate::dataset::Gender;
use crate::ncf::rng_for;
use crate::pipeline::VariantKind;

/// Responses in which expected acceptance is `base_acceptance +
/// pgc_effect * PGC` and nothing else matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_responses: usize,
    pub pgc_effect: f64,
    pub base_acceptance: f64,
    pub dont_know_rate: f64,
    /// Share of judgments whose perceived dominance is `dont_know`.
    pub unsure_dominance_rate: f64,
    pub n_concentrations: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_responses: 200,
            pgc_effect: 0.13,
            base_acceptance: 0.23,
            dont_know_rate: 0.1,
            unsure_dominance_rate: 0.1,
            n_concentrations: 20,
            seed: 0,
        }
    }
}

fn likert<R: Rng>(rng: &mut R) -> Likert {
    Likert::new(rng.random_range(1..=5)).unwrap()
}

pub fn simulate_responses(c: &SimulationConfig) -> Vec<SurveyResponse> {
    let mut rng = rng_for(c.seed, 0);
    let concentrations: Vec<String> = (0..c.n_concentrations.max(JUDGMENTS_PER_RESPONSE))
        .map(|k| format!("c{k:02}"))
        .collect();
    let genders = [
        (Gender::Female, 0.45),
        (Gender::Male, 0.45),
        (Gender::Nonbinary, 0.05),
        (Gender::Undisclosed, 0.05),
    ];
    (0..c.n_responses)
        .map(|i| {
            let mut roll: f64 = rng.random();
            let mut gender = Gender::Undisclosed;
            for (g, w) in genders {
                if roll < w {
                    gender = g;
                    break;
                }
                roll -= w;
            }
            let variant_kind = match VariantKind::aware_for(gender) {
                Some(aware) if rng.random_bool(0.5) => aware,
                _ => VariantKind::GenderDebiased,
            };
            let judgments = concentrations
                .choose_multiple(&mut rng, JUDGMENTS_PER_RESPONSE)
                .map(|cid| {
                    let perceived = if rng.random_bool(c.unsure_dominance_rate) {
                        PerceivedDominance::DontKnow
                    } else if rng.random_bool(0.5) {
                        PerceivedDominance::FemaleDominated
                    } else {
                        PerceivedDominance::MaleDominated
                    };
                    let target = c.base_acceptance + c.pgc_effect * pgc(gender, perceived);
                    let p_yes = ((target - 0.5 * c.dont_know_rate) / (1.0 - c.dont_know_rate)).clamp(0.0, 1.0);
                    let acceptance_answer = if rng.random_bool(c.dont_know_rate) {
                        AcceptanceAnswer::DontKnow
                    } else if rng.random_bool(p_yes) {
                        AcceptanceAnswer::Yes
                    } else {
                        AcceptanceAnswer::No
                    };
                    RecommendationJudgment {
                        concentration_id: cid.clone(),
                        acceptance_answer,
                        perceived_dominance: perceived,
                    }
                })
                .collect();
            let n_sel = rng.random_range(1..=10);
            let selections: BTreeSet<String> = (0..n_sel).map(|_| format!("i{:03}", rng.random_range(0..48))).collect();
            SurveyResponse {
                session_id: format!("sim{i:05}"),
                gender,
                class_standing: *ClassStanding::ALL.choose(&mut rng).unwrap(),
                openness: if rng.random_bool(0.5) { Openness::Open } else { Openness::Determined },
                q_stereotype: likert(&mut rng),
                q_disparity_personal: likert(&mut rng),
                selections,
                judgments,
                q_use_again: likert(&mut rng),
                q_recommend_to_others: likert(&mut rng),
                variant_kind,
            }
        })
        .collect()
}
