//! Survey schema and the result-analysis pipeline: acceptance scoring,
//! perceived gender conformity (PGC), group means, Welch's t-test and GLMs
//! with demographic controls.

mod simulate;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Gender;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pipeline::VariantKind;

pub use simulate::{simulate_responses, SimulationConfig};
pub use stats::{glm_fit, t_two_sided_p, welch_t_test, GlmFit, TTest};

/// Recommendations judged per participant.
pub const JUDGMENTS_PER_RESPONSE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassStanding {
    Freshman,
    Sophomore,
    Junior,
    Senior,
    Graduate,
}

impl ClassStanding {
    pub const ALL: [ClassStanding; 5] = [
        ClassStanding::Freshman,
        ClassStanding::Sophomore,
        ClassStanding::Junior,
        ClassStanding::Senior,
        ClassStanding::Graduate,
    ];

    /// Ordinal code 1..=5, used as the age proxy in the GLM controls.
    pub fn ordinal(self) -> u8 {
        self as u8 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Openness {
    Open,
    Determined,
}

/// A 5-point Likert answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Likert(u8);

impl Likert {
    pub fn new(v: u8) -> Result<Self> {
        if (1..=5).contains(&v) {
            Ok(Likert(v))
        } else {
            Err(Error::invalid(format!("Likert value {v} outside 1..=5")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Likert {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Likert::new(v)
    }
}

impl From<Likert> for u8 {
    fn from(l: Likert) -> u8 {
        l.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceAnswer {
    Yes,
    No,
    DontKnow,
}

impl AcceptanceAnswer {
    pub const ALL: [AcceptanceAnswer; 3] =
        [AcceptanceAnswer::Yes, AcceptanceAnswer::No, AcceptanceAnswer::DontKnow];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceivedDominance {
    FemaleDominated,
    MaleDominated,
    DontKnow,
}

impl PerceivedDominance {
    pub const ALL: [PerceivedDominance; 3] = [
        PerceivedDominance::FemaleDominated,
        PerceivedDominance::MaleDominated,
        PerceivedDominance::DontKnow,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationJudgment {
    pub concentration_id: String,
    pub acceptance_answer: AcceptanceAnswer,
    pub perceived_dominance: PerceivedDominance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub session_id: String,
    pub gender: Gender,
    pub class_standing: ClassStanding,
    pub openness: Openness,
    pub q_stereotype: Likert,
    pub q_disparity_personal: Likert,
    pub selections: BTreeSet<String>,
    pub judgments: Vec<RecommendationJudgment>,
    pub q_use_again: Likert,
    pub q_recommend_to_others: Likert,
    pub variant_kind: VariantKind,
}

impl SurveyResponse {
    pub fn validate(&self) -> Result<()> {
        if self.judgments.len() != JUDGMENTS_PER_RESPONSE {
            return Err(Error::invalid(format!(
                "response {} has {} judgments, expected {JUDGMENTS_PER_RESPONSE}",
                self.session_id,
                self.judgments.len()
            )));
        }
        Ok(())
    }
}

/// Read one response per line; blank lines are skipped.
pub fn read_responses<R: BufRead>(reader: R) -> Result<Vec<SurveyResponse>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SurveyResponse = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        r.validate().map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn load_responses(path: impl AsRef<Path>) -> Result<Vec<SurveyResponse>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_responses(std::io::BufReader::new(f))
}

pub fn write_responses<W: Write>(responses: &[SurveyResponse], mut w: W) -> Result<()> {
    for r in responses {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn acceptance_score(a: AcceptanceAnswer) -> f64 {
    match a {
        AcceptanceAnswer::Yes => 1.0,
        AcceptanceAnswer::No => 0.0,
        AcceptanceAnswer::DontKnow => 0.5,
    }
}

/// Perceived gender conformity of a recommended major: 1 when its perceived
/// dominant gender matches the participant's, 0 when it conflicts, 0.5 when
/// either side is undetermined.
pub fn pgc(participant: Gender, perceived: PerceivedDominance) -> f64 {
    match (participant, perceived) {
        (Gender::Female, PerceivedDominance::FemaleDominated)
        | (Gender::Male, PerceivedDominance::MaleDominated) => 1.0,
        (Gender::Female, PerceivedDominance::MaleDominated)
        | (Gender::Male, PerceivedDominance::FemaleDominated) => 0.0,
        _ => 0.5,
    }
}

/// Size and mean of a group. Groups under two observations are flagged
/// insufficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub n: usize,
    pub mean: Option<f64>,
    pub sufficient: bool,
}

impl GroupStat {
    fn of(values: &[f64]) -> Self {
        GroupStat {
            n: values.len(),
            mean: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
            sufficient: values.len() >= 2,
        }
    }
}

impl fmt::Display for GroupStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.mean, self.sufficient) {
            (Some(m), true) => write!(f, "{m:.3} (n={})", self.n),
            (Some(m), false) => write!(f, "{m:.3} (n={}, insufficient)", self.n),
            (None, _) => write!(f, "- (n=0, insufficient)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Usability {
    pub use_again: GroupStat,
    pub recommend_to_others: GroupStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    /// Controls removed because they were constant in the data.
    pub dropped: Vec<String>,
    pub fit: Option<GlmFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n_responses: usize,
    pub n_judgments: usize,
    pub acceptance_by_variant: BTreeMap<VariantKind, GroupStat>,
    /// Both gender-aware models pooled against the debiased one.
    pub acceptance_by_system: BTreeMap<String, GroupStat>,
    /// Welch test of gender-aware minus gender-debiased acceptance.
    pub welch: Option<TTest>,
    pub welch_note: Option<String>,
    pub acceptance_by_pgc: BTreeMap<String, GroupStat>,
    pub models: Vec<ModelReport>,
    pub usability: BTreeMap<VariantKind, Usability>,
}

impl AnalysisReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const SYSTEM_AWARE: &str = "gender_aware";
pub const SYSTEM_DEBIASED: &str = "gender_debiased";

pub const MODEL_STEREOTYPE: &str = "acceptance ~ q_stereotype";
pub const MODEL_DISPARITY: &str = "acceptance ~ q_disparity_personal";
pub const MODEL_PGC: &str = "acceptance ~ pgc";
pub const MODEL_STEREOTYPE_X_PGC: &str = "acceptance ~ q_stereotype * pgc";
pub const MODEL_DISPARITY_X_PGC: &str = "acceptance ~ q_disparity_personal * pgc";

/// One judged recommendation with its participant-level covariates.
struct Row {
    acceptance: f64,
    pgc: f64,
    stereotype: f64,
    disparity: f64,
    gender: Gender,
    class_standing: f64,
    determined: f64,
}

fn pgc_key(v: f64) -> &'static str {
    if v == 0.0 {
        "0"
    } else if v == 1.0 {
        "1"
    } else {
        "0.5"
    }
}

type Column = (String, Box<dyn Fn(&Row) -> f64>);

fn control_columns() -> Vec<Column> {
    let mut cols: Vec<Column> = Vec::new();
    for g in [Gender::Male, Gender::Nonbinary, Gender::Undisclosed] {
        cols.push((
            format!("gender[{g}]"),
            Box::new(move |r: &Row| if r.gender == g { 1.0 } else { 0.0 }),
        ));
    }
    cols.push(("class_standing".into(), Box::new(|r: &Row| r.class_standing)));
    cols.push(("openness[determined]".into(), Box::new(|r: &Row| r.determined)));
    cols
}

fn predictor_columns(model: &str) -> Vec<Column> {
    let stereo: Column = ("q_stereotype".into(), Box::new(|r: &Row| r.stereotype));
    let disp: Column = ("q_disparity_personal".into(), Box::new(|r: &Row| r.disparity));
    let p: Column = ("pgc".into(), Box::new(|r: &Row| r.pgc));
    match model {
        MODEL_STEREOTYPE => vec![stereo],
        MODEL_DISPARITY => vec![disp],
        MODEL_PGC => vec![p],
        MODEL_STEREOTYPE_X_PGC => vec![
            stereo,
            p,
            ("q_stereotype:pgc".into(), Box::new(|r: &Row| r.stereotype * r.pgc)),
        ],
        MODEL_DISPARITY_X_PGC => vec![
            disp,
            p,
            ("q_disparity_personal:pgc".into(), Box::new(|r: &Row| r.disparity * r.pgc)),
        ],
        _ => unreachable!("unknown model {model}"),
    }
}

fn fit_model(name: &str, rows: &[Row]) -> ModelReport {
    let mut names = vec!["intercept".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; rows.len()]];
    let mut dropped = Vec::new();
    let predictors = predictor_columns(name);
    let n_predictors = predictors.len();
    for (i, (col_name, f)) in predictors.into_iter().chain(control_columns()).enumerate() {
        let values: Vec<f64> = rows.iter().map(&*f).collect();
        let constant = values.iter().all(|&v| v == values[0]);
        if constant && i >= n_predictors {
            dropped.push(col_name);
            continue;
        }
        names.push(col_name);
        cols.push(values);
    }
    let k = cols.len();
    let mut data = Vec::with_capacity(rows.len() * k);
    for r in 0..rows.len() {
        data.extend(cols.iter().map(|c| c[r]));
    }
    let y: Vec<f64> = rows.iter().map(|r| r.acceptance).collect();
    let fit = Matrix::from_vec(rows.len(), k, data).and_then(|x| glm_fit(&x, &y, &names));
    let (fit, error) = match fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ModelReport {
        name: name.to_string(),
        dropped,
        fit,
        error,
    }
}

/// Run the full result analysis. The output does not depend on the order of
/// `responses`.
pub fn analyze(responses: &[SurveyResponse]) -> Result<AnalysisReport> {
    if responses.is_empty() {
        return Err(Error::Empty("no survey responses to analyze".into()));
    }
    for r in responses {
        r.validate()?;
    }
    let mut sorted: Vec<(String, &SurveyResponse)> = responses
        .iter()
        .map(|r| Ok((serde_json::to_string(r)?, r)))
        .collect::<Result<_>>()?;
    sorted.sort_by(|a, b| a.1.session_id.cmp(&b.1.session_id).then_with(|| a.0.cmp(&b.0)));
    let sorted: Vec<&SurveyResponse> = sorted.into_iter().map(|(_, r)| r).collect();

    let mut rows = Vec::new();
    let mut by_variant: BTreeMap<VariantKind, Vec<f64>> = BTreeMap::new();
    let mut by_system: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut by_pgc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut use_again: BTreeMap<VariantKind, Vec<f64>> = BTreeMap::new();
    let mut recommend: BTreeMap<VariantKind, Vec<f64>> = BTreeMap::new();
    for k in VariantKind::ALL {
        by_variant.insert(k, Vec::new());
        use_again.insert(k, Vec::new());
        recommend.insert(k, Vec::new());
    }
    for s in [SYSTEM_AWARE, SYSTEM_DEBIASED] {
        by_system.insert(s.to_string(), Vec::new());
    }
    for key in ["0", "0.5", "1"] {
        by_pgc.insert(key.to_string(), Vec::new());
    }

    for r in &sorted {
        let system = if r.variant_kind.is_debiased() { SYSTEM_DEBIASED } else { SYSTEM_AWARE };
        use_again.get_mut(&r.variant_kind).unwrap().push(r.q_use_again.value() as f64);
        recommend
            .get_mut(&r.variant_kind)
            .unwrap()
            .push(r.q_recommend_to_others.value() as f64);
        for j in &r.judgments {
            let a = acceptance_score(j.acceptance_answer);
            let p = pgc(r.gender, j.perceived_dominance);
            by_variant.get_mut(&r.variant_kind).unwrap().push(a);
            by_system.get_mut(system).unwrap().push(a);
            by_pgc.get_mut(pgc_key(p)).unwrap().push(a);
            rows.push(Row {
                acceptance: a,
                pgc: p,
                stereotype: r.q_stereotype.value() as f64,
                disparity: r.q_disparity_personal.value() as f64,
                gender: r.gender,
                class_standing: r.class_standing.ordinal() as f64,
                determined: if r.openness == Openness::Determined { 1.0 } else { 0.0 },
            });
        }
    }

    let (welch, welch_note) = match welch_t_test(&by_system[SYSTEM_AWARE], &by_system[SYSTEM_DEBIASED]) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(format!("insufficient: {e}"))),
    };

    let models = [
        MODEL_STEREOTYPE,
        MODEL_DISPARITY,
        MODEL_PGC,
        MODEL_STEREOTYPE_X_PGC,
        MODEL_DISPARITY_X_PGC,
    ]
    .into_iter()
    .map(|m| fit_model(m, &rows))
    .collect();

    Ok(AnalysisReport {
        n_responses: sorted.len(),
        n_judgments: rows.len(),
        acceptance_by_variant: by_variant.iter().map(|(k, v)| (*k, GroupStat::of(v))).collect(),
        acceptance_by_system: by_system.iter().map(|(k, v)| (k.clone(), GroupStat::of(v))).collect(),
        welch,
        welch_note,
        acceptance_by_pgc: by_pgc.iter().map(|(k, v)| (k.clone(), GroupStat::of(v))).collect(),
        models,
        usability: VariantKind::ALL
            .into_iter()
            .map(|k| {
                (
                    k,
                    Usability {
                        use_again: GroupStat::of(&use_again[&k]),
                        recommend_to_others: GroupStat::of(&recommend[&k]),
                    },
                )
            })
            .collect(),
    })
}

/// Plain-text rendering of an [`AnalysisReport`].
pub fn render_report(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Responses: {}  Judged recommendations: {}", r.n_responses, r.n_judgments);
    let _ = writeln!(s, "\nMean acceptance by variant");
    for (k, g) in &r.acceptance_by_variant {
        let _ = writeln!(s, "  {:<22} {g}", k.as_str());
    }
    for (k, g) in &r.acceptance_by_system {
        let _ = writeln!(s, "  {:<22} {g}", format!("{k} (system)"));
    }
    let _ = writeln!(s, "\nWelch t-test, gender_aware vs gender_debiased");
    match (&r.welch, &r.welch_note) {
        (Some(t), _) => {
            let _ = writeln!(s, "  t = {:.4}  df = {:.2}  p = {:.4}", t.t, t.df, t.p);
        }
        (None, Some(note)) => {
            let _ = writeln!(s, "  {note}");
        }
        (None, None) => {}
    }
    let _ = writeln!(s, "\nMean acceptance by PGC");
    for (k, g) in &r.acceptance_by_pgc {
        let _ = writeln!(s, "  PGC={k:<4} {g}");
    }
    for m in &r.models {
        let _ = writeln!(s, "\nGLM: {} + controls", m.name);
        if !m.dropped.is_empty() {
            let _ = writeln!(s, "  dropped constant controls: {}", m.dropped.join(", "));
        }
        if let Some(e) = &m.error {
            let _ = writeln!(s, "  not estimable: {e}");
        }
        if let Some(f) = &m.fit {
            let _ = writeln!(s, "  {:<26} {:>9} {:>9} {:>8} {:>8}", "term", "estimate", "std.err", "t", "p");
            for i in 0..f.names.len() {
                let _ = writeln!(
                    s,
                    "  {:<26} {:>9.4} {:>9.4} {:>8.3} {:>8.4}",
                    f.names[i], f.estimates[i], f.std_errors[i], f.t_values[i], f.p_values[i]
                );
            }
            let _ = writeln!(s, "  n = {}  residual df = {}", f.n, f.df_resid);
        }
    }
    let _ = writeln!(s, "\nUsability (mean Likert)");
    for (k, u) in &r.usability {
        let _ = writeln!(
            s,
            "  {:<22} use again {}  recommend {}",
            k.as_str(),
            u.use_again,
            u.recommend_to_others
        );
    }
    s
}
