//! Interest elicitation: LDA over like-documents and the compact questionnaire
//! built from the fitted topics.
//!
//! Each user is one document whose tokens are the items they liked (binary,
//! one token per like). Topics are fit with collapsed Gibbs sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::ncf::rng_for;

pub const QUESTIONNAIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub n_topics: usize,
    pub iterations: usize,
    /// Document-topic prior; `None` means `50 / n_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            n_topics: 100,
            iterations: 1000,
            alpha: None,
            beta: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    n_topics: usize,
    item_ids: Vec<String>,
    item_names: Vec<String>,
    /// `T x V`, row-major.
    topic_word_counts: Vec<u32>,
    /// `D x T`, row-major.
    doc_topic_counts: Vec<u32>,
    topic_totals: Vec<u64>,
    alpha: f64,
    beta: f64,
    seed: u64,
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.n_topics
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_topic_counts.len() / self.n_topics.max(1)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn topic_word_count(&self, topic: usize, item: usize) -> u32 {
        self.topic_word_counts[topic * self.n_items() + item]
    }

    pub fn doc_topic_count(&self, doc: usize, topic: usize) -> u32 {
        self.doc_topic_counts[doc * self.n_topics + topic]
    }

    /// Tokens assigned to `topic` across the corpus.
    pub fn topic_mass(&self, topic: usize) -> u64 {
        self.topic_totals[topic]
    }

    pub fn total_tokens(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    /// Smoothed `p(item | topic)`.
    pub fn topic_word_distribution(&self, topic: usize) -> Result<Vec<f64>> {
        self.check_topic(topic)?;
        let v = self.n_items() as f64;
        let denom = self.topic_totals[topic] as f64 + v * self.beta;
        Ok((0..self.n_items())
            .map(|w| (self.topic_word_count(topic, w) as f64 + self.beta) / denom)
            .collect())
    }

    /// Smoothed `p(topic | doc)`.
    pub fn doc_topic_distribution(&self, doc: usize) -> Result<Vec<f64>> {
        if doc >= self.n_docs() {
            return Err(Error::invalid(format!("document {doc} out of range")));
        }
        let row = &self.doc_topic_counts[doc * self.n_topics..(doc + 1) * self.n_topics];
        let n: u64 = row.iter().map(|&c| c as u64).sum();
        let denom = n as f64 + self.n_topics as f64 * self.alpha;
        Ok(row.iter().map(|&c| (c as f64 + self.alpha) / denom).collect())
    }

    fn check_topic(&self, topic: usize) -> Result<()> {
        if topic >= self.n_topics {
            return Err(Error::invalid(format!(
                "topic {topic} out of range (model has {})",
                self.n_topics
            )));
        }
        Ok(())
    }

    /// Item positions of `topic` by descending count, ties by ascending id.
    fn ranked_positions(&self, topic: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_items()).collect();
        idx.sort_by(|&a, &b| {
            self.topic_word_count(topic, b)
                .cmp(&self.topic_word_count(topic, a))
                .then_with(|| self.item_ids[a].cmp(&self.item_ids[b]))
        });
        idx
    }

    /// The `n` most probable items of `topic`. Smoothed probabilities are
    /// monotone in the raw counts, so ordering by count is exact.
    pub fn top_items(&self, topic: usize, n: usize) -> Result<Vec<String>> {
        self.check_topic(topic)?;
        Ok(self
            .ranked_positions(topic)
            .into_iter()
            .take(n)
            .map(|i| self.item_ids[i].clone())
            .collect())
    }

    /// Topics by descending token mass, ties by index.
    pub fn topics_by_mass(&self) -> Vec<usize> {
        let mut t: Vec<usize> = (0..self.n_topics).collect();
        t.sort_by(|&a, &b| self.topic_totals[b].cmp(&self.topic_totals[a]).then(a.cmp(&b)));
        t
    }

    /// Topic holding the most tokens of `item`.
    fn dominant_topic(&self, item: usize) -> usize {
        (0..self.n_topics)
            .max_by(|&a, &b| {
                self.topic_word_count(a, item)
                    .cmp(&self.topic_word_count(b, item))
                    .then(b.cmp(&a))
            })
            .unwrap_or(0)
    }
}

pub fn fit_lda(d: &InteractionDataset, n_topics: usize, iterations: usize, seed: u64) -> Result<TopicModel> {
    fit_lda_with(
        d,
        &LdaConfig {
            n_topics,
            iterations,
            seed,
            ..LdaConfig::default()
        },
    )
}

pub fn fit_lda_with(d: &InteractionDataset, c: &LdaConfig) -> Result<TopicModel> {
    let t = c.n_topics;
    if t == 0 {
        return Err(Error::invalid("n_topics must be positive"));
    }
    let alpha = c.alpha.unwrap_or(50.0 / t as f64);
    if !(alpha > 0.0) || !(c.beta > 0.0) {
        return Err(Error::invalid("LDA priors must be positive"));
    }
    let docs = d.likes_by_user();
    let n_tokens: usize = docs.iter().map(Vec::len).sum();
    if n_tokens == 0 {
        return Err(Error::Empty("LDA corpus has no tokens".into()));
    }
    let v = d.n_items();
    let mut nkw = vec![0u32; t * v];
    let mut ndk = vec![0u32; docs.len() * t];
    let mut nk = vec![0u64; t];
    let mut rng = rng_for(c.seed, 0);

    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (doc, words) in docs.iter().enumerate() {
        let mut zd = Vec::with_capacity(words.len());
        for &w in words {
            let k = rng.random_range(0..t);
            zd.push(k);
            nkw[k * v + w] += 1;
            ndk[doc * t + k] += 1;
            nk[k] += 1;
        }
        z.push(zd);
    }

    let vbeta = v as f64 * c.beta;
    let mut weights = vec![0.0; t];
    for it in 0..c.iterations {
        for (doc, words) in docs.iter().enumerate() {
            for (pos, &w) in words.iter().enumerate() {
                let old = z[doc][pos];
                nkw[old * v + w] -= 1;
                ndk[doc * t + old] -= 1;
                nk[old] -= 1;
                let mut total = 0.0;
                for k in 0..t {
                    total += (ndk[doc * t + k] as f64 + alpha) * (nkw[k * v + w] as f64 + c.beta)
                        / (nk[k] as f64 + vbeta);
                    weights[k] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = weights.partition_point(|&cum| cum <= u).min(t - 1);
                z[doc][pos] = new;
                nkw[new * v + w] += 1;
                ndk[doc * t + new] += 1;
                nk[new] += 1;
            }
        }
        if (it + 1) % 100 == 0 {
            log::debug!("lda iteration {}/{}", it + 1, c.iterations);
        }
    }

    Ok(TopicModel {
        n_topics: t,
        item_ids: d.items().iter().map(|i| i.item_id.clone()).collect(),
        item_names: d.items().iter().map(|i| i.name.clone()).collect(),
        topic_word_counts: nkw,
        doc_topic_counts: ndk,
        topic_totals: nk,
        alpha,
        beta: c.beta,
        seed: c.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    pub item_id: String,
    pub display_name: String,
    pub topic: usize,
}

/// The ordered interest grid shown to participants. Serializes as
/// `{version, items: [{item_id, display_name, topic}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireSpec {
    pub version: u32,
    pub items: Vec<QuestionnaireItem>,
}

impl QuestionnaireSpec {
    pub fn new(items: Vec<QuestionnaireItem>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for it in &items {
            if !seen.insert(it.item_id.as_str()) {
                return Err(Error::Duplicate {
                    kind: "questionnaire item",
                    id: it.item_id.clone(),
                });
            }
        }
        Ok(QuestionnaireSpec {
            version: QUESTIONNAIRE_VERSION,
            items,
        })
    }

    pub fn item_ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.item_id.as_str()).collect()
    }

    pub fn source_topics(&self) -> BTreeMap<&str, usize> {
        self.items.iter().map(|i| (i.item_id.as_str(), i.topic)).collect()
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.items.iter().any(|i| i.item_id == item_id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let q: QuestionnaireSpec = serde_json::from_str(s)?;
        if q.version != QUESTIONNAIRE_VERSION {
            return Err(Error::invalid(format!("unsupported questionnaire version {}", q.version)));
        }
        QuestionnaireSpec::new(q.items)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Read pinned item ids: one per line, blank lines and `#` comments ignored.
pub fn read_overrides(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Pick `target` distinct items: pinned overrides first, then round-robin
/// over topics in descending mass order, taking each topic's next-best item
/// among its top `picks_per_topic` and skipping items already chosen.
pub fn build_questionnaire(
    t: &TopicModel,
    picks_per_topic: usize,
    target: usize,
    overrides: &[String],
) -> Result<QuestionnaireSpec> {
    if target > t.n_topics() * picks_per_topic {
        return Err(Error::invalid(format!(
            "target {target} exceeds {} topics x {picks_per_topic} picks",
            t.n_topics()
        )));
    }
    if overrides.len() > target {
        return Err(Error::invalid(format!(
            "{} pinned items exceed the target of {target}",
            overrides.len()
        )));
    }
    let mut chosen: Vec<QuestionnaireItem> = Vec::with_capacity(target);
    let mut used = BTreeSet::new();
    for id in overrides {
        let pos = t.item_ids.iter().position(|i| i == id).ok_or_else(|| Error::UnknownId {
            kind: "item",
            id: id.clone(),
        })?;
        if !used.insert(pos) {
            return Err(Error::Duplicate {
                kind: "pinned item",
                id: id.clone(),
            });
        }
        chosen.push(QuestionnaireItem {
            item_id: id.clone(),
            display_name: t.item_names[pos].clone(),
            topic: t.dominant_topic(pos),
        });
    }
    let ranked: Vec<(usize, Vec<usize>)> = t
        .topics_by_mass()
        .into_iter()
        .map(|k| (k, t.ranked_positions(k).into_iter().take(picks_per_topic).collect()))
        .collect();
    'rounds: for round in 0..picks_per_topic {
        for (topic, items) in &ranked {
            if chosen.len() >= target {
                break 'rounds;
            }
            if let Some(&pos) = items.get(round) {
                if used.insert(pos) {
                    chosen.push(QuestionnaireItem {
                        item_id: t.item_ids[pos].clone(),
                        display_name: t.item_names[pos].clone(),
                        topic: *topic,
                    });
                }
            }
        }
    }
    if chosen.len() < target {
        return Err(Error::invalid(format!(
            "only {} distinct items available for a target of {target}",
            chosen.len()
        )));
    }
    QuestionnaireSpec::new(chosen)
}

/// Validate questionnaire selections and return them as a like profile,
/// sorted and deduplicated.
pub fn selections_to_likes<S: AsRef<str>>(q: &QuestionnaireSpec, selected: &[S]) -> Result<Vec<String>> {
    let mut out = BTreeSet::new();
    for s in selected {
        let s = s.as_ref();
        if !q.contains(s) {
            return Err(Error::UnknownId {
                kind: "questionnaire item",
                id: s.to_string(),
            });
        }
        out.insert(s.to_string());
    }
    Ok(out.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Gender, Item, UserRecord};

    fn corpus(docs: &[&[usize]], n_items: usize) -> InteractionDataset {
        let items = (0..n_items)
            .map(|i| Item {
                item_id: format!("i{i:02}"),
                name: format!("Item {i}"),
            })
            .collect();
        let users = (0..docs.len())
            .map(|u| UserRecord {
                user_id: format!("u{u:02}"),
                gender: Gender::Female,
                concentration: None,
            })
            .collect();
        let likes: Vec<_> = docs
            .iter()
            .enumerate()
            .flat_map(|(u, ws)| ws.iter().map(move |w| (format!("u{u:02}"), format!("i{w:02}"))))
            .collect();
        InteractionDataset::new(users, items, vec![], likes).unwrap()
    }

    fn hand_model(counts: Vec<Vec<u32>>) -> TopicModel {
        let t = counts.len();
        let v = counts[0].len();
        let totals = counts.iter().map(|r| r.iter().map(|&c| c as u64).sum()).collect();
        TopicModel {
            n_topics: t,
            item_ids: (0..v).map(|i| format!("i{i:02}")).collect(),
            item_names: (0..v).map(|i| format!("Item {i}")).collect(),
            topic_word_counts: counts.into_iter().flatten().collect(),
            doc_topic_counts: vec![0; t],
            topic_totals: totals,
            alpha: 0.5,
            beta: 0.01,
            seed: 0,
        }
    }

    #[test]
    fn zero_iterations_keeps_initialization() {
        let d = corpus(&[&[0, 1, 2], &[2, 3]], 4);
        let a = fit_lda(&d, 3, 0, 9).unwrap();
        let b = fit_lda(&d, 3, 0, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_tokens(), 5);
        let mut rng = rng_for(9, 0);
        let expected: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
        // Tokens are visited doc by doc in ascending item order.
        let tokens = [(0, 0), (0, 1), (0, 2), (1, 2), (1, 3)];
        let mut nkw = vec![0u32; 3 * 4];
        for (&(_, w), &k) in tokens.iter().zip(&expected) {
            nkw[k * 4 + w] += 1;
        }
        assert_eq!(a.topic_word_counts, nkw);
    }

    #[test]
    fn empty_corpus_errors() {
        let d = corpus(&[&[], &[]], 3);
        assert!(matches!(fit_lda(&d, 2, 10, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn dominant_item_ranks_first() {
        let m = hand_model(vec![vec![0, 0, 7, 0], vec![1, 1, 1, 1]]);
        assert_eq!(m.top_items(0, 1).unwrap(), vec!["i02"]);
        assert_eq!(m.top_items(1, 4).unwrap(), vec!["i00", "i01", "i02", "i03"]);
        assert!(m.top_items(2, 1).is_err());
    }

    #[test]
    fn distributions_are_simplex_points() {
        let d = corpus(&[&[0, 1, 2], &[2, 3], &[0, 3]], 4);
        let m = fit_lda(&d, 2, 20, 1).unwrap();
        for k in 0..2 {
            let phi = m.topic_word_distribution(k).unwrap();
            assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for doc in 0..3 {
            let theta = m.doc_topic_distribution(doc).unwrap();
            assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn questionnaire_round_robin() {
        let m = hand_model(vec![vec![5, 4, 0, 0], vec![0, 3, 9, 1]]);
        // Topic 1 has more mass: its best item first, then topic 0's best,
        // then each topic's second choice.
        let q = build_questionnaire(&m, 2, 3, &[]).unwrap();
        assert_eq!(q.item_ids(), vec!["i02", "i00", "i01"]);
        assert_eq!(q.source_topics()["i00"], 0);
        assert!(build_questionnaire(&m, 2, 0, &[]).unwrap().is_empty());
        assert!(build_questionnaire(&m, 2, 5, &[]).is_err());
    }

    #[test]
    fn questionnaire_exhaustion_is_error() {
        // Both topics rank the same two items first.
        let m = hand_model(vec![vec![5, 4, 0], vec![5, 4, 0]]);
        assert!(build_questionnaire(&m, 2, 3, &[]).is_err());
    }

    #[test]
    fn overrides_are_pinned() {
        let m = hand_model(vec![vec![5, 4, 0, 0], vec![0, 3, 9, 1]]);
        let q = build_questionnaire(&m, 2, 3, &["i03".to_string()]).unwrap();
        assert_eq!(q.item_ids(), vec!["i03", "i02", "i00"]);
        assert!(build_questionnaire(&m, 2, 3, &["nope".to_string()]).is_err());
    }

    #[test]
    fn selections_validate() {
        let q = QuestionnaireSpec::new(vec![
            QuestionnaireItem { item_id: "a".into(), display_name: "A".into(), topic: 0 },
            QuestionnaireItem { item_id: "b".into(), display_name: "B".into(), topic: 1 },
        ])
        .unwrap();
        let none: [&str; 0] = [];
        assert!(selections_to_likes(&q, &none).unwrap().is_empty());
        assert_eq!(selections_to_likes(&q, &["b", "a"]).unwrap(), vec!["a", "b"]);
        match selections_to_likes(&q, &["a", "zzz"]) {
            Err(Error::UnknownId { id, .. }) => assert_eq!(id, "zzz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn questionnaire_json_shape() {
        let q = QuestionnaireSpec::new(vec![QuestionnaireItem {
            item_id: "a".into(),
            display_name: "A".into(),
            topic: 4,
        }])
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&q.to_json().unwrap()).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["items"][0]["item_id"], "a");
        assert_eq!(v["items"][0]["display_name"], "A");
        assert_eq!(v["items"][0]["topic"], 4);
        assert_eq!(QuestionnaireSpec::from_json(&q.to_json().unwrap()).unwrap(), q);
    }
}
