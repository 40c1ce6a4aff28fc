//! Interaction datasets: users with gender and declared concentration, items,
//! and binary user-item likes.
//!
//! On disk a dataset is UTF-8 JSONL. Every line is one record tagged by
//! `kind`:
//!
//! ```text
//! {"kind":"concentration","concentration_id":"c00","name":"Psychology"}
//! {"kind":"item","item_id":"i0000","name":"The Hobbit"}
//! {"kind":"user","user_id":"u0000","gender":"female","concentration":"c00"}
//! {"kind":"like","user_id":"u0000","item_id":"i0000"}
//! ```
//!
//! Records may appear in any order; references are checked after the whole
//! file is read.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Nonbinary,
    Undisclosed,
}

impl Gender {
    pub const ALL: [Gender; 4] = [
        Gender::Female,
        Gender::Male,
        Gender::Nonbinary,
        Gender::Undisclosed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Nonbinary => "nonbinary",
            Gender::Undisclosed => "undisclosed",
        }
    }

    /// True for the two genders that enter the bias direction.
    pub fn is_binary(self) -> bool {
        matches!(self, Gender::Female | Gender::Male)
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Gender::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown gender `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concentration {
    pub concentration_id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Concentration(Concentration),
    Item(Item),
    User(UserRecord),
    Like { user_id: String, item_id: String },
}

/// Users, items, concentrations and the like relation between users and items.
///
/// Constructed only through [`InteractionDataset::new`] (or the loaders built
/// on it), so referential integrity always holds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InteractionDataset {
    users: Vec<UserRecord>,
    items: Vec<Item>,
    concentrations: Vec<Concentration>,
    likes: BTreeSet<(String, String)>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
}

impl InteractionDataset {
    pub fn new(
        users: Vec<UserRecord>,
        items: Vec<Item>,
        concentrations: Vec<Concentration>,
        likes: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut user_index = HashMap::with_capacity(users.len());
        for (i, u) in users.iter().enumerate() {
            if user_index.insert(u.user_id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "user",
                    id: u.user_id.clone(),
                });
            }
        }
        let mut item_index = HashMap::with_capacity(items.len());
        for (i, it) in items.iter().enumerate() {
            if item_index.insert(it.item_id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "item",
                    id: it.item_id.clone(),
                });
            }
        }
        let mut conc_ids = HashSet::with_capacity(concentrations.len());
        for c in &concentrations {
            if !conc_ids.insert(c.concentration_id.as_str()) {
                return Err(Error::Duplicate {
                    kind: "concentration",
                    id: c.concentration_id.clone(),
                });
            }
        }
        for u in &users {
            if let Some(c) = &u.concentration {
                if !conc_ids.contains(c.as_str()) {
                    return Err(Error::UnknownId {
                        kind: "concentration",
                        id: c.clone(),
                    });
                }
            }
        }
        let mut like_set = BTreeSet::new();
        for (u, i) in likes {
            if !user_index.contains_key(&u) {
                return Err(Error::UnknownId { kind: "user", id: u });
            }
            if !item_index.contains_key(&i) {
                return Err(Error::UnknownId { kind: "item", id: i });
            }
            like_set.insert((u, i));
        }
        Ok(InteractionDataset {
            users,
            items,
            concentrations,
            likes: like_set,
            user_index,
            item_index,
        })
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn concentrations(&self) -> &[Concentration] {
        &self.concentrations
    }

    pub fn likes(&self) -> &BTreeSet<(String, String)> {
        &self.likes
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn user_position(&self, user_id: &str) -> Option<usize> {
        self.user_index.get(user_id).copied()
    }

    pub fn item_position(&self, item_id: &str) -> Option<usize> {
        self.item_index.get(item_id).copied()
    }

    /// Likes as (user position, item position), sorted.
    pub fn like_positions(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .likes
            .iter()
            .map(|(u, i)| (self.user_index[u], self.item_index[i]))
            .collect();
        out.sort_unstable();
        out
    }

    /// Liked item positions per user position.
    pub fn likes_by_user(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.users.len()];
        for (u, i) in self.like_positions() {
            out[u].push(i);
        }
        out
    }

    /// Liked item ids of one user, in ascending id order.
    pub fn liked_items(&self, user_id: &str) -> Vec<String> {
        self.likes
            .range((user_id.to_string(), String::new())..)
            .take_while(|(u, _)| u == user_id)
            .map(|(_, i)| i.clone())
            .collect()
    }

    pub fn concentration_name(&self, id: &str) -> Option<&str> {
        self.concentrations
            .iter()
            .find(|c| c.concentration_id == id)
            .map(|c| c.name.as_str())
    }

    /// Number of users declaring each concentration (zero counts included).
    pub fn concentration_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = self
            .concentrations
            .iter()
            .map(|c| (c.concentration_id.clone(), 0))
            .collect();
        for u in &self.users {
            if let Some(c) = &u.concentration {
                *counts.entry(c.clone()).or_default() += 1;
            }
        }
        counts
    }

    /// Sub-dataset restricted to the users accepted by `keep`. Items and
    /// concentrations are carried over unchanged; likes follow their users.
    pub fn retain_users(&self, mut keep: impl FnMut(&UserRecord) -> bool) -> InteractionDataset {
        let users: Vec<UserRecord> = self.users.iter().filter(|u| keep(u)).cloned().collect();
        self.with_users(users)
    }

    fn with_users(&self, users: Vec<UserRecord>) -> InteractionDataset {
        let kept: HashSet<&str> = users.iter().map(|u| u.user_id.as_str()).collect();
        let likes: Vec<(String, String)> = self
            .likes
            .iter()
            .filter(|(u, _)| kept.contains(u.as_str()))
            .cloned()
            .collect();
        InteractionDataset::new(users, self.items.clone(), self.concentrations.clone(), likes)
            .expect("subset of a valid dataset is valid")
    }

    /// Serialize to the JSONL format: concentrations, items, users, then likes.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = |rec: &Record| -> Result<()> {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))
        };
        for c in &self.concentrations {
            line(&Record::Concentration(c.clone()))?;
        }
        for it in &self.items {
            line(&Record::Item(it.clone()))?;
        }
        for u in &self.users {
            line(&Record::User(u.clone()))?;
        }
        for (u, i) in &self.likes {
            line(&Record::Like {
                user_id: u.clone(),
                item_id: i.clone(),
            })?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut users = Vec::new();
        let mut items = Vec::new();
        let mut concentrations = Vec::new();
        let mut likes = Vec::new();
        let mut seen_likes = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            match rec {
                Record::Concentration(c) => concentrations.push(c),
                Record::Item(i) => items.push(i),
                Record::User(u) => users.push(u),
                Record::Like { user_id, item_id } => {
                    let pair = (user_id, item_id);
                    if !seen_likes.insert(pair.clone()) {
                        return Err(Error::Duplicate {
                            kind: "like",
                            id: format!("{} -> {}", pair.0, pair.1),
                        });
                    }
                    likes.push(pair);
                }
            }
        }
        InteractionDataset::new(users, items, concentrations, likes)
    }
}

/// Read and validate a JSONL dataset file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<InteractionDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    InteractionDataset::read_jsonl(BufReader::new(file))
}

/// Drop concentrations declared by fewer than `min_count` users. Affected users
/// keep their likes but lose their concentration label.
pub fn filter_rare_concentrations(d: &InteractionDataset, min_count: usize) -> InteractionDataset {
    let counts = d.concentration_counts();
    let keep: HashSet<&str> = counts
        .iter()
        .filter(|(_, &n)| n >= min_count)
        .map(|(id, _)| id.as_str())
        .collect();
    let concentrations: Vec<Concentration> = d
        .concentrations
        .iter()
        .filter(|c| keep.contains(c.concentration_id.as_str()))
        .cloned()
        .collect();
    let users: Vec<UserRecord> = d
        .users
        .iter()
        .map(|u| UserRecord {
            concentration: u
                .concentration
                .clone()
                .filter(|c| keep.contains(c.as_str())),
            ..u.clone()
        })
        .collect();
    InteractionDataset::new(users, d.items.clone(), concentrations, d.likes.iter().cloned())
        .expect("filtering preserves integrity")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    /// Number of training users for a population of `n`: round half away
    /// from zero.
    pub fn train_count(&self, n: usize) -> usize {
        (self.train_fraction * n as f64).round() as usize
    }
}

/// Partition users by a seeded shuffle. Items and concentrations are shared by
/// both halves.
pub fn split(
    d: &InteractionDataset,
    s: &SplitSpec,
) -> Result<(InteractionDataset, InteractionDataset)> {
    if d.is_empty() {
        return Err(Error::Empty("cannot split a dataset without users".into()));
    }
    let mut order: Vec<usize> = (0..d.users.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    order.shuffle(&mut rng);
    let n_train = s.train_count(order.len());
    let mut train_mask = vec![false; d.users.len()];
    for &i in &order[..n_train] {
        train_mask[i] = true;
    }
    let mut train_users = Vec::with_capacity(n_train);
    let mut test_users = Vec::with_capacity(order.len() - n_train);
    for (u, &is_train) in d.users.iter().zip(&train_mask) {
        if is_train {
            train_users.push(u.clone());
        } else {
            test_users.push(u.clone());
        }
    }
    Ok((d.with_users(train_users), d.with_users(test_users)))
}

/// `ceil(ratio * n)`, tolerant of representation error in `ratio`.
pub(crate) fn ratio_count(ratio: f64, n: usize) -> usize {
    let x = ratio * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Negative (unobserved) pairs by position, sorted. See [`sample_negatives`].
pub fn sample_negative_positions(
    d: &InteractionDataset,
    ratio: f64,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if !(ratio > 0.0) {
        return Err(Error::invalid(format!("negative ratio must be > 0, got {ratio}")));
    }
    let positives: HashSet<(usize, usize)> = d.like_positions().into_iter().collect();
    let want = ratio_count(ratio, positives.len());
    let (nu, ni) = (d.n_users(), d.n_items());
    let available = nu * ni - positives.len();
    if want > available {
        return Err(Error::invalid(format!(
            "requested {want} negative pairs but only {available} unobserved pairs exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(usize, usize)> = if want * 2 <= available {
        let mut chosen = HashSet::with_capacity(want);
        let mut picked = Vec::with_capacity(want);
        while picked.len() < want {
            let pair = (rng.random_range(0..nu), rng.random_range(0..ni));
            if !positives.contains(&pair) && chosen.insert(pair) {
                picked.push(pair);
            }
        }
        picked
    } else {
        let mut pool: Vec<(usize, usize)> = (0..nu)
            .flat_map(|u| (0..ni).map(move |i| (u, i)))
            .filter(|p| !positives.contains(p))
            .collect();
        let (head, _) = pool.partial_shuffle(&mut rng, want);
        head.to_vec()
    };
    out.sort_unstable();
    Ok(out)
}

/// Draw `ceil(ratio * |likes|)` distinct unobserved (user, item) pairs
/// uniformly without replacement.
pub fn sample_negatives(
    d: &InteractionDataset,
    ratio: f64,
    seed: u64,
) -> Result<BTreeSet<(String, String)>> {
    Ok(sample_negative_positions(d, ratio, seed)?
        .into_iter()
        .map(|(u, i)| (d.users[u].user_id.clone(), d.items[i].item_id.clone()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_concentrations: usize,
    /// Probability that a user's gender matches the majority gender of the
    /// concentration they declare.
    pub gender_skew: f64,
    pub likes_per_user: usize,
    /// Share of female users in the population.
    pub female_fraction: f64,
    /// Share of a user's likes drawn from their concentration's item cluster.
    pub cluster_affinity: f64,
    /// Share of a user's likes drawn from the clusters of concentrations whose
    /// majority gender matches the user's own (gender-proxy interests).
    pub gender_proxy_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 2000,
            n_items: 500,
            n_concentrations: 20,
            gender_skew: 0.9,
            likes_per_user: 20,
            female_fraction: 0.5,
            cluster_affinity: 0.7,
            gender_proxy_rate: 0.15,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 || self.n_concentrations == 0 {
            return Err(Error::invalid("synthetic counts must be positive"));
        }
        if self.likes_per_user == 0 {
            return Err(Error::invalid("likes_per_user must be positive"));
        }
        if !(0.5..=1.0).contains(&self.gender_skew) {
            return Err(Error::invalid(format!(
                "gender_skew must lie in [0.5, 1.0], got {}",
                self.gender_skew
            )));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return Err(Error::invalid("female_fraction must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.cluster_affinity)
            || !(0.0..=1.0).contains(&self.gender_proxy_rate)
            || self.cluster_affinity + self.gender_proxy_rate > 1.0
        {
            return Err(Error::invalid(
                "cluster_affinity and gender_proxy_rate must lie in [0, 1] and sum to at most 1",
            ));
        }
        Ok(())
    }
}

/// Majority gender of synthetic concentration `c`: even ids female, odd male.
pub fn synthetic_majority(c: usize) -> Gender {
    if c.is_multiple_of(2) {
        Gender::Female
    } else {
        Gender::Male
    }
}

/// Item cluster of synthetic item `j`: contiguous, near-equal blocks.
pub fn synthetic_cluster(j: usize, n_items: usize, n_concentrations: usize) -> usize {
    j * n_concentrations / n_items
}

/// Generate a corpus whose concentrations are gender-skewed and whose likes
/// cluster by concentration.
pub fn generate_synthetic(c: &SyntheticConfig) -> Result<InteractionDataset> {
    c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let w_u = digits(c.n_users);
    let w_i = digits(c.n_items);
    let w_c = digits(c.n_concentrations);

    let concentrations: Vec<Concentration> = (0..c.n_concentrations)
        .map(|k| Concentration {
            concentration_id: format!("c{k:0w_c$}"),
            name: format!("Concentration {k}"),
        })
        .collect();
    let items: Vec<Item> = (0..c.n_items)
        .map(|j| Item {
            item_id: format!("i{j:0w_i$}"),
            name: format!(
                "Item {j} (cluster {})",
                synthetic_cluster(j, c.n_items, c.n_concentrations)
            ),
        })
        .collect();

    let female_majority: Vec<usize> = (0..c.n_concentrations)
        .filter(|&k| synthetic_majority(k) == Gender::Female)
        .collect();
    let male_majority: Vec<usize> = (0..c.n_concentrations)
        .filter(|&k| synthetic_majority(k) == Gender::Male)
        .collect();
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); c.n_concentrations];
    for j in 0..c.n_items {
        clusters[synthetic_cluster(j, c.n_items, c.n_concentrations)].push(j);
    }

    let typed_items = |g: Gender| -> Vec<usize> {
        (0..c.n_items)
            .filter(|&j| synthetic_majority(synthetic_cluster(j, c.n_items, c.n_concentrations)) == g)
            .collect()
    };
    let female_items = typed_items(Gender::Female);
    let male_items = typed_items(Gender::Male);

    let lo = (c.likes_per_user / 2).max(1);
    let hi = (c.likes_per_user * 3 / 2).max(lo).min(c.n_items);
    let lo = lo.min(hi);

    let mut users = Vec::with_capacity(c.n_users);
    let mut likes = Vec::new();
    for u in 0..c.n_users {
        let gender = if rng.random_bool(c.female_fraction) {
            Gender::Female
        } else {
            Gender::Male
        };
        let (same, other) = match gender {
            Gender::Female => (&female_majority, &male_majority),
            _ => (&male_majority, &female_majority),
        };
        let pool = if other.is_empty() || (!same.is_empty() && rng.random_bool(c.gender_skew)) {
            same
        } else {
            other
        };
        let conc = pool[rng.random_range(0..pool.len())];
        let user_id = format!("u{u:0w_u$}");

        let n_likes = rng.random_range(lo..=hi);
        let mut liked = BTreeSet::new();
        let own = &clusters[conc];
        let proxy = match gender {
            Gender::Female => &female_items,
            _ => &male_items,
        };
        while liked.len() < n_likes {
            let roll: f64 = rng.random();
            let j = if !own.is_empty() && roll < c.cluster_affinity {
                own[rng.random_range(0..own.len())]
            } else if !proxy.is_empty() && roll < c.cluster_affinity + c.gender_proxy_rate {
                proxy[rng.random_range(0..proxy.len())]
            } else {
                rng.random_range(0..c.n_items)
            };
            liked.insert(j);
            // A cluster smaller than the like budget can stall the loop when
            // affinity is 1; top up uniformly.
            if liked.len() >= own.len() && own.iter().all(|j| liked.contains(j)) {
                while liked.len() < n_likes {
                    liked.insert(rng.random_range(0..c.n_items));
                }
            }
        }
        for j in liked {
            likes.push((user_id.clone(), items[j].item_id.clone()));
        }
        users.push(UserRecord {
            user_id,
            gender,
            concentration: Some(concentrations[conc].concentration_id.clone()),
        });
    }
    InteractionDataset::new(users, items, concentrations, likes)
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}
