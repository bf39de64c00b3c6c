//! Learning-to-rank combination of technique scores.
//!
//! Each element of a fault becomes a vector of min-max normalized technique
//! scores. A linear model is trained on pairwise constraints "faulty element
//! outscores correct element of the same fault" with a hinge loss, then
//! evaluated by cross-validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{e_inspect, EInspect};
use crate::model::{rank_over_universe, ProgramElement, ScoredList};
use crate::technique::{Family, Technique};

/// Correct elements sampled per faulty element when building pairs.
pub const PAIR_CAP: usize = 50;
pub const LAMBDA: f64 = 0.01;
pub const EPOCHS: u32 = 100;
pub const BASE_STEP: f64 = 0.1;
pub const DEFAULT_K: usize = 10;

/// Min-max normalizes `raw` over `universe`, aligned with `universe`.
///
/// Unscored elements count as 0, `+inf` maps to 1 and is left out of the
/// finite range, and a constant finite range maps to 0.
pub fn normalize<E>(raw: &ScoredList<E>, universe: &[E]) -> Vec<f64>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let values: Vec<f64> = raw.over_universe(universe).entries().iter().map(|(_, s)| *s).collect();
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    values
        .into_iter()
        .map(|v| {
            if v == f64::INFINITY {
                1.0
            } else if hi > lo {
                (v - lo) / (hi - lo)
            } else {
                0.0
            }
        })
        .collect()
}

/// Raw technique outputs for one fault.
#[derive(Clone, Debug)]
pub struct FaultScores<E = ProgramElement> {
    pub id: String,
    pub project: String,
    pub universe: Vec<E>,
    pub faulty: BTreeSet<E>,
    pub scores: BTreeMap<String, ScoredList<E>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<E = ProgramElement> {
    pub techniques: Vec<String>,
    pub elements: Vec<E>,
    /// One row per element, one column per technique, entries in `[0, 1]`.
    pub rows: Vec<Vec<f64>>,
}

impl<E> FaultScores<E>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    pub fn missing(&self, techniques: &[String]) -> Vec<String> {
        techniques
            .iter()
            .filter(|t| !self.scores.contains_key(*t))
            .cloned()
            .collect()
    }

    pub fn features(&self, techniques: &[String]) -> Result<FeatureMatrix<E>> {
        let missing = self.missing(techniques);
        if !missing.is_empty() {
            return Err(Error::MissingFamilies(missing));
        }
        let columns: Vec<Vec<f64>> = techniques
            .iter()
            .map(|t| normalize(&self.scores[t], &self.universe))
            .collect();
        let rows = (0..self.universe.len())
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        Ok(FeatureMatrix {
            techniques: techniques.to_vec(),
            elements: self.universe.clone(),
            rows,
        })
    }
}

/// A fault's features plus its ground truth.
#[derive(Clone, Debug)]
pub struct FaultFeatures<E = ProgramElement> {
    pub id: String,
    pub project: String,
    pub features: FeatureMatrix<E>,
    pub faulty: BTreeSet<E>,
}

/// `(faulty vector, correct vector)`
pub type Pair = (Vec<f64>, Vec<f64>);

/// Pairs each faulty element with up to [`PAIR_CAP`] correct elements of the
/// same fault, sampled without replacement.
pub fn build_pairwise_constraints<E: Ord>(
    faults: &[&FaultFeatures<E>],
    rng: &mut ChaCha8Rng,
) -> Vec<Pair> {
    let mut pairs = Vec::new();
    for f in faults {
        let m = &f.features;
        let (bad, good): (Vec<usize>, Vec<usize>) =
            (0..m.elements.len()).partition(|&i| f.faulty.contains(&m.elements[i]));
        for &b in &bad {
            let picked: Vec<usize> = if good.len() <= PAIR_CAP {
                good.clone()
            } else {
                let mut idx = index::sample(rng, good.len(), PAIR_CAP).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| good[i]).collect()
            };
            for g in picked {
                pairs.push((m.rows[b].clone(), m.rows[g].clone()));
            }
        }
    }
    pairs
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear scoring model over normalized technique scores.
///
/// Saved as `{"techniques", "weights", "seed", "epochs"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankModel {
    pub techniques: Vec<String>,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub epochs: u32,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    LAMBDA
}

impl RankModel {
    /// Stochastic subgradient descent on the regularized pairwise hinge loss.
    /// Pair order is reshuffled every epoch from `seed`.
    pub fn train(techniques: Vec<String>, pairs: &[Pair], seed: u64) -> RankModel {
        let dim = techniques.len();
        let mut w = vec![0.0; dim];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let diffs: Vec<Vec<f64>> = pairs
            .iter()
            .map(|(f, c)| f.iter().zip(c).map(|(a, b)| a - b).collect())
            .collect();
        let mut order: Vec<usize> = (0..diffs.len()).collect();
        for epoch in 1..=EPOCHS {
            let step = BASE_STEP / f64::from(epoch).sqrt();
            order.shuffle(&mut rng);
            for &i in &order {
                let d = &diffs[i];
                let violated = dot(&w, d) < 1.0;
                for j in 0..dim {
                    let mut g = 2.0 * LAMBDA * w[j];
                    if violated {
                        g -= d[j];
                    }
                    w[j] -= step * g;
                }
            }
        }
        RankModel {
            techniques,
            weights: w,
            seed,
            epochs: EPOCHS,
            lambda: LAMBDA,
        }
    }

    /// Trains on every pair drawn from `faults`, which are visited in id order.
    pub fn fit<E: Ord>(techniques: &[String], faults: &[&FaultFeatures<E>], seed: u64) -> RankModel {
        let mut sorted = faults.to_vec();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = build_pairwise_constraints(&sorted, &mut rng);
        RankModel::train(techniques.to_vec(), &pairs, seed)
    }

    pub fn violations(&self, pairs: &[Pair]) -> usize {
        pairs
            .iter()
            .filter(|(f, c)| dot(&self.weights, f) <= dot(&self.weights, c))
            .count()
    }

    pub fn predict<E>(&self, features: &FeatureMatrix<E>) -> Result<ScoredList<E>>
    where
        E: Clone + Ord + Hash + fmt::Display,
    {
        if features.techniques.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: features.techniques.len(),
            });
        }
        if features.techniques != self.techniques {
            return Err(Error::Unknown {
                kind: "feature order",
                value: features.techniques.join(","),
            });
        }
        let entries = features
            .elements
            .iter()
            .zip(&features.rows)
            .map(|(e, x)| (e.clone(), dot(&self.weights, x)))
            .collect();
        ScoredList::new("combined", entries)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<RankModel> {
        let m: RankModel = serde_json::from_str(text)?;
        if m.weights.len() != m.techniques.len() {
            return Err(Error::DimensionMismatch {
                expected: m.techniques.len(),
                found: m.weights.len(),
            });
        }
        if m.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidScore {
                element: "model weight".into(),
                score: f64::NAN,
            });
        }
        Ok(m)
    }
}

/// Held-out evaluation of one fault.
#[derive(Clone, Debug)]
pub struct CvOutcome<E = ProgramElement> {
    pub fault: String,
    pub fold: usize,
    pub combined: ScoredList<E>,
    pub e_inspect: EInspect,
}

fn evaluate_split<E>(
    techniques: &[String],
    train: &[&FaultFeatures<E>],
    test: &[&FaultFeatures<E>],
    fold: usize,
    seed: u64,
) -> Result<Vec<CvOutcome<E>>>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let model = RankModel::fit(techniques, train, seed);
    test.iter()
        .map(|f| {
            let combined = model.predict(&f.features)?;
            let ranking = rank_over_universe(&combined, &f.features.elements);
            Ok(CvOutcome {
                fault: f.id.clone(),
                fold,
                e_inspect: e_inspect(&ranking, &f.faulty)?,
                combined,
            })
        })
        .collect()
}

/// Fold index of each fault after a seeded shuffle; fold sizes differ by at most one.
pub fn kfold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            fold[i] = f;
        }
        pos += size;
    }
    fold
}

/// k-fold cross-validation; results follow the input order of `faults`.
pub fn kfold_cv<E>(
    techniques: &[String],
    faults: &[FaultFeatures<E>],
    k: usize,
    seed: u64,
) -> Result<Vec<CvOutcome<E>>>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    if k < 2 || faults.len() < k {
        return Err(Error::NotEnoughFolds {
            needed: k.max(2),
            found: faults.len(),
        });
    }
    let assignment = kfold_assignment(faults.len(), k, seed);
    let mut out: Vec<Option<CvOutcome<E>>> = vec![None; faults.len()];
    for fold in 0..k {
        let (test_idx, train): (Vec<usize>, Vec<&FaultFeatures<E>>) = {
            let t: Vec<usize> = (0..faults.len()).filter(|&i| assignment[i] == fold).collect();
            let r = (0..faults.len()).filter(|&i| assignment[i] != fold).map(|i| &faults[i]).collect();
            (t, r)
        };
        let test: Vec<&FaultFeatures<E>> = test_idx.iter().map(|&i| &faults[i]).collect();
        for (i, o) in test_idx.iter().zip(evaluate_split(techniques, &train, &test, fold, seed)?) {
            out[*i] = Some(o);
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every fault is in one fold")).collect())
}

/// Leave-one-project-out validation; results follow the input order of `faults`.
pub fn cross_project_cv<E>(
    techniques: &[String],
    faults: &[FaultFeatures<E>],
    seed: u64,
) -> Result<Vec<CvOutcome<E>>>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let projects: BTreeSet<&str> = faults.iter().map(|f| f.project.as_str()).collect();
    if projects.len() < 2 {
        return Err(Error::NotEnoughFolds {
            needed: 2,
            found: projects.len(),
        });
    }
    let mut by_fault: BTreeMap<String, CvOutcome<E>> = BTreeMap::new();
    for (fold, p) in projects.iter().enumerate() {
        let (test, train): (Vec<&FaultFeatures<E>>, Vec<&FaultFeatures<E>>) =
            faults.iter().partition(|f| f.project == *p);
        for o in evaluate_split(techniques, &train, &test, fold, seed)? {
            by_fault.insert(o.fault.clone(), o);
        }
    }
    faults
        .iter()
        .map(|f| {
            by_fault
                .remove(&f.id)
                .ok_or_else(|| Error::DuplicateElement(f.id.clone()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvStrategy {
    Kfold,
    CrossProject,
}

impl FromStr for CvStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kfold" => Ok(CvStrategy::Kfold),
            "cross-project" => Ok(CvStrategy::CrossProject),
            _ => Err(Error::Unknown {
                kind: "cross-validation strategy",
                value: s.into(),
            }),
        }
    }
}

impl fmt::Display for CvStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvStrategy::Kfold => "kfold",
            CvStrategy::CrossProject => "cross-project",
        })
    }
}

/// Family bundles ordered by analysis cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeLevelPreset {
    level: u8,
}

impl TimeLevelPreset {
    pub const ALL: [TimeLevelPreset; 4] = [
        TimeLevelPreset { level: 1 },
        TimeLevelPreset { level: 2 },
        TimeLevelPreset { level: 3 },
        TimeLevelPreset { level: 4 },
    ];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=4).contains(&level) {
            Ok(TimeLevelPreset { level })
        } else {
            Err(Error::Unknown {
                kind: "preset",
                value: level.to_string(),
            })
        }
    }

    pub fn level(self) -> u8 {
        self.level
    }

    pub fn families(self) -> Vec<Family> {
        let mut fams = vec![Family::HistoryBased, Family::StackTrace, Family::IrBased];
        if self.level >= 2 {
            fams.extend([Family::Slicing, Family::Sbfl]);
        }
        if self.level >= 3 {
            fams.push(Family::PredicateSwitching);
        }
        if self.level >= 4 {
            fams.push(Family::Mbfl);
        }
        fams
    }

    pub fn techniques(self) -> Vec<Technique> {
        self.families()
            .into_iter()
            .flat_map(|f| f.techniques().iter().copied())
            .collect()
    }

    pub fn technique_ids(self) -> Vec<String> {
        self.techniques().iter().map(|t| t.id().to_string()).collect()
    }
}

impl FromStr for TimeLevelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix("level").unwrap_or(s);
        let level = digits.parse::<u8>().map_err(|_| Error::Unknown {
            kind: "preset",
            value: s.into(),
        })?;
        TimeLevelPreset::new(level)
    }
}

impl fmt::Display for TimeLevelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level{}", self.level)
    }
}

/// Builds feature matrices for `techniques`, naming the families whose data is absent.
pub fn assemble_features<E>(
    faults: &[FaultScores<E>],
    techniques: &[String],
) -> Result<Vec<FaultFeatures<E>>>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let mut absent: BTreeSet<String> = BTreeSet::new();
    for f in faults {
        for t in f.missing(techniques) {
            let label = t
                .parse::<Technique>()
                .map(|t| t.family().name().to_string())
                .unwrap_or(t);
            absent.insert(label);
        }
    }
    if !absent.is_empty() {
        return Err(Error::MissingFamilies(absent.into_iter().collect()));
    }
    faults
        .iter()
        .map(|f| {
            Ok(FaultFeatures {
                id: f.id.clone(),
                project: f.project.clone(),
                features: f.features(techniques)?,
                faulty: f.faulty.clone(),
            })
        })
        .collect()
}

/// Trains and evaluates the combination restricted to `techniques`.
pub fn run_combination<E>(
    techniques: &[String],
    faults: &[FaultScores<E>],
    cv: CvStrategy,
    k: usize,
    seed: u64,
) -> Result<Vec<CvOutcome<E>>>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let features = assemble_features(faults, techniques)?;
    match cv {
        CvStrategy::Kfold => kfold_cv(techniques, &features, k, seed),
        CvStrategy::CrossProject => cross_project_cv(techniques, &features, seed),
    }
}

pub fn run_preset<E>(
    preset: TimeLevelPreset,
    faults: &[FaultScores<E>],
    cv: CvStrategy,
    k: usize,
    seed: u64,
) -> Result<Vec<CvOutcome<E>>>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    run_combination(&preset.technique_ids(), faults, cv, k, seed)
}

/// Two synthetic techniques that each rank the faulty element first, with a
/// clear margin, on their own half of the faults and score everything
/// uniformly at random on the other half.
pub fn synthetic_complementary_corpus(
    n_faults: usize,
    n_elements: usize,
    seed: u64,
) -> Vec<FaultScores> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_faults)
        .map(|i| {
            let file = format!("s{i}.ml");
            let universe: Vec<ProgramElement> = (1..=n_elements as u32)
                .map(|l| ProgramElement::new(file.clone(), l, 0))
                .collect();
            let faulty_idx = rng.gen_range(0..n_elements);
            let strong = i % 2;
            let mut scores = BTreeMap::new();
            for (t, name) in ["synthetic_a", "synthetic_b"].iter().enumerate() {
                let entries = universe
                    .iter()
                    .enumerate()
                    .map(|(j, e)| {
                        let s = match (t == strong, j == faulty_idx) {
                            (true, true) => 1.0,
                            (true, false) => rng.gen_range(0.0..0.1),
                            (false, _) => rng.gen_range(0.0..1.0),
                        };
                        (e.clone(), s)
                    })
                    .collect();
                scores.insert(
                    name.to_string(),
                    ScoredList::new(*name, entries).expect("distinct lines"),
                );
            }
            FaultScores {
                id: format!("synthetic-{i:03}"),
                project: format!("p{}", i % 4),
                faulty: BTreeSet::from([universe[faulty_idx].clone()]),
                universe,
                scores,
            }
        })
        .collect()
}
