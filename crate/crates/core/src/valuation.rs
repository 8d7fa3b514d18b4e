//! Votes, argument-shaped scores, contributor scores and filtering.
//!
//! Default rule:
//!
//! ```text
//! direct  = mean of vote values (0 without votes)
//! balance = sum(max(0, score(argument child))) - sum(max(0, score(objection child)))
//! value   = clamp(direct + 0.25 * balance, -1, 1)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::KbError;
use crate::ids::{ObjectId, UserId};
use crate::journal::Payload;
use crate::kb::Kb;
use crate::model::{Dimension, EdgeTarget, Quantifier, StatementBody, Vote};
use crate::ontology::CategoryOrder;
use crate::projection::generalizes;
use crate::scalar::Scalar;
use crate::seed;
use crate::store::Store;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score<T> {
    pub value: T,
    pub voter_count: usize,
    pub argument_balance: T,
}

impl<T: Scalar> Score<T> {
    pub fn zero() -> Self {
        Score {
            value: T::zero(),
            voter_count: 0,
            argument_balance: T::zero(),
        }
    }
}

/// How votes and argument children combine into a value.
pub trait ScoringRule<T: Scalar> {
    fn direct(&self, votes: &[T]) -> T {
        if votes.is_empty() {
            return T::zero();
        }
        let sum = votes.iter().cloned().fold(T::zero(), |a, b| a + b);
        sum / T::from_count(votes.len())
    }

    fn balance(&self, arguments: &[T], objections: &[T]) -> T {
        let pos = arguments.iter().cloned().map(T::max_zero).fold(T::zero(), |a, b| a + b);
        let neg = objections.iter().cloned().map(T::max_zero).fold(T::zero(), |a, b| a + b);
        pos - neg
    }

    fn combine(&self, direct: T, balance: T) -> T;
}

/// The default rule with argument weight 1/4.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuarterWeight;

impl<T: Scalar> ScoringRule<T> for QuarterWeight {
    fn combine(&self, direct: T, balance: T) -> T {
        let quarter = T::one() / T::from_count(4);
        (direct + quarter * balance).clamp_unit()
    }
}

pub fn cast_vote(
    kb: &mut Kb,
    voter: UserId,
    object: ObjectId,
    dimension: Dimension,
    value: f64,
) -> Result<Vote, KbError> {
    kb.commit(Payload::CastVote {
        voter: voter.clone(),
        object: object.clone(),
        dimension,
        value,
    })?;
    Ok(Vote {
        voter,
        object,
        dimension,
        value,
    })
}

/// Argument and objection children of `object`.
pub fn argument_children(store: &Store, object: &ObjectId) -> (Vec<ObjectId>, Vec<ObjectId>) {
    let argument = seed::relation("argument");
    let objection = seed::relation("objection");
    let mut args = Vec::new();
    let mut objs = Vec::new();
    for r in store.outgoing(object) {
        if r.relation == argument {
            args.push(r.to.clone());
        } else if r.relation == objection {
            objs.push(r.to.clone());
        }
    }
    (args, objs)
}

/// Scores objects under one rule, memoizing recursive argument scores.
pub struct Scorer<'a, T, R> {
    store: &'a Store,
    rule: R,
    memo: BTreeMap<(ObjectId, Dimension), Score<T>>,
}

impl<'a, T: Scalar> Scorer<'a, T, QuarterWeight> {
    pub fn new(store: &'a Store) -> Self {
        Scorer::with_rule(store, QuarterWeight)
    }
}

impl<'a, T: Scalar, R: ScoringRule<T>> Scorer<'a, T, R> {
    pub fn with_rule(store: &'a Store, rule: R) -> Self {
        Scorer {
            store,
            rule,
            memo: BTreeMap::new(),
        }
    }

    pub fn score(&mut self, object: &ObjectId, dimension: Dimension) -> Result<Score<T>, KbError> {
        if !self.store.exists(object) {
            return Err(KbError::UnknownObject(object.clone()));
        }
        Ok(self.score_existing(object, dimension))
    }

    fn score_existing(&mut self, object: &ObjectId, dimension: Dimension) -> Score<T> {
        let key = (object.clone(), dimension);
        if let Some(s) = self.memo.get(&key) {
            return s.clone();
        }
        let votes: Vec<T> = self
            .store
            .votes(object)
            .and_then(|t| t.get(&dimension))
            .map(|m| m.values().map(|v| T::from_f64_lossy(*v)).collect())
            .unwrap_or_default();
        let (args, objs) = argument_children(self.store, object);
        let args: Vec<T> = args
            .iter()
            .map(|c| self.score_existing(c, dimension).value)
            .collect();
        let objs: Vec<T> = objs
            .iter()
            .map(|c| self.score_existing(c, dimension).value)
            .collect();
        let direct = self.rule.direct(&votes);
        let balance = self.rule.balance(&args, &objs);
        let score = Score {
            value: self.rule.combine(direct, balance.clone()),
            voter_count: votes.len(),
            argument_balance: balance,
        };
        self.memo.insert(key, score.clone());
        score
    }

    /// Weighted mean of the scores of everything `user` created, with
    /// weight `1 + distinct voters` per object in that dimension.
    pub fn contributor(&mut self, user: &UserId, dimension: Dimension) -> Result<Score<T>, KbError> {
        if self.store.user(user).is_none() {
            return Err(KbError::UnknownUser(user.clone()));
        }
        let created: Vec<ObjectId> = universe(self.store)
            .into_iter()
            .filter(|o| self.store.creator_of(o) == Some(user))
            .collect();
        if created.is_empty() {
            return Ok(Score::zero());
        }
        let mut total = T::zero();
        let mut weights = T::zero();
        let mut balance = T::zero();
        let mut voters = BTreeSet::new();
        for o in &created {
            let s = self.score_existing(o, dimension);
            let w = T::from_count(1 + s.voter_count);
            total = total + w.clone() * s.value;
            balance = balance + w.clone() * s.argument_balance;
            weights = weights + w;
            voters.extend(voters_on(self.store, o, dimension));
        }
        Ok(Score {
            value: total / weights.clone(),
            voter_count: voters.len(),
            argument_balance: balance / weights,
        })
    }
}

fn voters_on(store: &Store, object: &ObjectId, dimension: Dimension) -> Vec<UserId> {
    store
        .votes(object)
        .and_then(|t| t.get(&dimension))
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default()
}

pub fn statement_score(store: &Store, object: &ObjectId, dimension: Dimension) -> Result<Score<f64>, KbError> {
    Scorer::new(store).score(object, dimension)
}

pub fn contributor_score(store: &Store, user: &UserId, dimension: Dimension) -> Result<Score<f64>, KbError> {
    Scorer::new(store).contributor(user, dimension)
}

/// Objects a filter ranges over: categories, statements and relations that
/// are not archived.
pub fn universe(store: &Store) -> Vec<ObjectId> {
    let cats = store.categories().map(|c| ObjectId::from(c.id.clone()));
    let stmts = store.statements().map(|s| ObjectId::from(s.id.clone()));
    let rels = store.relations().map(|r| ObjectId::from(r.id.clone()));
    cats.chain(stmts)
        .chain(rels)
        .filter(|o| !store.is_archived(o))
        .collect()
}

/// Constructs beyond plain "every/some X relation Y" graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Modality,
    Negation,
    StatementTarget,
    MostQuantifier,
}

pub fn features(store: &Store, object: &ObjectId) -> BTreeSet<Feature> {
    let mut out = BTreeSet::new();
    let Some(StatementBody::Graph(g)) = object
        .as_statement()
        .and_then(|s| store.statement(s))
        .map(|s| &s.body)
    else {
        return out;
    };
    if g.negated {
        out.insert(Feature::Negation);
    }
    for n in &g.nodes {
        if n.modality.is_some() {
            out.insert(Feature::Modality);
        }
        if n.quantifier == Quantifier::Most {
            out.insert(Feature::MostQuantifier);
        }
    }
    if g.edges.iter().any(|e| matches!(e.to, EdgeTarget::Statement(_))) {
        out.insert(Feature::StatementTarget);
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterCriteria {
    #[serde(default)]
    pub min_score: BTreeMap<Dimension, f64>,
    #[serde(default)]
    pub arguments_without_objections: bool,
    /// Attribute matches on the creator, e.g. `degree = PhD`.
    #[serde(default)]
    pub creator_attributes: BTreeMap<String, String>,
    /// When set, objects using any other feature are dropped.
    #[serde(default)]
    pub allowed_features: Option<BTreeSet<Feature>>,
    #[serde(default)]
    pub most_specialized_only: bool,
    /// Restricts the result to statements.
    #[serde(default)]
    pub statements_only: bool,
}

/// `object` has at least one argument and none of its arguments is objected to.
pub fn arguments_without_objections(store: &Store, object: &ObjectId) -> bool {
    let (args, _) = argument_children(store, object);
    !args.is_empty() && args.iter().all(|a| argument_children(store, a).1.is_empty())
}

fn creator_matches(store: &Store, object: &ObjectId, wanted: &BTreeMap<String, String>) -> bool {
    if wanted.is_empty() {
        return true;
    }
    let Some(user) = store.creator_of(object).and_then(|u| store.user(u)) else {
        return false;
    };
    wanted
        .iter()
        .all(|(k, v)| user.attributes.get(k).is_some_and(|a| a == v))
}

/// Objects satisfying every criterion, sorted by id.
pub fn filter_objects(store: &Store, criteria: &FilterCriteria) -> Vec<ObjectId> {
    let mut scorer: Scorer<f64, _> = Scorer::new(store);
    let mut selected: Vec<ObjectId> = universe(store)
        .into_iter()
        .filter(|o| !criteria.statements_only || o.as_statement().is_some())
        .filter(|o| {
            criteria
                .min_score
                .iter()
                .all(|(d, min)| scorer.score_existing(o, *d).value >= *min)
        })
        .filter(|o| !criteria.arguments_without_objections || arguments_without_objections(store, o))
        .filter(|o| creator_matches(store, o, &criteria.creator_attributes))
        .filter(|o| {
            criteria
                .allowed_features
                .as_ref()
                .is_none_or(|allowed| features(store, o).is_subset(allowed))
        })
        .collect();
    if criteria.most_specialized_only {
        selected = most_specialized(store, &CategoryOrder::of_store(store), selected);
    }
    selected.sort();
    selected
}

/// Drops statements that another member of `set` specializes. Of two
/// equivalent statements the one with the smaller id stays.
pub fn most_specialized(store: &Store, order: &CategoryOrder, set: Vec<ObjectId>) -> Vec<ObjectId> {
    let statements: Vec<&ObjectId> = set.iter().filter(|o| o.as_statement().is_some()).collect();
    let dominated = |s: &ObjectId| {
        statements.iter().any(|t| {
            *t != s && generalizes(store, order, s, t) && {
                let mutual = generalizes(store, order, t, s);
                !mutual || *t < s
            }
        })
    };
    set.iter()
        .filter(|o| o.as_statement().is_none() || !dominated(o))
        .cloned()
        .collect()
}
