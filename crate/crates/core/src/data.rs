//! Transaction ingestion, activity filtering, and leave-one-out splits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use rand::Rng;

use crate::error::{RareError, Result};

/// One transaction record.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub rating: u8,
    pub timestamp: i64,
    pub price: f64,
}

/// Column names used to locate fields in the CSV header.
#[derive(Clone, Debug)]
pub struct ColumnMapping {
    pub user_id: String,
    pub item_id: String,
    pub rating: String,
    pub timestamp: String,
    /// `None` when the source carries no price column at all.
    pub price: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            user_id: "user_id".into(),
            item_id: "item_id".into(),
            rating: "rating".into(),
            timestamp: "timestamp".into(),
            price: Some("price".into()),
        }
    }
}

/// Interactions together with a dense `0..n` / `0..m` indexing of ids.
///
/// Index maps may cover ids that have no interaction in this set; the train
/// part of a split shares the universe of the full set it came from.
#[derive(Clone, Debug, Default)]
pub struct InteractionSet {
    records: Vec<Interaction>,
    dense: Vec<(usize, usize)>,
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    malformed: usize,
    dropped_missing_price: usize,
}

impl InteractionSet {
    /// Builds a set whose indices are assigned by sorted id order.
    ///
    /// Duplicate `(user, item, timestamp)` rows keep their first occurrence.
    pub fn from_interactions(records: Vec<Interaction>) -> Self {
        let users: BTreeSet<&str> = records.iter().map(|r| r.user_id.as_str()).collect();
        let items: BTreeSet<&str> = records.iter().map(|r| r.item_id.as_str()).collect();
        let users: Vec<String> = users.into_iter().map(str::to_owned).collect();
        let items: Vec<String> = items.into_iter().map(str::to_owned).collect();
        Self::with_universe(users, items, records)
            .expect("universe built from the records themselves")
    }

    /// Builds a set over an explicit id universe, in the given index order.
    pub fn with_universe(
        users: Vec<String>,
        items: Vec<String>,
        records: Vec<Interaction>,
    ) -> Result<Self> {
        let user_index = index_of(&users);
        let item_index = index_of(&items);
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(records.len());
        let mut dense = Vec::with_capacity(records.len());
        for r in records {
            let u = *user_index
                .get(&r.user_id)
                .ok_or_else(|| RareError::IndexOutOfRange(format!("unknown user `{}`", r.user_id)))?;
            let v = *item_index
                .get(&r.item_id)
                .ok_or_else(|| RareError::IndexOutOfRange(format!("unknown item `{}`", r.item_id)))?;
            if seen.insert((u, v, r.timestamp)) {
                kept.push(r);
                dense.push((u, v));
            }
        }
        Ok(InteractionSet {
            records: kept,
            dense,
            users,
            items,
            user_index,
            item_index,
            malformed: 0,
            dropped_missing_price: 0,
        })
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.records
    }

    /// Dense `(user, item)` indices, aligned with [`Self::interactions`].
    pub fn dense_pairs(&self) -> &[(usize, usize)] {
        &self.dense
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn user_id(&self, u: usize) -> &str {
        &self.users[u]
    }

    pub fn item_id(&self, v: usize) -> &str {
        &self.items[v]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.users
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    /// Rows rejected while parsing.
    pub fn malformed_rows(&self) -> usize {
        self.malformed
    }

    /// Rows dropped because they had no price and no fallback was configured.
    pub fn dropped_missing_price(&self) -> usize {
        self.dropped_missing_price
    }

    /// Per-item counts of ratings 1..=5.
    pub fn rating_counts(&self) -> Vec<[u64; 5]> {
        let mut counts = vec![[0u64; 5]; self.n_items()];
        for (r, &(_, v)) in self.records.iter().zip(&self.dense) {
            counts[v][(r.rating - 1) as usize] += 1;
        }
        counts
    }

    /// Mean price per item; `None` for items without records in this set.
    pub fn mean_prices(&self) -> Vec<Option<f64>> {
        let mut sums = vec![(0.0, 0usize); self.n_items()];
        for (r, &(_, v)) in self.records.iter().zip(&self.dense) {
            sums[v].0 += r.price;
            sums[v].1 += 1;
        }
        sums.into_iter()
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect()
    }

    fn subset(&self, keep: impl Fn(usize) -> bool) -> InteractionSet {
        let mut out = InteractionSet {
            records: Vec::new(),
            dense: Vec::new(),
            ..self.clone_universe()
        };
        for (i, (r, d)) in self.records.iter().zip(&self.dense).enumerate() {
            if keep(i) {
                out.records.push(r.clone());
                out.dense.push(*d);
            }
        }
        out
    }

    fn clone_universe(&self) -> InteractionSet {
        InteractionSet {
            records: Vec::new(),
            dense: Vec::new(),
            users: self.users.clone(),
            items: self.items.clone(),
            user_index: self.user_index.clone(),
            item_index: self.item_index.clone(),
            malformed: self.malformed,
            dropped_missing_price: self.dropped_missing_price,
        }
    }
}

fn index_of(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}

/// Reads a header-led CSV of transactions.
///
/// Rows whose price is missing get `price_fallback` when it is set and are
/// dropped otherwise. Rows that fail to parse or violate the record
/// invariants are counted in [`InteractionSet::malformed_rows`].
pub fn parse_interactions<R: Read>(
    source: R,
    schema: &ColumnMapping,
    price_fallback: Option<f64>,
) -> Result<InteractionSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RareError::MissingColumn(name.to_owned()))
    };
    let cu = column(&schema.user_id)?;
    let ci = column(&schema.item_id)?;
    let cr = column(&schema.rating)?;
    let ct = column(&schema.timestamp)?;
    let cp = schema.price.as_deref().map(column).transpose()?;

    let mut records = Vec::new();
    let mut malformed = 0;
    let mut dropped_missing_price = 0;
    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                malformed += 1;
                continue;
            }
        };
        let field = |c: usize| row.get(c).unwrap_or("");
        let (user_id, item_id) = (field(cu), field(ci));
        let rating = field(cr).parse::<u8>().ok().filter(|r| (1..=5).contains(r));
        let timestamp = field(ct).parse::<i64>().ok();
        let (Some(rating), Some(timestamp)) = (rating, timestamp) else {
            malformed += 1;
            continue;
        };
        if user_id.is_empty() || item_id.is_empty() {
            malformed += 1;
            continue;
        }
        let raw_price = cp.map(field).unwrap_or("");
        let price = if raw_price.is_empty() {
            match price_fallback {
                Some(p) => p,
                None => {
                    dropped_missing_price += 1;
                    continue;
                }
            }
        } else {
            match raw_price.parse::<f64>() {
                Ok(p) if p.is_finite() && p >= 0.0 => p,
                _ => {
                    malformed += 1;
                    continue;
                }
            }
        };
        records.push(Interaction {
            user_id: user_id.to_owned(),
            item_id: item_id.to_owned(),
            rating,
            timestamp,
            price,
        });
    }
    let mut set = InteractionSet::from_interactions(records);
    set.malformed = malformed;
    set.dropped_missing_price = dropped_missing_price;
    Ok(set)
}

/// Removes users and items with fewer than `min_count` interactions,
/// repeating until every survivor meets the threshold, then re-densifies.
pub fn filter_min_activity(set: &InteractionSet, min_count: usize) -> Result<InteractionSet> {
    if min_count == 0 {
        return Err(RareError::Config("min_count must be at least 1".into()));
    }
    let mut alive = vec![true; set.len()];
    loop {
        let mut user_counts = vec![0usize; set.n_users()];
        let mut item_counts = vec![0usize; set.n_items()];
        for (i, &(u, v)) in set.dense.iter().enumerate() {
            if alive[i] {
                user_counts[u] += 1;
                item_counts[v] += 1;
            }
        }
        let mut changed = false;
        for (i, &(u, v)) in set.dense.iter().enumerate() {
            if alive[i] && (user_counts[u] < min_count || item_counts[v] < min_count) {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let kept: Vec<Interaction> = set
        .records
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(r, _)| r.clone())
        .collect();
    if kept.is_empty() {
        return Err(RareError::EmptyDataset { min_count });
    }
    let mut out = InteractionSet::from_interactions(kept);
    out.malformed = set.malformed;
    out.dropped_missing_price = set.dropped_missing_price;
    Ok(out)
}

/// Leave-one-out split: most recent interaction per user is the test item,
/// the second most recent the validation item, everything earlier trains.
#[derive(Clone, Debug)]
pub struct SplitDataset {
    pub train: InteractionSet,
    /// Indexed by dense user id.
    pub validation: Vec<Interaction>,
    /// Indexed by dense user id.
    pub test: Vec<Interaction>,
    /// Sorted items never seen by the user in any role.
    pub candidate_pool: Vec<Vec<usize>>,
    validation_items: Vec<usize>,
    test_items: Vec<usize>,
}

/// Which held-out interaction an evaluation ranks against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeldOut {
    Validation,
    Test,
}

impl SplitDataset {
    pub fn n_users(&self) -> usize {
        self.train.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }

    pub fn validation_item(&self, u: usize) -> usize {
        self.validation_items[u]
    }

    pub fn test_item(&self, u: usize) -> usize {
        self.test_items[u]
    }

    pub fn held_out_item(&self, u: usize, which: HeldOut) -> usize {
        match which {
            HeldOut::Validation => self.validation_items[u],
            HeldOut::Test => self.test_items[u],
        }
    }

    /// Writes `user_id,item_id,role` lines, users in dense order.
    pub fn write_manifest<W: Write>(&self, out: W) -> Result<()> {
        let mut by_user: Vec<Vec<&Interaction>> = vec![Vec::new(); self.n_users()];
        for (r, &(u, _)) in self.train.records.iter().zip(&self.train.dense) {
            by_user[u].push(r);
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_id", "item_id", "role"])?;
        for (u, train) in by_user.iter().enumerate() {
            for r in train {
                w.write_record([r.user_id.as_str(), r.item_id.as_str(), "train"])?;
            }
            w.write_record([self.validation[u].user_id.as_str(), self.validation[u].item_id.as_str(), "val"])?;
            w.write_record([self.test[u].user_id.as_str(), self.test[u].item_id.as_str(), "test"])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Splits each user's history chronologically; equal timestamps are ordered
/// by dense item index.
pub fn chrono_split(set: &InteractionSet) -> Result<SplitDataset> {
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); set.n_users()];
    for (i, &(u, _)) in set.dense.iter().enumerate() {
        per_user[u].push(i);
    }
    let mut is_train = vec![false; set.len()];
    let mut validation = Vec::with_capacity(set.n_users());
    let mut test = Vec::with_capacity(set.n_users());
    let mut validation_items = Vec::with_capacity(set.n_users());
    let mut test_items = Vec::with_capacity(set.n_users());
    let mut candidate_pool = Vec::with_capacity(set.n_users());
    for (u, rows) in per_user.iter_mut().enumerate() {
        if rows.len() < 3 {
            return Err(RareError::TooFewInteractions {
                user: set.users[u].clone(),
                count: rows.len(),
            });
        }
        rows.sort_by_key(|&i| (set.records[i].timestamp, set.dense[i].1));
        let t = rows[rows.len() - 1];
        let va = rows[rows.len() - 2];
        let mut seen = vec![false; set.n_items()];
        for &i in &rows[..rows.len() - 2] {
            is_train[i] = true;
            seen[set.dense[i].1] = true;
        }
        seen[set.dense[va].1] = true;
        seen[set.dense[t].1] = true;
        validation.push(set.records[va].clone());
        test.push(set.records[t].clone());
        validation_items.push(set.dense[va].1);
        test_items.push(set.dense[t].1);
        candidate_pool.push((0..set.n_items()).filter(|&v| !seen[v]).collect());
    }
    Ok(SplitDataset {
        train: set.subset(|i| is_train[i]),
        validation,
        test,
        candidate_pool,
        validation_items,
        test_items,
    })
}

/// Draws `count` distinct items uniformly from the user's candidate pool.
pub fn sample_negatives<R: Rng + ?Sized>(
    split: &SplitDataset,
    u: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let pool = split
        .candidate_pool
        .get(u)
        .ok_or_else(|| RareError::IndexOutOfRange(format!("user index {u}")))?;
    if pool.len() < count {
        return Err(RareError::NegativePoolTooSmall {
            user: split.train.user_id(u).to_owned(),
            available: pool.len(),
            requested: count,
        });
    }
    Ok(rand::seq::index::sample(rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(u: &str, i: &str, rating: u8, t: i64) -> Interaction {
        Interaction {
            user_id: u.into(),
            item_id: i.into(),
            rating,
            timestamp: t,
            price: 1.0,
        }
    }

    fn parse(text: &str, fallback: Option<f64>) -> InteractionSet {
        parse_interactions(text.as_bytes(), &ColumnMapping::default(), fallback).unwrap()
    }

    #[test]
    fn parses_direct_field_mapping() {
        let set = parse("user_id,item_id,rating,timestamp,price\nu1,i1,5,100,12.99\n", None);
        assert_eq!(set.interactions(), &[Interaction {
            user_id: "u1".into(),
            item_id: "i1".into(),
            rating: 5,
            timestamp: 100,
            price: 12.99,
        }]);
        assert_eq!(set.malformed_rows(), 0);
    }

    #[test]
    fn empty_price_takes_fallback_or_is_dropped() {
        let text = "user_id,item_id,rating,timestamp,price\nu1,i1,4,100,\n";
        assert_eq!(parse(text, Some(1.0)).interactions()[0].price, 1.0);
        let dropped = parse(text, None);
        assert!(dropped.is_empty());
        assert_eq!(dropped.dropped_missing_price(), 1);
        assert_eq!(dropped.malformed_rows(), 0);
    }

    #[test]
    fn out_of_range_rating_is_malformed() {
        let set = parse(
            "user_id,item_id,rating,timestamp,price\nu1,i1,9,100,1.0\nu1,i2,x,100,1.0\nu1,i3,3,100,1.0\n",
            None,
        );
        assert_eq!(set.len(), 1);
        assert_eq!(set.malformed_rows(), 2);
    }

    #[test]
    fn negative_price_is_malformed() {
        let set = parse("user_id,item_id,rating,timestamp,price\nu1,i1,3,1,-2\n", Some(1.0));
        assert_eq!(set.malformed_rows(), 1);
    }

    #[test]
    fn header_missing_column_is_an_error() {
        let err = parse_interactions(
            "user_id,item_id,timestamp\nu1,i1,1\n".as_bytes(),
            &ColumnMapping::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, RareError::MissingColumn(c) if c == "rating"));
    }

    #[test]
    fn schema_without_price_column_uses_fallback() {
        let schema = ColumnMapping {
            price: None,
            ..Default::default()
        };
        let set = parse_interactions(
            "user_id,item_id,rating,timestamp\nu1,i1,3,7\n".as_bytes(),
            &schema,
            Some(1.0),
        )
        .unwrap();
        assert_eq!(set.interactions()[0].price, 1.0);
    }

    #[test]
    fn duplicate_triples_keep_first() {
        let mut a = rec("u", "i", 5, 1);
        a.price = 2.0;
        let set = InteractionSet::from_interactions(vec![a, rec("u", "i", 1, 1), rec("u", "i", 3, 2)]);
        assert_eq!(set.len(), 2);
        assert_eq!(set.interactions()[0].price, 2.0);
    }

    #[test]
    fn dense_indices_are_a_bijection() {
        let set = InteractionSet::from_interactions(vec![rec("b", "y", 1, 1), rec("a", "x", 1, 1), rec("b", "x", 2, 2)]);
        assert_eq!(set.user_ids(), &["a".to_string(), "b".to_string()]);
        for u in 0..set.n_users() {
            assert_eq!(set.user_index(set.user_id(u)), Some(u));
        }
        for v in 0..set.n_items() {
            assert_eq!(set.item_index(set.item_id(v)), Some(v));
        }
    }

    #[test]
    fn filter_removes_low_activity_user() {
        let mut rows = Vec::new();
        for u in 0..10 {
            for i in 0..10 {
                rows.push(rec(&format!("u{u}"), &format!("i{i}"), 3, i));
            }
        }
        for i in 0..3 {
            rows.push(rec("sparse", &format!("i{i}"), 3, i));
        }
        let set = InteractionSet::from_interactions(rows);
        let out = filter_min_activity(&set, 10).unwrap();
        assert_eq!(out.n_users(), 10);
        assert!(out.user_index("sparse").is_none());
    }

    #[test]
    fn filter_with_threshold_one_is_identity() {
        let set = InteractionSet::from_interactions(vec![rec("a", "x", 1, 1), rec("b", "y", 2, 3)]);
        let out = filter_min_activity(&set, 1).unwrap();
        assert_eq!(out.interactions(), set.interactions());
        assert_eq!(out.user_ids(), set.user_ids());
        assert_eq!(out.item_ids(), set.item_ids());
    }

    #[test]
    fn filter_rejects_zero_threshold_and_empty_result() {
        let set = InteractionSet::from_interactions(vec![rec("a", "x", 1, 1)]);
        assert!(matches!(filter_min_activity(&set, 0), Err(RareError::Config(_))));
        assert!(matches!(filter_min_activity(&set, 2), Err(RareError::EmptyDataset { .. })));
    }

    /// Single-pass removal applied until nothing changes, written
    /// independently of the library loop.
    fn brute_force_fixed_point(rows: &[(usize, usize)], min: usize) -> BTreeSet<(usize, usize)> {
        let mut cur: BTreeSet<(usize, usize)> = rows.iter().copied().collect();
        loop {
            let next: BTreeSet<(usize, usize)> = cur
                .iter()
                .copied()
                .filter(|&(u, v)| {
                    cur.iter().filter(|p| p.0 == u).count() >= min
                        && cur.iter().filter(|p| p.1 == v).count() >= min
                })
                .collect();
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    #[test]
    fn filter_chain_case_matches_brute_force() {
        // u0..u2 rate items 0..2; u3 and u4 each lean on items 3/4, which
        // have fewer than 3 raters. Dropping those items leaves u3 and u4
        // below the threshold as well.
        let pairs = vec![
            (0, 0), (0, 1), (0, 2),
            (1, 0), (1, 1), (1, 2),
            (2, 0), (2, 1), (2, 2),
            (3, 0), (3, 1), (3, 3),
            (4, 3), (4, 4), (4, 0),
        ];
        let rows: Vec<Interaction> = pairs
            .iter()
            .map(|&(u, v)| rec(&format!("u{u}"), &format!("i{v}"), 3, 0))
            .collect();
        let set = InteractionSet::from_interactions(rows);
        let out = filter_min_activity(&set, 3).unwrap();
        let expected = brute_force_fixed_point(&pairs, 3);
        let got: BTreeSet<(usize, usize)> = out
            .interactions()
            .iter()
            .map(|r| (r.user_id[1..].parse().unwrap(), r.item_id[1..].parse().unwrap()))
            .collect();
        assert_eq!(got, expected);
        assert!(out.user_index("u3").is_none());
        assert!(out.user_index("u4").is_none());
        for u in 0..out.n_users() {
            assert!(out.dense_pairs().iter().filter(|p| p.0 == u).count() >= 3);
        }
    }

    #[test]
    fn split_by_timestamp() {
        let set = InteractionSet::from_interactions(vec![rec("u", "c", 1, 3), rec("u", "a", 1, 1), rec("u", "b", 1, 2)]);
        let split = chrono_split(&set).unwrap();
        assert_eq!(split.train.interactions().len(), 1);
        assert_eq!(split.train.interactions()[0].timestamp, 1);
        assert_eq!(split.validation[0].timestamp, 2);
        assert_eq!(split.test[0].timestamp, 3);
    }

    #[test]
    fn split_ties_broken_by_item_index() {
        // items in dense order i0 < i1 < i2; insertion order [2,0,1]
        let set = InteractionSet::from_interactions(vec![rec("u", "i2", 1, 5), rec("u", "i0", 1, 5), rec("u", "i1", 1, 5)]);
        let split = chrono_split(&set).unwrap();
        assert_eq!(split.train.dense_pairs(), &[(0, 0)]);
        assert_eq!(split.validation_item(0), 1);
        assert_eq!(split.test_item(0), 2);
    }

    #[test]
    fn split_rejects_short_history() {
        let set = InteractionSet::from_interactions(vec![rec("u", "a", 1, 1), rec("u", "b", 1, 2)]);
        match chrono_split(&set) {
            Err(RareError::TooFewInteractions { user, count }) => {
                assert_eq!(user, "u");
                assert_eq!(count, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn small_split() -> SplitDataset {
        let mut rows = vec![rec("u", "a", 1, 1), rec("u", "b", 1, 2), rec("u", "c", 1, 3)];
        rows.extend((0..5).map(|i| rec("w", &format!("z{i}"), 2, i)));
        chrono_split(&InteractionSet::from_interactions(rows)).unwrap()
    }

    #[test]
    fn pools_exclude_all_held_items() {
        let split = small_split();
        let u = split.train.user_index("u").unwrap();
        let own: Vec<usize> = ["a", "b", "c"].iter().map(|i| split.train.item_index(i).unwrap()).collect();
        assert!(split.candidate_pool[u].iter().all(|v| !own.contains(v)));
        assert_eq!(split.candidate_pool[u].len(), 5);
    }

    #[test]
    fn negatives_are_distinct_and_seeded() {
        let split = small_split();
        let u = split.train.user_index("u").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sample_negatives(&split, u, 2, &mut rng).unwrap();
        assert_eq!(a.len(), 2);
        assert_ne!(a[0], a[1]);
        let b = sample_negatives(&split, u, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negatives_pool_too_small() {
        let split = small_split();
        let w = split.train.user_index("w").unwrap();
        // w's pool is {a, b, c}
        let err = sample_negatives(&split, w, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, RareError::NegativePoolTooSmall { ref user, available: 3, requested: 4 } if user == "w"));
    }

    #[test]
    fn manifest_lists_roles() {
        let split = small_split();
        let mut buf = Vec::new();
        split.write_manifest(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("user_id,item_id,role\n"));
        assert!(text.contains("u,a,train\nu,b,val\nu,c,test\n"));
        assert_eq!(text.lines().count(), 1 + 8);
    }
}
