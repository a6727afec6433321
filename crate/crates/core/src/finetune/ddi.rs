use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::FinetuneError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Transductive,
    InductiveOldNew,
    InductiveNewNew,
}

impl FromStr for SplitMode {
    type Err = FinetuneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transductive" => Ok(SplitMode::Transductive),
            "inductive-old-new" => Ok(SplitMode::InductiveOldNew),
            "inductive-new-new" => Ok(SplitMode::InductiveNewNew),
            other => Err(FinetuneError::Config(format!("unknown split mode `{other}`"))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Transductive => "transductive",
            SplitMode::InductiveOldNew => "inductive-old-new",
            SplitMode::InductiveNewNew => "inductive-new-new",
        })
    }
}

/// A labelled drug pair, by molecule index.
pub type Pair = (usize, usize, bool);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DdiSplit {
    pub train: Vec<Pair>,
    pub val: Vec<Pair>,
    pub test: Vec<Pair>,
    /// Drugs held out of training (empty for transductive splits).
    pub unseen: BTreeSet<usize>,
}

/// One row of a pair file: `smiles_a[TAB]smiles_b[TAB]label`, label
/// optional for prediction inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub line: usize,
    pub a: String,
    pub b: String,
    pub label: Option<bool>,
}

/// Blank and `#` lines are skipped; labels are `0`/`1`.
pub fn parse_pairs(text: &str) -> Result<Vec<PairRecord>, FinetuneError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        let err = |message: String| FinetuneError::Parse { line, message };
        if fields.len() < 2 || fields.len() > 3 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(err(format!("expected smiles_a<TAB>smiles_b[<TAB>label], found {} fields", fields.len())));
        }
        let label = match fields.get(2).copied() {
            None | Some("") => None,
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(other) => return Err(err(format!("label must be 0 or 1, found `{other}`"))),
        };
        out.push(PairRecord { line, a: fields[0].to_string(), b: fields[1].to_string(), label });
    }
    Ok(out)
}

pub const MIN_DRUGS: usize = 10;
const CORRUPTION_TRIES: usize = 1000;

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// One negative per positive: replace one side with a random drug from
/// the pool allowed for that side, avoiding known positives, self pairs
/// and negatives already drawn.
fn corrupt(
    positives: &[(usize, usize)],
    pool_for: impl Fn(usize) -> Vec<usize>,
    known: &BTreeSet<(usize, usize)>,
    taken: &mut BTreeSet<(usize, usize)>,
    r: &mut impl Rng,
) -> Vec<Pair> {
    let mut out = Vec::with_capacity(positives.len() * 2);
    for &(a, b) in positives {
        out.push((a, b, true));
        for _ in 0..CORRUPTION_TRIES {
            let (keep, replace_side_a) = if r.random_bool(0.5) { (b, true) } else { (a, false) };
            let replaced = if replace_side_a { a } else { b };
            let pool = pool_for(replaced);
            let Some(&c) = pool.choose(r) else { break };
            let (x, y) = if replace_side_a { (c, keep) } else { (keep, c) };
            let k = key(x, y);
            if x != y && !known.contains(&k) && !taken.contains(&k) {
                taken.insert(k);
                out.push((x, y, false));
                break;
            }
        }
    }
    out
}

/// Split positive pairs and add corrupted negatives. Inductive modes hold
/// out 20% of drugs: old-new tests pairs with exactly one held-out drug,
/// new-new pairs with two; training only ever sees the other drugs.
pub fn make_ddi_splits(positives: &[(usize, usize)], mode: SplitMode, seed: u64) -> Result<DdiSplit, FinetuneError> {
    let drugs: BTreeSet<usize> = positives.iter().flat_map(|&(a, b)| [a, b]).collect();
    if drugs.len() < MIN_DRUGS {
        return Err(FinetuneError::InsufficientDrugs { found: drugs.len(), needed: MIN_DRUGS });
    }
    let known: BTreeSet<(usize, usize)> = positives.iter().map(|&(a, b)| key(a, b)).collect();
    let mut r = rng::stream(seed, &format!("ddi.split.{mode}"));
    let mut taken = BTreeSet::new();
    let all: Vec<usize> = drugs.iter().copied().collect();

    if mode == SplitMode::Transductive {
        let mut pairs = positives.to_vec();
        pairs.shuffle(&mut r);
        let n_test = (pairs.len() as f64 * 0.1).round().max(1.0) as usize;
        let n_val = n_test;
        let (test, rest) = pairs.split_at(n_test);
        let (val, train) = rest.split_at(n_val.min(rest.len()));
        let pool = |_: usize| all.clone();
        return Ok(DdiSplit {
            train: corrupt(train, pool, &known, &mut taken, &mut r),
            val: corrupt(val, pool, &known, &mut taken, &mut r),
            test: corrupt(test, pool, &known, &mut taken, &mut r),
            unseen: BTreeSet::new(),
        });
    }

    let mut shuffled = all.clone();
    shuffled.shuffle(&mut r);
    let n_unseen = ((all.len() as f64) * 0.2).round().max(2.0) as usize;
    let unseen: BTreeSet<usize> = shuffled[..n_unseen].iter().copied().collect();
    let seen: Vec<usize> = shuffled[n_unseen..].to_vec();
    let unseen_list: Vec<usize> = unseen.iter().copied().collect();
    let hidden = |d: usize| unseen.contains(&d);

    let mut seen_pairs: Vec<(usize, usize)> = positives.iter().copied().filter(|&(a, b)| !hidden(a) && !hidden(b)).collect();
    let want = if mode == SplitMode::InductiveOldNew { 1 } else { 2 };
    let test_pos: Vec<(usize, usize)> =
        positives.iter().copied().filter(|&(a, b)| hidden(a) as usize + hidden(b) as usize == want).collect();
    seen_pairs.shuffle(&mut r);
    let n_val = (seen_pairs.len() as f64 * 0.1).round().max(1.0) as usize;
    let (val, train) = seen_pairs.split_at(n_val.min(seen_pairs.len()));
    let seen_pool = |_: usize| seen.clone();
    let test_pool = |replaced: usize| if hidden(replaced) { unseen_list.clone() } else { seen.clone() };
    Ok(DdiSplit {
        train: corrupt(train, seen_pool, &known, &mut taken, &mut r),
        val: corrupt(val, seen_pool, &known, &mut taken, &mut r),
        test: corrupt(&test_pos, test_pool, &known, &mut taken, &mut r),
        unseen,
    })
}
