use std::fs;
use std::path::Path;

use super::smarts::matches_anchored;
use super::{parse_smarts, BondOrder, ChemError, MolecularGraph, SmartsPattern};

const DEFAULT_RULES: &str = include_str!("../../data/brics_rules.tsv");

/// A cleavage rule: a bond is cut when one endpoint anchors `left` and the
/// other anchors `right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BricsRule {
    pub id: String,
    pub left: SmartsPattern,
    pub right: SmartsPattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reaction {
    /// Fragment indices of the two sides, ordered as the bond endpoints.
    pub fragments: (usize, usize),
    pub bond: usize,
    /// Position of the firing rule in the rule table.
    pub rule: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSet {
    /// Atom sets, each sorted; fragments ordered by their smallest atom.
    pub fragments: Vec<Vec<usize>>,
    pub reactions: Vec<Reaction>,
}

impl FragmentSet {
    /// The trivial decomposition: one fragment holding every atom.
    pub fn whole(mol: &MolecularGraph) -> Self {
        FragmentSet { fragments: vec![(0..mol.atom_count()).collect()], reactions: Vec::new() }
    }

    /// Fragment index per atom, or `None` if the sets are not a partition.
    pub fn membership(&self, atom_count: usize) -> Option<Vec<usize>> {
        let mut owner = vec![usize::MAX; atom_count];
        for (fi, frag) in self.fragments.iter().enumerate() {
            for &a in frag {
                if a >= atom_count || owner[a] != usize::MAX {
                    return None;
                }
                owner[a] = fi;
            }
        }
        owner.iter().all(|&o| o != usize::MAX).then_some(owner)
    }
}

pub fn parse_rules(text: &str) -> Result<Vec<BricsRule>, ChemError> {
    let mut rules = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(ChemError::RuleTable { line: n + 1, reason: format!("expected 3 columns, found {}", cols.len()) });
        }
        let wrap = |e: ChemError| ChemError::RuleTable { line: n + 1, reason: e.to_string() };
        rules.push(BricsRule {
            id: cols[0].trim().to_string(),
            left: parse_smarts(cols[1]).map_err(wrap)?,
            right: parse_smarts(cols[2]).map_err(wrap)?,
        });
    }
    Ok(rules)
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<BricsRule>, ChemError> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| ChemError::Io(e.to_string()))?;
    parse_rules(&text)
}

/// The shipped eight-rule table.
pub fn default_rules() -> Vec<BricsRule> {
    parse_rules(DEFAULT_RULES).expect("bundled rule table parses")
}

fn rule_fires(rule: &BricsRule, mol: &MolecularGraph, a: usize, b: usize) -> bool {
    (matches_anchored(&rule.left, mol, a, b) && matches_anchored(&rule.right, mol, b, a))
        || (matches_anchored(&rule.left, mol, b, a) && matches_anchored(&rule.right, mol, a, b))
}

/// Cut every acyclic single bond matched by a rule (first matching rule
/// wins) and return the connected components that remain.
pub fn brics_fragment(mol: &MolecularGraph, rules: &[BricsRule]) -> FragmentSet {
    let n = mol.atom_count();
    let mut broken: Vec<(usize, usize)> = Vec::new();
    for (bi, bond) in mol.bonds.iter().enumerate() {
        if bond.ring_member || bond.order != BondOrder::Single {
            continue;
        }
        let (a, b) = bond.endpoints;
        if let Some(ri) = rules.iter().position(|r| rule_fires(r, mol, a, b)) {
            broken.push((bi, ri));
        }
    }

    let mut comp = vec![usize::MAX; n];
    let mut fragments: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = fragments.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            for &(nb, bi) in mol.neighbors(a) {
                if comp[nb] == usize::MAX && !broken.iter().any(|&(b, _)| b == bi) {
                    comp[nb] = id;
                    members.push(nb);
                    stack.push(nb);
                }
            }
        }
        members.sort_unstable();
        fragments.push(members);
    }

    let reactions = broken
        .into_iter()
        .map(|(bi, rule)| {
            let (a, b) = mol.bonds[bi].endpoints;
            Reaction { fragments: (comp[a], comp[b]), bond: bi, rule }
        })
        .collect();
    FragmentSet { fragments, reactions }
}
