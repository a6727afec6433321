//! Knowledge graphs: triple loading with entity-kind inference, 2-hop edge
//! derivation, and entity embedding tables.

mod embeddings;
mod transe;
mod two_hop;

pub use embeddings::EmbeddingTable;
pub use transe::{margin_loss, train_transe, TransE, TransEConfig};
pub use two_hop::{relation_bucket, two_hop_edges, DerivedEdge, HOP_FEATURE_WIDTH, RELATION_BUCKETS};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgError {
    #[error("line {line}: expected {expected} tab-separated columns, found {found}")]
    MalformedLine { line: usize, expected: usize, found: usize },
    #[error("no triples in input")]
    EmptyFile,
    #[error("line {line}: embedding has {found} values, expected {expected}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: `{value}` is not a finite number")]
    BadNumber { line: usize, value: String },
    #[error("entity `{0}` has no embedding")]
    UnknownEntityAtLookup(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Class,
    Element,
    FunctionalGroup,
    Property,
    Drug,
    Other,
}

impl EntityKind {
    pub const ALL: [EntityKind; 6] = [
        EntityKind::Class,
        EntityKind::Element,
        EntityKind::FunctionalGroup,
        EntityKind::Property,
        EntityKind::Drug,
        EntityKind::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Relation whose tail is a SMARTS pattern text rather than an entity.
pub const SMARTS_RELATION: &str = "hasSmarts";

const PERIODIC_SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",
    "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce",
    "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir",
    "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
    "Lv", "Ts", "Og",
];

fn looks_like_drug(name: &str) -> bool {
    if name.starts_with("Compound::") || name.starts_with("Drug::") {
        return true;
    }
    name.len() == 7 && name.starts_with("DB") && name[2..].bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub name: String,
    pub kind: EntityKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    pub entities: Vec<Entity>,
    pub relations: Vec<String>,
    /// `(head, relation, tail)` ids, unique, in first-appearance order.
    pub triples: Vec<(usize, usize, usize)>,
    /// SMARTS text per functional-group entity, from `hasSmarts` lines.
    pub group_patterns: BTreeMap<usize, String>,
    /// Duplicate triple lines dropped while loading.
    pub duplicates_dropped: usize,
    entity_index: HashMap<String, usize>,
}

impl KnowledgeGraph {
    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_index.get(name).copied()
    }

    pub fn kind(&self, id: usize) -> EntityKind {
        self.entities[id].kind
    }

    pub fn relation_name(&self, id: usize) -> &str {
        &self.relations[id]
    }

    pub fn entities_of_kind(&self, kind: EntityKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.entities.len()).filter(move |&i| self.entities[i].kind == kind)
    }

    /// Undirected degree over stored triples.
    pub fn degree(&self, id: usize) -> usize {
        self.triples.iter().filter(|&&(h, _, t)| h == id || t == id).count()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Build from in-memory `(head, relation, tail)` name triples.
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Self {
        let mut kg = KnowledgeGraph::default();
        let mut rel_index: HashMap<String, usize> = HashMap::new();
        let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
        let mut patterns: Vec<(String, String)> = Vec::new();
        for (h, r, t) in triples {
            if r == SMARTS_RELATION {
                patterns.push((h.to_string(), t.to_string()));
                kg.intern(h);
                continue;
            }
            let hi = kg.intern(h);
            let ti = kg.intern(t);
            let ri = *rel_index.entry(r.to_string()).or_insert_with(|| {
                kg.relations.push(r.to_string());
                kg.relations.len() - 1
            });
            if seen.insert((hi, ri, ti)) {
                kg.triples.push((hi, ri, ti));
            } else {
                kg.duplicates_dropped += 1;
            }
        }
        for (h, pattern) in patterns {
            let id = kg.entity_index[&h];
            kg.group_patterns.insert(id, pattern);
        }
        kg.infer_kinds();
        kg
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        self.entities.push(Entity { name: name.to_string(), kind: EntityKind::Other });
        self.entity_index.insert(name.to_string(), self.entities.len() - 1);
        self.entities.len() - 1
    }

    /// Kinds, by precedence: functional group (has a SMARTS pattern or is
    /// the tail of `isPartOf`), element (periodic symbol), drug
    /// (`Compound::`/`Drug::` prefix or DrugBank id), class (in an
    /// `isSubClassOf` triple or the tail of `isA`), property (tail of a
    /// triple headed by an element or group), otherwise other.
    fn infer_kinds(&mut self) {
        let n = self.entities.len();
        let mut kinds = vec![EntityKind::Other; n];
        let rel = |kg: &KnowledgeGraph, r: usize, name: &str| kg.relations[r] == name;
        let mut group = vec![false; n];
        for &id in self.group_patterns.keys() {
            group[id] = true;
        }
        let mut class = vec![false; n];
        for &(h, r, t) in &self.triples {
            if rel(self, r, "isPartOf") {
                group[t] = true;
            }
            if rel(self, r, "isSubClassOf") {
                class[h] = true;
                class[t] = true;
            }
            if rel(self, r, "isA") {
                class[t] = true;
            }
        }
        for i in 0..n {
            let name = &self.entities[i].name;
            kinds[i] = if group[i] {
                EntityKind::FunctionalGroup
            } else if PERIODIC_SYMBOLS.contains(&name.as_str()) {
                EntityKind::Element
            } else if looks_like_drug(name) {
                EntityKind::Drug
            } else if class[i] {
                EntityKind::Class
            } else {
                EntityKind::Other
            };
        }
        for &(h, _, t) in &self.triples {
            if matches!(kinds[h], EntityKind::Element | EntityKind::FunctionalGroup) && kinds[t] == EntityKind::Other {
                kinds[t] = EntityKind::Property;
            }
        }
        for (e, k) in self.entities.iter_mut().zip(kinds) {
            e.kind = k;
        }
    }
}

/// Parse `head[TAB]relation[TAB]tail` lines; `#` lines are comments.
pub fn parse_triples(text: &str) -> Result<KnowledgeGraph, KgError> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
            return Err(KgError::MalformedLine { line: n + 1, expected: 3, found: cols.len() });
        }
        rows.push((cols[0], cols[1], cols[2]));
    }
    if rows.is_empty() {
        return Err(KgError::EmptyFile);
    }
    let kg = KnowledgeGraph::from_triples(rows);
    if kg.duplicates_dropped > 0 {
        log::info!("dropped {} duplicate triples", kg.duplicates_dropped);
    }
    Ok(kg)
}

pub fn load_triples(path: impl AsRef<Path>) -> Result<KnowledgeGraph, KgError> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| KgError::Io(e.to_string()))?;
    parse_triples(&text)
}

const DEFAULT_ELEMENTAL_KG: &str = include_str!("../../data/elemental_kg.tsv");

/// The shipped elemental knowledge graph (element classes, properties and
/// functional groups with SMARTS patterns).
pub fn default_elemental_kg() -> KnowledgeGraph {
    parse_triples(DEFAULT_ELEMENTAL_KG).expect("bundled elemental KG parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_triples_five_entities() {
        let kg = parse_triples("C\tisPartOf\tAcetal\nC\thasWeight\tWeight2\nO\tisInPeriod\tPeriod2\n").unwrap();
        assert_eq!(kg.entities.len(), 5);
        assert_eq!(kg.relations.len(), 3);
        assert_eq!(kg.triples.len(), 3);
        let names: Vec<&str> = kg.entities.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, vec!["C", "Acetal", "Weight2", "O", "Period2"]);
        assert_eq!(kg.kind(0), EntityKind::Element);
        assert_eq!(kg.kind(1), EntityKind::FunctionalGroup);
        assert_eq!(kg.kind(2), EntityKind::Property);
    }

    #[test]
    fn empty_and_malformed() {
        assert_eq!(parse_triples(""), Err(KgError::EmptyFile));
        assert_eq!(parse_triples("# only a comment\n"), Err(KgError::EmptyFile));
        assert_eq!(parse_triples("a\tb\n"), Err(KgError::MalformedLine { line: 1, expected: 3, found: 2 }));
    }

    #[test]
    fn duplicates_dropped() {
        let kg = parse_triples("C\thasWeight\tW2\nC\thasWeight\tW2\n").unwrap();
        assert_eq!(kg.triples.len(), 1);
        assert_eq!(kg.duplicates_dropped, 1);
    }

    #[test]
    fn smarts_lines_and_kinds() {
        let kg = parse_triples(
            "Acetal\thasSmarts\tO[CH1][OX2H0]\nReactiveNonmetal\tisSubClassOf\tNonmetals\nDB00001\ttargets\tGene::X\n",
        )
        .unwrap();
        let acetal = kg.entity_id("Acetal").unwrap();
        assert_eq!(kg.kind(acetal), EntityKind::FunctionalGroup);
        assert_eq!(kg.group_patterns[&acetal], "O[CH1][OX2H0]");
        assert_eq!(kg.kind(kg.entity_id("Nonmetals").unwrap()), EntityKind::Class);
        assert_eq!(kg.kind(kg.entity_id("DB00001").unwrap()), EntityKind::Drug);
        assert_eq!(kg.kind(kg.entity_id("Gene::X").unwrap()), EntityKind::Other);
        assert_eq!(kg.triples.len(), 2);
    }

    #[test]
    fn bundled_kg_loads() {
        let kg = default_elemental_kg();
        assert!(kg.entities_of_kind(EntityKind::Element).count() >= 10);
        assert!(kg.group_patterns.len() >= 10);
        for pattern in kg.group_patterns.values() {
            crate::chem::parse_smarts(pattern).unwrap();
        }
    }
}
