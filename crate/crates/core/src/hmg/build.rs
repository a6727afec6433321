use std::collections::BTreeMap;

use super::{laplacian_pe, EdgeType, Hmg, HmgError, NodeType, View};
use crate::chem::{
    atom_features, bond_features, brics_fragment, match_smarts, parse_smarts, BricsRule, FragmentSet, MolecularGraph,
    SmartsPattern, ATOM_FEATURE_WIDTH,
};
use crate::kg::{
    relation_bucket, two_hop_edges, DerivedEdge, EmbeddingTable, EntityKind, KgError, KnowledgeGraph, HOP_FEATURE_WIDTH,
};

/// Entity-kind one-hot plus scaled degree.
pub const KNOWLEDGE_NODE_FEATURE_WIDTH: usize = EntityKind::ALL.len() + 1;
/// Drug embeddings are padded or truncated to the atom feature width.
pub const DNODE_FEATURE_WIDTH: usize = ATOM_FEATURE_WIDTH;

/// Molecule view: one node per atom then one per fragment; Bond, Reaction
/// and Join edge pairs; Laplacian positional vectors of width `k_pe`.
pub fn build_molecule_view(
    mol: &MolecularGraph,
    frags: &FragmentSet,
    rule_count: usize,
    k_pe: usize,
) -> Result<Hmg, HmgError> {
    let n = mol.atom_count();
    let owner = frags.membership(n).ok_or(HmgError::PartitionMismatch { atoms: n })?;
    if frags.fragments.iter().any(Vec::is_empty) {
        return Err(HmgError::PartitionMismatch { atoms: n });
    }
    let mut g = Hmg::new(View::M);
    let afeat: Vec<Vec<f64>> = mol.atoms.iter().map(|a| atom_features(a, mol)).collect();
    for (a, f) in mol.atoms.iter().zip(&afeat) {
        g.push_node(NodeType::Atom, f.clone(), vec![0.0; k_pe], a.element.symbol());
    }
    for (fi, members) in frags.fragments.iter().enumerate() {
        let mut f = vec![0.0; ATOM_FEATURE_WIDTH + 1];
        for &a in members {
            for (x, y) in f.iter_mut().zip(&afeat[a]) {
                *x += y;
            }
        }
        let size = members.len() as f64;
        f.iter_mut().take(ATOM_FEATURE_WIDTH).for_each(|x| *x /= size);
        f[ATOM_FEATURE_WIDTH] = size / (size + 1.0);
        g.push_node(NodeType::Fragment, f, vec![0.0; k_pe], format!("fragment{fi}"));
    }
    for b in &mol.bonds {
        g.push_pair(b.endpoints.0, b.endpoints.1, EdgeType::Bond, bond_features(b));
    }
    for r in &frags.reactions {
        let (fa, fb) = r.fragments;
        if fa != owner[mol.bonds[r.bond].endpoints.0] || fb != owner[mol.bonds[r.bond].endpoints.1] {
            return Err(HmgError::PartitionMismatch { atoms: n });
        }
        let mut f = vec![0.0; rule_count.max(1)];
        if r.rule < f.len() {
            f[r.rule] = 1.0;
        }
        g.push_pair(n + fa, n + fb, EdgeType::Reaction, f);
    }
    for (a, &fi) in owner.iter().enumerate() {
        g.push_pair(a, n + fi, EdgeType::Join, vec![1.0]);
    }
    let pe = laplacian_pe(&g, k_pe);
    for (node, pe) in g.nodes.iter_mut().zip(pe) {
        node.pe = pe;
    }
    Ok(g)
}

/// An elemental knowledge graph with compiled group patterns and its 2-hop
/// edges precomputed, shared across molecules.
#[derive(Debug, Clone)]
pub struct ElementKnowledge {
    pub kg: KnowledgeGraph,
    patterns: Vec<(usize, SmartsPattern)>,
    element_ids: BTreeMap<String, usize>,
    ee: Vec<DerivedEdge>,
    fufu: Vec<DerivedEdge>,
}

impl ElementKnowledge {
    pub fn new(kg: KnowledgeGraph) -> Result<Self, HmgError> {
        let mut patterns = Vec::new();
        for (&id, text) in &kg.group_patterns {
            patterns.push((id, parse_smarts(text)?));
        }
        let element_ids = kg.entities_of_kind(EntityKind::Element).map(|i| (kg.entities[i].name.clone(), i)).collect();
        let ee = two_hop_edges(&kg, (EntityKind::Element, EntityKind::Element));
        let fufu = two_hop_edges(&kg, (EntityKind::FunctionalGroup, EntityKind::FunctionalGroup));
        Ok(ElementKnowledge { kg, patterns, element_ids, ee, fufu })
    }

    fn node_features(&self, id: usize) -> Vec<f64> {
        let mut f = vec![0.0; KNOWLEDGE_NODE_FEATURE_WIDTH];
        f[self.kg.kind(id).index()] = 1.0;
        let d = self.kg.degree(id) as f64;
        f[EntityKind::ALL.len()] = d / (1.0 + d);
        f
    }
}

/// Element view: the molecule view plus Element nodes (AE to matching
/// atoms), FunctionalGroup nodes for groups matched entirely inside a
/// fragment (FrFu), 2-hop EE/FuFu edges among the added nodes, and EFu
/// edges for direct element-group triples.
pub fn build_element_view(
    base: &Hmg,
    mol: &MolecularGraph,
    frags: &FragmentSet,
    ek: &ElementKnowledge,
) -> Result<Hmg, HmgError> {
    if base.view != View::M {
        return Err(HmgError::NotMoleculeView(base.view));
    }
    let k = base.pe_dim();
    let n_atoms = mol.atom_count();
    let owner = frags.membership(n_atoms).ok_or(HmgError::PartitionMismatch { atoms: n_atoms })?;
    let mut g = base.clone();
    g.view = View::EM;
    let mut node_of: BTreeMap<usize, usize> = BTreeMap::new();

    let mut by_element: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in &mol.atoms {
        if let Some(&id) = ek.element_ids.get(a.element.symbol()) {
            by_element.entry(id).or_default().push(a.index);
        }
    }
    for (&id, atoms) in &by_element {
        let v = g.push_node(NodeType::Element, ek.node_features(id), vec![0.0; k], &ek.kg.entities[id].name);
        node_of.insert(id, v);
        for &a in atoms {
            g.push_pair(a, v, EdgeType::AE, vec![1.0]);
        }
    }

    let mut group_hits: Vec<(usize, Vec<usize>)> = Vec::new();
    for (id, pattern) in &ek.patterns {
        let mut hit_frags: Vec<usize> = match_smarts(pattern, mol)
            .into_iter()
            .filter_map(|m| {
                let f = owner[*m.first()?];
                m.iter().all(|&a| owner[a] == f).then_some(f)
            })
            .collect();
        hit_frags.sort_unstable();
        hit_frags.dedup();
        if !hit_frags.is_empty() {
            group_hits.push((*id, hit_frags));
        }
    }
    for (id, hit_frags) in &group_hits {
        let v = g.push_node(NodeType::FunctionalGroup, ek.node_features(*id), vec![0.0; k], &ek.kg.entities[*id].name);
        node_of.insert(*id, v);
        for &f in hit_frags {
            g.push_pair(n_atoms + f, v, EdgeType::FrFu, vec![1.0]);
        }
    }

    for (derived, kind) in [(&ek.ee, EdgeType::EE), (&ek.fufu, EdgeType::FuFu)] {
        for e in derived {
            if let (Some(&a), Some(&b)) = (node_of.get(&e.endpoints.0), node_of.get(&e.endpoints.1)) {
                g.push_pair(a, b, kind, e.hop_feature.clone());
            }
        }
    }

    let mut direct: Vec<(usize, usize, usize)> = Vec::new();
    for &(h, r, t) in &ek.kg.triples {
        let (el, fg) = match (ek.kg.kind(h), ek.kg.kind(t)) {
            (EntityKind::Element, EntityKind::FunctionalGroup) => (h, t),
            (EntityKind::FunctionalGroup, EntityKind::Element) => (t, h),
            _ => continue,
        };
        if node_of.contains_key(&el) && node_of.contains_key(&fg) {
            direct.push((el, fg, r));
        }
    }
    direct.sort_unstable();
    direct.dedup();
    for (el, fg, r) in direct {
        let mut f = vec![0.0; HOP_FEATURE_WIDTH];
        f[EntityKind::ALL.len() + relation_bucket(ek.kg.relation_name(r))] = 1.0;
        g.push_pair(node_of[&el], node_of[&fg], EdgeType::EFu, f);
    }
    Ok(g)
}

/// Drug view: the molecule view plus one DNode carrying the drug's
/// embedding, linked to every atom (AD) and fragment (FrD).
pub fn build_drug_view(base: &Hmg, emb: &EmbeddingTable, drug_id: &str) -> Result<Hmg, HmgError> {
    if base.view != View::M {
        return Err(HmgError::NotMoleculeView(base.view));
    }
    let vector = emb.get(drug_id).map_err(|e| match e {
        KgError::UnknownEntityAtLookup(name) => HmgError::UnknownEntityAtLookup(name),
        other => HmgError::Kg(other),
    })?;
    let mut features = vec![0.0; DNODE_FEATURE_WIDTH];
    for (x, y) in features.iter_mut().zip(vector) {
        *x = *y;
    }
    let mut g = base.clone();
    g.view = View::DM;
    g.drug_id = Some(drug_id.to_string());
    let d = g.push_node(NodeType::DNode, features, vec![0.0; base.pe_dim()], drug_id);
    for i in 0..base.nodes.len() {
        match base.nodes[i].kind {
            NodeType::Atom => g.push_pair(i, d, EdgeType::AD, vec![1.0]),
            NodeType::Fragment => g.push_pair(i, d, EdgeType::FrD, vec![1.0]),
            _ => {}
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeViews {
    pub m: Hmg,
    pub em: Hmg,
    pub dm: Option<Hmg>,
}

/// Everything needed to turn a parsed molecule into its views.
#[derive(Debug, Clone)]
pub struct ViewBuilder {
    pub rules: Vec<BricsRule>,
    pub element: ElementKnowledge,
    pub drug_embeddings: Option<EmbeddingTable>,
    pub k_pe: usize,
}

impl ViewBuilder {
    /// Builds M and EM, plus DM when `drug_id` has an embedding.
    pub fn build(&self, mol: &MolecularGraph, drug_id: Option<&str>) -> Result<MoleculeViews, HmgError> {
        let frags = brics_fragment(mol, &self.rules);
        let m = build_molecule_view(mol, &frags, self.rules.len(), self.k_pe)?;
        let em = build_element_view(&m, mol, &frags, &self.element)?;
        let dm = match (drug_id, &self.drug_embeddings) {
            (Some(id), Some(emb)) if emb.contains(id) => Some(build_drug_view(&m, emb, id)?),
            (Some(id), _) => {
                log::warn!("no embedding for drug `{id}`; drug view skipped");
                None
            }
            _ => None,
        };
        Ok(MoleculeViews { m, em, dm })
    }

    pub fn type_dims(&self) -> super::TypeDims {
        super::TypeDims::standard(self.rules.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{default_rules, parse_smiles};
    use crate::hmg::TypeDims;
    use crate::kg::{default_elemental_kg, parse_triples};

    fn amide_only() -> Vec<BricsRule> {
        default_rules().into_iter().filter(|r| r.id == "amide").collect()
    }

    #[test]
    fn ethanol_single_fragment() {
        let m = parse_smiles("CCO").unwrap();
        let g = build_molecule_view(&m, &FragmentSet::whole(&m), 8, 8).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 10);
        g.validate(Some(&TypeDims::standard(8))).unwrap();
    }

    #[test]
    fn amide_two_reaction_edges() {
        let m = parse_smiles("CC(=O)NC").unwrap();
        let f = brics_fragment(&m, &amide_only());
        let g = build_molecule_view(&m, &f, 1, 8).unwrap();
        assert_eq!(g.count_edges(EdgeType::Reaction), 2);
        assert_eq!(g.count_nodes(NodeType::Fragment), 2);
    }

    #[test]
    fn partition_mismatch() {
        let m = parse_smiles("CCO").unwrap();
        let bad = FragmentSet { fragments: vec![vec![0, 1]], reactions: vec![] };
        assert_eq!(build_molecule_view(&m, &bad, 1, 4), Err(HmgError::PartitionMismatch { atoms: 3 }));
    }

    #[test]
    fn element_view_toy() {
        let m = parse_smiles("CCO").unwrap();
        let f = FragmentSet::whole(&m);
        let base = build_molecule_view(&m, &f, 8, 4).unwrap();
        let ek = ElementKnowledge::new(parse_triples("C\thasWeight\tWeight2\nO\thasWeight\tWeight2\n").unwrap()).unwrap();
        let g = build_element_view(&base, &m, &f, &ek).unwrap();
        assert_eq!(g.count_nodes(NodeType::Element), 2);
        assert_eq!(g.count_edges(EdgeType::AE), 6);
        assert_eq!(g.count_edges(EdgeType::EE), 2);
        g.validate(Some(&TypeDims::standard(8))).unwrap();
        assert_eq!(&g.nodes[..4], &base.nodes[..]);
        assert_eq!(&g.edges[..10], &base.edges[..]);
    }

    #[test]
    fn element_view_without_hits() {
        let m = parse_smiles("CCO").unwrap();
        let f = FragmentSet::whole(&m);
        let base = build_molecule_view(&m, &f, 8, 4).unwrap();
        let ek = ElementKnowledge::new(parse_triples("Fe\thasWeight\tWeight4\n").unwrap()).unwrap();
        let g = build_element_view(&base, &m, &f, &ek).unwrap();
        assert_eq!((g.nodes.clone(), g.edges.clone()), (base.nodes.clone(), base.edges.clone()));
    }

    #[test]
    fn acetal_gets_frfu() {
        let m = parse_smiles("CC1OCCO1").unwrap();
        let f = brics_fragment(&m, &default_rules());
        let base = build_molecule_view(&m, &f, 8, 4).unwrap();
        let ek = ElementKnowledge::new(default_elemental_kg()).unwrap();
        let g = build_element_view(&base, &m, &f, &ek).unwrap();
        let acetal = g.nodes.iter().position(|n| n.label == "Acetal").expect("acetal node");
        assert!(g.edges.iter().any(|e| e.kind == EdgeType::FrFu && e.target == acetal));
        assert!(g.count_edges(EdgeType::EFu) > 0);
        g.validate(Some(&TypeDims::standard(8))).unwrap();
    }

    #[test]
    fn drug_view() {
        let m = parse_smiles("CCO").unwrap();
        let base = build_molecule_view(&m, &FragmentSet::whole(&m), 8, 4).unwrap();
        let emb = EmbeddingTable::new(vec!["DB00001".into()], vec![vec![0.5; 40]]).unwrap();
        let g = build_drug_view(&base, &emb, "DB00001").unwrap();
        assert_eq!(g.node_count(), base.node_count() + 1);
        assert_eq!(g.edge_count(), base.edge_count() + 2 * 4);
        let d = g.node_count() - 1;
        assert_eq!(g.edges.iter().filter(|e| e.target == d).count(), 4);
        assert_eq!(g.nodes[d].features.len(), DNODE_FEATURE_WIDTH);
        g.validate(Some(&TypeDims::standard(8))).unwrap();
        assert_eq!(build_drug_view(&base, &emb, "DB9"), Err(HmgError::UnknownEntityAtLookup("DB9".into())));
    }

    #[test]
    fn serialization_round_trip() {
        let m = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let b = ViewBuilder {
            rules: default_rules(),
            element: ElementKnowledge::new(default_elemental_kg()).unwrap(),
            drug_embeddings: Some(EmbeddingTable::new(vec!["DB00316".into()], vec![vec![0.1, -0.2, 0.3]]).unwrap()),
            k_pe: 8,
        };
        let v = b.build(&m, Some("DB00316")).unwrap();
        for g in [&v.m, &v.em, v.dm.as_ref().unwrap()] {
            let text = g.serialize();
            let back = Hmg::parse(&text).unwrap();
            assert_eq!(&back, g);
            assert_eq!(back.serialize(), text);
        }
    }
}
