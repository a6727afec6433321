use hetmol_web::{attention, pair_losses, views, DemoError};

#[test]
fn acetaminophen_views() {
    let v = views("CC(=O)Nc1ccc(O)cc1").unwrap();
    assert_eq!((v.atoms, v.bonds), (11, 11));
    assert_eq!(v.views.len(), 2);
    assert_eq!((v.views[0].view.as_str(), v.views[1].view.as_str()), ("M", "EM"));
    let covered: usize = v.fragments.iter().map(Vec::len).sum();
    assert_eq!(covered, 11);
    assert!(v.views[1].nodes.len() > v.views[0].nodes.len());
}

#[test]
fn attention_normalizes_within_each_type() {
    let scores = attention("CCOc1ccccc1", "EM", 3).unwrap();
    for t in ["Atom", "Fragment", "Element", "FunctionalGroup"] {
        let s: f64 = scores.iter().filter(|n| n.node_type == t).map(|n| n.normalized).sum();
        assert!(s == 0.0 || (s - 1.0).abs() < 1e-12, "{t}: {s}");
    }
    assert!(matches!(attention("CCO", "DM", 0), Err(DemoError::View(_))));
}

#[test]
fn pair_loss_on_a_small_batch() {
    let r = pair_losses("CCO\nc1ccccc1\n\nCC(=O)O\n", 0.1, 1).unwrap();
    assert_eq!(r.anchors.len(), 3);
    assert_eq!(r.cosine.len(), 3);
    assert!(r.anchors.iter().chain([&r.view_pair]).all(|x| x.is_finite()));
    // Two copies of one molecule: the intra negative is the anchor itself
    // (cosine 1) and the inter negative equals the positive.
    let same = pair_losses("CCO\nCCO", 0.1, 1).unwrap();
    let c = same.cosine[0][0];
    for x in same.anchors {
        let want = ((1.0f64 / 0.1).exp() + (c / 0.1).exp()).ln() - c / 0.1;
        assert!((x - want).abs() < 1e-9, "{x} vs {want}");
    }
    assert!(matches!(pair_losses("CCO", 0.1, 1), Err(DemoError::TooFewMolecules(1))));
    assert!(matches!(pair_losses("CCO\nC1CC", 0.1, 1), Err(DemoError::Smiles { line: 2, .. })));
}
