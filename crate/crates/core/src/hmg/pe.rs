use nalgebra::{DMatrix, SymmetricEigen};

use super::{EdgeType, Hmg};

pub const DEFAULT_PE_DIM: usize = 8;

/// Entries within this of the largest magnitude count as tied for the
/// sign rule; the lowest index among them decides.
const SIGN_TIE: f64 = 1e-9;

/// Eigenvectors of the symmetric normalized Laplacian for the `k` smallest
/// eigenvalues after the first, one row per node, zero-padded when the
/// graph has fewer than `k + 1` nodes. Each eigenvector is signed so that
/// its largest-magnitude entry is positive.
pub fn laplacian_pe_graph(n: usize, edges: &[(usize, usize)], k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; k]; n];
    if n < 2 || k == 0 {
        return out;
    }
    let mut adj = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in edges {
        if a != b {
            adj[(a, b)] = 1.0;
            adj[(b, a)] = 1.0;
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| adj.row(i).sum()).collect();
    let mut lap = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if adj[(i, j)] != 0.0 {
                lap[(i, j)] -= 1.0 / (deg[i] * deg[j]).sqrt();
            }
        }
        if deg[i] == 0.0 {
            lap[(i, i)] = 0.0;
        }
    }
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    for (slot, &col) in order.iter().skip(1).take(k).enumerate() {
        let v = eig.eigenvectors.column(col);
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = v.iter().position(|x| x.abs() >= max - SIGN_TIE).unwrap_or(0);
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[i][slot] = sign * v[i];
        }
    }
    out
}

/// Positional vectors for every node: computed on the Atom/Fragment
/// subgraph over Bond, Join and Reaction edges; zero for knowledge nodes.
pub fn laplacian_pe(hmg: &Hmg, k: usize) -> Vec<Vec<f64>> {
    let scaffold: Vec<usize> = (0..hmg.nodes.len()).filter(|&i| hmg.nodes[i].kind.is_scaffold()).collect();
    let mut local = vec![usize::MAX; hmg.nodes.len()];
    for (li, &gi) in scaffold.iter().enumerate() {
        local[gi] = li;
    }
    let edges: Vec<(usize, usize)> = hmg
        .edges
        .iter()
        .filter(|e| matches!(e.kind, EdgeType::Bond | EdgeType::Join | EdgeType::Reaction))
        .filter(|e| e.source < e.target)
        .map(|e| (local[e.source], local[e.target]))
        .collect();
    let pe = laplacian_pe_graph(scaffold.len(), &edges, k);
    let mut out = vec![vec![0.0; k]; hmg.nodes.len()];
    for (li, &gi) in scaffold.iter().enumerate() {
        out[gi] = pe[li].clone();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_is_zero() {
        assert_eq!(laplacian_pe_graph(1, &[], 4), vec![vec![0.0; 4]]);
    }

    #[test]
    fn path_three() {
        // normalized Laplacian of P3 has eigenvalues 0, 1, 2
        let pe = laplacian_pe_graph(3, &[(0, 1), (1, 2)], 4);
        let s = 0.5f64.sqrt();
        // the second eigenvector's largest entry is the middle one, so it is flipped
        let want = [[s, -0.5, 0.0, 0.0], [0.0, s, 0.0, 0.0], [-s, -0.5, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..4 {
                assert!((pe[i][j] - want[i][j]).abs() < 1e-8, "{pe:?}");
            }
        }
    }
}
