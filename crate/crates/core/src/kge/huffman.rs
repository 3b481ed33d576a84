//! Huffman coding of output labels for hierarchical softmax.

use crate::kge::KgeError;

/// Codes and paths for every label; internal nodes are numbered
/// `0..labels-1`, root last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    labels: Vec<String>,
    codes: Vec<Vec<bool>>,
    paths: Vec<Vec<usize>>,
    children: Vec<(usize, usize)>,
}

impl HuffmanTree {
    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn internal_count(&self) -> usize {
        self.labels.len().saturating_sub(1)
    }

    /// Labels in leaf order (count descending, then lexicographic).
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn code(&self, leaf: usize) -> &[bool] {
        &self.codes[leaf]
    }

    /// Internal node indices from the leaf's parent up to the root.
    pub fn path(&self, leaf: usize) -> &[usize] {
        &self.paths[leaf]
    }

    /// Children of internal node `i` as tree ids: `< labels` are leaves,
    /// otherwise `labels + internal index`. The second child carries bit 1.
    pub fn children(&self, internal: usize) -> (usize, usize) {
        self.children[internal]
    }

    pub fn root(&self) -> Option<usize> {
        self.internal_count().checked_sub(1)
    }
}

/// Builds the tree from label counts. Leaves are ordered by count descending
/// and label ascending; merges use the two-queue method, preferring the
/// internal node on equal counts.
pub fn build_huffman<'a, I>(label_freqs: I) -> Result<HuffmanTree, KgeError>
where
    I: IntoIterator<Item = (&'a str, u64)>,
{
    let mut leaves: Vec<(String, u64)> =
        label_freqs.into_iter().map(|(l, c)| (l.to_string(), c)).collect();
    if leaves.is_empty() {
        return Err(KgeError::EmptyLabels);
    }
    if let Some((l, _)) = leaves.iter().find(|(_, c)| *c == 0) {
        return Err(KgeError::Invalid(format!("label {l:?} has zero count")));
    }
    leaves.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let n = leaves.len();
    let total = 2 * n - 1;
    let mut count = vec![u64::MAX; total];
    let mut parent = vec![usize::MAX; total];
    let mut binary = vec![false; total];
    let mut children = Vec::with_capacity(n.saturating_sub(1));
    for (i, (_, c)) in leaves.iter().enumerate() {
        count[i] = *c;
    }
    let mut leaf = n as isize - 1;
    let mut node = n;
    for i in n..total {
        let mut pick = [0usize; 2];
        for slot in pick.iter_mut() {
            if leaf >= 0 && count[leaf as usize] < count[node] {
                *slot = leaf as usize;
                leaf -= 1;
            } else {
                *slot = node;
                node += 1;
            }
        }
        count[i] = count[pick[0]] + count[pick[1]];
        parent[pick[0]] = i;
        parent[pick[1]] = i;
        binary[pick[1]] = true;
        children.push((pick[0], pick[1]));
    }
    let mut codes = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let mut code = Vec::new();
        let mut path = Vec::new();
        let mut j = i;
        while parent[j] != usize::MAX {
            code.push(binary[j]);
            path.push(parent[j] - n);
            j = parent[j];
        }
        codes.push(code);
        paths.push(path);
    }
    Ok(HuffmanTree { labels: leaves.into_iter().map(|(l, _)| l).collect(), codes, paths, children })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    fn code_len(t: &HuffmanTree, label: &str) -> usize {
        let i = t.labels().iter().position(|l| l == label).unwrap();
        t.code(i).len()
    }

    fn is_prefix_free(t: &HuffmanTree) -> bool {
        let n = t.label_count();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    // codes are stored leaf-to-root; compare root-first
                    let ca: Vec<bool> = t.code(a).iter().rev().copied().collect();
                    let cb: Vec<bool> = t.code(b).iter().rev().copied().collect();
                    if cb.starts_with(&ca) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Independent optimum: total cost of a heap-based Huffman merge.
    fn optimal_cost(freqs: &[u64]) -> u64 {
        let mut heap: BinaryHeap<Reverse<u64>> = freqs.iter().map(|&f| Reverse(f)).collect();
        let mut cost = 0;
        while heap.len() > 1 {
            let Reverse(a) = heap.pop().unwrap();
            let Reverse(b) = heap.pop().unwrap();
            cost += a + b;
            heap.push(Reverse(a + b));
        }
        cost
    }

    #[test]
    fn single_label_has_empty_code() {
        let t = build_huffman([("only", 3)]).unwrap();
        assert!(t.code(0).is_empty());
        assert_eq!(t.root(), None);
    }

    #[test]
    fn skewed_three_labels() {
        let t = build_huffman([("a", 1), ("b", 1), ("c", 2)]).unwrap();
        assert_eq!(code_len(&t, "c"), 1);
        assert_eq!(code_len(&t, "a"), 2);
        assert_eq!(code_len(&t, "b"), 2);
    }

    #[test]
    fn uniform_four_labels_balanced() {
        let t = build_huffman([("w", 5), ("x", 5), ("y", 5), ("z", 5)]).unwrap();
        for l in ["w", "x", "y", "z"] {
            assert_eq!(code_len(&t, l), 2);
        }
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(build_huffman(Vec::<(&str, u64)>::new()), Err(KgeError::EmptyLabels)));
    }

    #[test]
    fn tie_order_is_deterministic() {
        let a = build_huffman([("b", 1), ("a", 1), ("c", 1)]).unwrap();
        let b = build_huffman([("c", 1), ("a", 1), ("b", 1)]).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn prefix_free_and_optimal(freqs in proptest::collection::vec(1u64..50, 1..24)) {
            let names: Vec<String> = (0..freqs.len()).map(|i| format!("l{i:02}")).collect();
            let t = build_huffman(names.iter().map(String::as_str).zip(freqs.iter().copied())).unwrap();
            prop_assert!(is_prefix_free(&t));
            let weighted: u64 = names
                .iter()
                .zip(&freqs)
                .map(|(n, f)| f * code_len(&t, n) as u64)
                .sum();
            prop_assert_eq!(weighted, optimal_cost(&freqs));
        }
    }
}
