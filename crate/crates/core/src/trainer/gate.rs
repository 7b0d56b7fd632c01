use alloc::vec::Vec;

/// Latches `active[i]` once `per_head_em[i] < threshold`; never unlatches.
/// A NaN estimate never activates a head.
pub fn em_gate(per_head_em: &[f64], active: &[bool], threshold: f64) -> Vec<bool> {
    per_head_em
        .iter()
        .zip(active)
        .map(|(&em, &was)| was || em < threshold)
        .collect()
}

/// Cluster-size-weighted mean of per-head EM estimates.
pub fn global_em(per_head_em: &[f64], sizes: &[usize]) -> f64 {
    let total: usize = sizes.iter().sum();
    per_head_em
        .iter()
        .zip(sizes)
        .map(|(&em, &n)| em * n as f64)
        .sum::<f64>()
        / total as f64
}
