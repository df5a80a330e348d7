//! Greedy multiway number partitioning.

/// Assigns each item to one of `parts` bins by walking the sizes in
/// descending order and placing each item in the bin with the smallest
/// running total. Bins holding `cap` items are skipped.
///
/// Ties are deterministic: equal sizes keep their input order and equal
/// running totals go to the lowest-numbered bin. Returns the bin of every
/// item, indexed like `sizes`.
pub fn greedy_partition(sizes: &[usize], parts: usize, cap: Option<usize>) -> Vec<usize> {
    greedy_partition_ordered(sizes, &(0..sizes.len()).collect::<Vec<_>>(), parts, cap)
}

/// Same as [`greedy_partition`] but ties among equal sizes follow `order`
/// instead of the input order.
pub fn greedy_partition_ordered(
    sizes: &[usize],
    order: &[usize],
    parts: usize,
    cap: Option<usize>,
) -> Vec<usize> {
    assert!(parts > 0, "at least one part is required");
    assert_eq!(order.len(), sizes.len());
    let cap = cap.unwrap_or(usize::MAX);
    assert!(
        cap.saturating_mul(parts) >= sizes.len(),
        "count cap too small for the number of items"
    );

    let mut order = order.to_vec();
    // Stable sort keeps the supplied order among equal sizes.
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));

    let mut totals = vec![0usize; parts];
    let mut counts = vec![0usize; parts];
    let mut assignment = vec![0usize; sizes.len()];
    for i in order {
        let bin = (0..parts)
            .filter(|&p| counts[p] < cap)
            .min_by_key(|&p| (totals[p], p))
            .expect("cap leaves room for every item");
        assignment[i] = bin;
        totals[bin] += sizes[i];
        counts[bin] += 1;
    }
    assignment
}

/// Per-bin totals of an assignment.
pub fn bin_totals(sizes: &[usize], assignment: &[usize], parts: usize) -> Vec<usize> {
    let mut totals = vec![0; parts];
    for (s, &b) in sizes.iter().zip(assignment) {
        totals[b] += s;
    }
    totals
}
