use similar::{capture_diff_slices, Algorithm, DiffOp};

/// The lines MML compares: trailing whitespace stripped, blank lines dropped.
pub fn significant_lines(text: &str) -> Vec<&str> {
    text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect()
}

/// Manually modified lines of `after` relative to `before`.
///
/// Each contiguous change block of `d` deleted and `i` inserted lines counts
/// `i` (added or changed lines), plus one when the block deletes more than
/// it inserts: a pure deletion is one edit at the deletion site.
pub fn compute_mml(before: &str, after: &str) -> usize {
    let old = significant_lines(before);
    let new = significant_lines(after);
    let ops = capture_diff_slices(Algorithm::Myers, &old, &new);
    let mut total = 0;
    let (mut deleted, mut inserted) = (0usize, 0usize);
    let mut flush = |d: &mut usize, i: &mut usize| {
        if *d + *i > 0 {
            total += *i + usize::from(*d > *i);
        }
        *d = 0;
        *i = 0;
    };
    for op in ops {
        match op {
            DiffOp::Equal { .. } => flush(&mut deleted, &mut inserted),
            DiffOp::Delete { old_len, .. } => deleted += old_len,
            DiffOp::Insert { new_len, .. } => inserted += new_len,
            DiffOp::Replace { old_len, new_len, .. } => {
                deleted += old_len;
                inserted += new_len;
            }
        }
    }
    flush(&mut deleted, &mut inserted);
    total
}
