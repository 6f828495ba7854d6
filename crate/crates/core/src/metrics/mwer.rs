//! Resegmentation of a document hypothesis against sentence references.
//!
//! The minimum over all segmentations of the summed per-sentence word edit
//! distance equals the edit distance between the hypothesis and the
//! concatenated references, since any alignment against the concatenation
//! splits at the sentence joints. The cost is therefore one backward
//! Levenshtein table; boundaries are then recovered greedily, taking at each
//! joint the earliest hypothesis position that still lies on an optimal path.
//! Comparison is on lowercased whitespace tokens.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Exclusive end of each piece in the hypothesis, one per reference;
    /// the last equals the hypothesis length.
    pub ends: Vec<usize>,
    pub total_edit_distance: usize,
}

impl Segmentation {
    /// Half-open hypothesis ranges, one per reference.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.ends
            .iter()
            .map(|&end| {
                let r = start..end;
                start = end;
                r
            })
            .collect()
    }

    pub fn pieces<'a, T>(&self, hyp: &'a [T]) -> Vec<&'a [T]> {
        self.ranges().into_iter().map(|r| &hyp[r]).collect()
    }
}

/// Word-level Levenshtein distance with unit costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let next = (row[j + 1] + 1)
                .min(row[j] + 1)
                .min(diag + usize::from(x != y));
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Splits `hyp_words` into one contiguous piece per reference sentence,
/// minimizing the summed edit distance; ties go to earlier boundaries.
pub fn mwer_segment<S: AsRef<str>, R: AsRef<str>>(hyp_words: &[S], ref_sentences: &[R]) -> Segmentation {
    let hyp: Vec<String> = hyp_words.iter().map(|w| w.as_ref().to_lowercase()).collect();
    let refs: Vec<Vec<String>> = ref_sentences
        .iter()
        .map(|s| s.as_ref().split_whitespace().map(str::to_lowercase).collect())
        .collect();
    let h = hyp.len();
    if refs.is_empty() {
        return Segmentation {
            ends: Vec::new(),
            total_edit_distance: h,
        };
    }

    let concat: Vec<&String> = refs.iter().flatten().collect();
    let mut joints = Vec::with_capacity(refs.len());
    let mut acc = 0;
    for r in &refs {
        acc += r.len();
        joints.push(acc);
    }

    // suffix[r][i] = lev(hyp[i..], concat[joints[r]..]) for interior joints.
    let interior = &joints[..joints.len() - 1];
    let mut suffix: Vec<Vec<usize>> = vec![Vec::new(); interior.len()];
    let m = concat.len();
    let mut col: Vec<usize> = (0..=h).map(|i| h - i).collect();
    let mut next_joint = interior.len();
    for j in (0..=m).rev() {
        if j < m {
            let mut new = vec![0; h + 1];
            new[h] = m - j;
            for i in (0..h).rev() {
                new[i] = (new[i + 1] + 1)
                    .min(col[i] + 1)
                    .min(col[i + 1] + usize::from(hyp[i] != *concat[j]));
            }
            col = new;
        }
        while next_joint > 0 && interior[next_joint - 1] == j {
            next_joint -= 1;
            suffix[next_joint] = col.clone();
        }
    }
    let total = col[0];

    let mut ends = Vec::with_capacity(refs.len());
    let mut start = 0;
    let mut spent = 0;
    for (r, sentence) in refs.iter().enumerate().take(interior.len()) {
        let prefix = piece_costs(&hyp[start..], sentence);
        let offset = (0..prefix.len())
            .find(|&d| spent + prefix[d] + suffix[r][start + d] == total)
            .expect("an optimal path crosses every sentence joint");
        spent += prefix[offset];
        start += offset;
        ends.push(start);
    }
    ends.push(h);
    debug_assert_eq!(spent + levenshtein(&hyp[start..], refs.last().unwrap()), total);
    Segmentation {
        ends,
        total_edit_distance: total,
    }
}

/// `out[d] = lev(hyp[..d], sentence)` for every prefix length `d`.
fn piece_costs(hyp: &[String], sentence: &[String]) -> Vec<usize> {
    let mut row: Vec<usize> = (0..=hyp.len()).collect();
    for (j, word) in sentence.iter().enumerate() {
        let mut new = vec![j + 1; hyp.len() + 1];
        for d in 1..=hyp.len() {
            new[d] = (row[d] + 1)
                .min(new[d - 1] + 1)
                .min(row[d - 1] + usize::from(hyp[d - 1] != *word));
        }
        row = new;
    }
    row
}
