use normgap::words::{Letter, Word};

/// Cancels adjacent inverse pairs one at a time, choosing among the
/// available spots with `pick`, until none remain.
pub fn reduce_in_order(w: &Word, mut pick: impl FnMut(usize) -> usize) -> Word {
    let mut letters: Vec<Letter> = w.letters().to_vec();
    loop {
        let spots: Vec<usize> = (0..letters.len().saturating_sub(1))
            .filter(|&i| letters[i + 1] == letters[i].inverse())
            .collect();
        if spots.is_empty() {
            return Word::new(letters);
        }
        let i = spots[pick(spots.len()) % spots.len()];
        letters.drain(i..i + 2);
    }
}
