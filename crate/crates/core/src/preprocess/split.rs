use rand::seq::SliceRandom;
use rand::Rng;

/// Train/test split settings. The shuffle is unstratified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Shuffles `0..n` and cuts it at `round(train_fraction · n)`. Both index
/// lists keep the shuffled order.
pub fn split<R: Rng + ?Sized>(
    n: usize,
    train_fraction: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    assert!(n > 0, "cannot split an empty dataset");
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train_fraction must lie in (0, 1)"
    );
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let n_train = (train_fraction * n as f64).round() as usize;
    let test = perm.split_off(n_train);
    (perm, test)
}
