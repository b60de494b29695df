use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::SeverityClass;
use crate::error::{Error, Result};

/// Shuffles `0..n` by `seed` and cuts it into `k` folds; the first `n % k`
/// folds take one extra index. Each fold is returned sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Argument(format!("{k} folds requested for {n} samples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Splits `indices` into `(train, holdout)` with roughly `fraction` of each
/// severity class held out. Both sides are nonempty when `indices` has at
/// least two entries.
pub fn stratified_holdout(
    indices: &[usize],
    classes: &[SeverityClass],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::Argument(format!("holdout fraction {fraction} outside (0, 1)")));
    }
    if indices.len() < 2 {
        return Err(Error::Argument("holdout needs at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in SeverityClass::ALL {
        let mut members: Vec<usize> = indices.iter().copied().filter(|&i| classes[i] == class).collect();
        members.shuffle(&mut rng);
        let take = (members.len() as f64 * fraction).round() as usize;
        holdout.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    if holdout.is_empty() {
        let i = rng_pick(&mut rng, train.len());
        holdout.push(train.remove(i));
    }
    if train.is_empty() {
        let i = rng_pick(&mut rng, holdout.len());
        train.push(holdout.remove(i));
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}

fn rng_pick(rng: &mut ChaCha8Rng, len: usize) -> usize {
    use rand::Rng;
    rng.random_range(0..len)
}
