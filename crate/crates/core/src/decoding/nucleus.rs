use rand::Rng;

use crate::rng::EngineRng;

/// Indices of the smallest set of highest-probability entries whose mass
/// reaches `p` (ties broken by lower index). Zero-probability entries are
/// never included.
pub fn top_p_set(probs: &[f64], p: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut keep = 0;
    for &i in &order {
        mass += probs[i];
        keep += 1;
        if mass >= p {
            break;
        }
    }
    order.truncate(keep);
    order
}

/// Renormalizes `weights`, restricts to the top-p set and samples from it.
/// Returns the index and the renormalized distribution, or None when all
/// weights are zero.
pub(super) fn sample(weights: &[f64], p: f64, rng: &mut EngineRng) -> Option<(usize, Vec<f64>)> {
    let z: f64 = weights.iter().sum();
    if !(z > 0.0) {
        return None;
    }
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let set = top_p_set(&probs, p);
    let mass: f64 = set.iter().map(|&i| probs[i]).sum();
    let mut u = rng.gen::<f64>() * mass;
    let mut pick = *set.last().expect("top-p set is non-empty");
    for &i in &set {
        if u < probs[i] {
            pick = i;
            break;
        }
        u -= probs[i];
    }
    Some((pick, probs))
}
