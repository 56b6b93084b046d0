use super::Scenario;
use crate::error::{Error, Result};
use crate::model::UncertaintySet;

/// Vertices of `{g in [0,1]^K : sum(g) <= gamma}` for integer `gamma`: every
/// binary vector with at most `gamma` ones, in lexicographic order of `g`.
pub fn enumerate_poles(uset: &UncertaintySet, limit: usize) -> Result<Vec<Scenario>> {
    let k = uset.len();
    if k > limit {
        return Err(Error::Capacity(format!(
            "{k} uncertainty coordinates exceed the exact enumeration limit of {limit}"
        )));
    }
    let gamma = uset.gamma.min(k) as u32;
    let poles = (0u64..1 << k)
        .filter(|mask| mask.count_ones() <= gamma)
        // Coordinate 0 is the most significant bit so that ascending masks are
        // ascending in lexicographic order of g.
        .map(|mask| Scenario { g: (0..k).map(|j| ((mask >> (k - 1 - j)) & 1) as f64).collect() })
        .collect();
    Ok(poles)
}

/// Number of poles, `sum_{j <= gamma} C(K, j)`.
pub fn pole_count(uset: &UncertaintySet) -> u64 {
    let k = uset.len() as u64;
    let mut total = 0u64;
    let mut binom = 1u64;
    for j in 0..=uset.gamma.min(uset.len()) as u64 {
        total += binom;
        binom = binom * (k - j) / (j + 1);
    }
    total
}
