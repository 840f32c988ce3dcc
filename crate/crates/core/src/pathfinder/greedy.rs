//! Greedy pair selection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Merger};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyParams {
    /// Weight `w` in `size(result) - w * (size(a) + size(b))`.
    pub weight: f64,
    /// Gumbel noise scale on the log of the score; 0 is deterministic.
    pub temperature: f64,
}

impl Default for GreedyParams {
    fn default() -> Self {
        GreedyParams { weight: 1.0, temperature: 0.0 }
    }
}

fn signed_log(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

fn gumbel(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    -(-u.ln()).ln()
}

pub(crate) fn greedy_pairs(g: &Graph, params: GreedyParams, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut st = Merger::new(g);
    let size_of = |st: &Merger, id: usize| g.size(st.live[id].as_ref().expect("live"));
    while st.live_ids().len() > 1 {
        let mut candidates = st.neighbor_pairs();
        if candidates.is_empty() {
            let mut ids = st.live_ids();
            ids.sort_by(|&a, &b| size_of(&st, a).total_cmp(&size_of(&st, b)).then(a.cmp(&b)));
            let (a, b) = (ids[0].min(ids[1]), ids[0].max(ids[1]));
            candidates.push((a, b));
        }
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for (a, b) in candidates {
            let r = st.result_modes(a, b);
            let score = g.size(&r) - params.weight * (size_of(&st, a) + size_of(&st, b));
            let key = if params.temperature > 0.0 { signed_log(score) - params.temperature * gumbel(rng) } else { score };
            let flops = st.flops(a, b);
            let better = match best {
                None => true,
                Some((k, f, _, _)) => key < k || (key == k && flops < f),
            };
            if better {
                best = Some((key, flops, a, b));
            }
        }
        let (_, _, a, b) = best.expect("at least one candidate");
        st.merge(a, b);
    }
    st.pairs
}
