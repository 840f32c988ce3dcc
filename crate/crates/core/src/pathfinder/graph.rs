//! Structural view of a network: label sets as bitsets over dense label ids.

use crate::tn::{Label, TensorNetwork};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    pub fn empty(words: usize) -> Self {
        Bits(vec![0; words])
    }

    pub fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn or(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a | b).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut x = word;
            std::iter::from_fn(move || {
                (x != 0).then(|| {
                    let t = x.trailing_zeros() as usize;
                    x &= x - 1;
                    w * 64 + t
                })
            })
        })
    }
}

/// Label sets of the items being contracted plus the labels that must survive.
#[derive(Debug, Clone)]
pub(crate) struct Graph {
    pub labels: Vec<Label>,
    pub extent: Vec<f64>,
    pub items: Vec<Bits>,
    pub external: Bits,
}

impl Graph {
    pub fn from_network(tn: &TensorNetwork) -> Self {
        let labels: Vec<Label> = tn.labels().collect();
        let words = labels.len().div_ceil(64).max(1);
        let index = |l: &Label| labels.binary_search(l).expect("label in network");
        let bits_of = |ls: &[Label]| {
            let mut b = Bits::empty(words);
            ls.iter().for_each(|l| b.set(index(l)));
            b
        };
        Graph {
            extent: labels.iter().map(|&l| tn.extent(l).unwrap_or(1) as f64).collect(),
            items: tn.tensors().iter().map(|t| bits_of(&t.modes)).collect(),
            external: bits_of(tn.output()),
            labels,
        }
    }

    pub fn words(&self) -> usize {
        self.external.0.len()
    }

    pub fn size(&self, b: &Bits) -> f64 {
        b.iter().map(|i| self.extent[i]).product()
    }

    /// A subproblem over `items` that keeps `external`.
    pub fn sub(&self, items: Vec<Bits>, external: Bits) -> Graph {
        Graph { labels: self.labels.clone(), extent: self.extent.clone(), items, external }
    }

    /// How many items carry each label, plus one for external labels.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.labels.len()];
        for b in self.items.iter().chain(std::iter::once(&self.external)) {
            b.iter().for_each(|i| c[i] += 1);
        }
        c
    }
}

/// Incremental pair-merging state shared by greedy and simplification.
pub(crate) struct Merger<'g> {
    pub g: &'g Graph,
    pub live: Vec<Option<Bits>>,
    pub counts: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

impl<'g> Merger<'g> {
    pub fn new(g: &'g Graph) -> Self {
        Merger { g, live: g.items.iter().cloned().map(Some).collect(), counts: g.counts(), pairs: Vec::new() }
    }

    pub fn result_modes(&self, a: usize, b: usize) -> Bits {
        let (x, y) = (self.live[a].as_ref().expect("live"), self.live[b].as_ref().expect("live"));
        let mut r = Bits::empty(self.g.words());
        for i in x.or(y).iter() {
            let inside = usize::from(x.contains(i)) + usize::from(y.contains(i));
            if self.counts[i] > inside {
                r.set(i);
            }
        }
        r
    }

    pub fn flops(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.live[a].as_ref().expect("live"), self.live[b].as_ref().expect("live"));
        self.g.size(&x.or(y))
    }

    pub fn merge(&mut self, a: usize, b: usize) -> usize {
        let r = self.result_modes(a, b);
        for i in self.live[a].take().expect("live").iter() {
            self.counts[i] -= 1;
        }
        for i in self.live[b].take().expect("live").iter() {
            self.counts[i] -= 1;
        }
        r.iter().for_each(|i| self.counts[i] += 1);
        self.live.push(Some(r));
        self.pairs.push((a, b));
        self.live.len() - 1
    }

    pub fn live_ids(&self) -> Vec<usize> {
        (0..self.live.len()).filter(|&i| self.live[i].is_some()).collect()
    }

    /// Live pairs sharing at least one label, ascending.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); self.g.labels.len()];
        for id in self.live_ids() {
            self.live[id].as_ref().expect("live").iter().for_each(|l| by_label[l].push(id));
        }
        let mut out: Vec<(usize, usize)> = by_label
            .iter()
            .flat_map(|ids| ids.iter().enumerate().flat_map(move |(k, &a)| ids[k + 1..].iter().map(move |&b| (a, b))))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
