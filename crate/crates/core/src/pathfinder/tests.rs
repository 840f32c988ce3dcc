use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numeric::C64;
use crate::tn::{contract_pair, parse_einsum, path_cost};

fn random_network(n: usize, pool: u32, max_rank: usize, rng: &mut ChaCha8Rng) -> TensorNetwork {
    let extents: Vec<usize> = (0..pool).map(|_| rng.random_range(2..=4)).collect();
    let mut tn = TensorNetwork::new();
    let mut used = Vec::new();
    for _ in 0..n {
        let mut labels: Vec<u32> = (0..pool).collect();
        labels.shuffle(rng);
        let k = rng.random_range(1..=max_rank);
        let modes: Vec<Label> = labels[..k].iter().map(|&m| Label(m)).collect();
        let ext: Vec<usize> = labels[..k].iter().map(|&m| extents[m as usize]).collect();
        let len: usize = ext.iter().product();
        let data = (0..len).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        used.extend(modes.iter().copied());
        tn.add_tensor(modes, ext, Some(data)).unwrap();
    }
    used.sort_unstable();
    used.dedup();
    used.shuffle(rng);
    let keep = rng.random_range(0..=used.len().min(2));
    tn.set_output(used[..keep].to_vec()).unwrap();
    tn
}

/// Contracts along `tree` summing over every assignment of its sliced labels.
fn contract_sliced(tn: &TensorNetwork, tree: &ContractionTree) -> Tensor {
    let sliced: Vec<(Label, usize)> = tree.sliced().iter().map(|&l| (l, tn.extent(l).unwrap())).collect();
    let total: usize = sliced.iter().map(|s| s.1).product();
    let out_ext = tn.output_extents();
    let mut result = Tensor::zeros(tn.output().to_vec(), out_ext.clone()).unwrap();
    for ord in 0..total {
        let mut rem = ord;
        let mut fixed = Vec::new();
        for &(l, e) in sliced.iter().rev() {
            fixed.push((l, rem % e));
            rem /= e;
        }
        let mut vals: Vec<Option<Tensor>> = (0..tn.num_tensors()).map(|i| Some(tn.tensor(i).unwrap().project(&fixed))).collect();
        for (k, &(x, y)) in tree.pairs().iter().enumerate() {
            let (a, b) = (vals[x].take().unwrap(), vals[y].take().unwrap());
            vals.push(Some(contract_pair(&a, &b, &tree.node(tree.num_leaves() + k).modes).unwrap()));
        }
        let part = vals.pop().unwrap().unwrap();
        // reduce leftover modes of a lone leaf, then scatter into the output
        let open: Vec<Label> = tn.output().iter().copied().filter(|l| !tree.sliced().contains(l)).collect();
        let part = contract_pair(&part, &Tensor::scalar(C64::new(1.0, 0.0)), &open).unwrap().permuted(&open).unwrap();
        let mut idx = vec![0usize; open.len()];
        for v in part.data() {
            let full: Vec<usize> = tn
                .output()
                .iter()
                .map(|l| match fixed.iter().find(|f| f.0 == *l) {
                    Some(f) => f.1,
                    None => idx[open.iter().position(|o| o == l).unwrap()],
                })
                .collect();
            let off = full.iter().zip(&out_ext).fold(0, |acc, (i, e)| acc * e + i);
            result.data_mut()[off] += *v;
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < part.extents()[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    result
}

/// All full binary trees over `items` (as SSA pairs appended to `base`).
fn enumerate_trees(tn: &TensorNetwork) -> Vec<ContractionTree> {
    fn rec(items: Vec<usize>, next: usize, pairs: Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if items.len() == 1 {
            out.push(pairs);
            return;
        }
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                let mut rest: Vec<usize> = items.iter().enumerate().filter(|&(k, _)| k != i && k != j).map(|(_, &v)| v).collect();
                rest.push(next);
                let mut p = pairs.clone();
                p.push((items[i], items[j]));
                rec(rest, next + 1, p, out);
            }
        }
    }
    let n = tn.num_tensors();
    let mut all = Vec::new();
    rec((0..n).collect(), n, Vec::new(), &mut all);
    all.into_iter().map(|p| ContractionTree::new(tn, p).unwrap()).collect()
}

fn chain(n: usize, rng: &mut ChaCha8Rng) -> (TensorNetwork, Vec<usize>) {
    let dims: Vec<usize> = (0..=n).map(|_| rng.random_range(2..=12)).collect();
    let mut tn = TensorNetwork::new();
    for i in 0..n {
        tn.add_tensor(vec![Label(i as u32), Label(i as u32 + 1)], vec![dims[i], dims[i + 1]], None).unwrap();
    }
    tn.set_output(vec![Label(0), Label(n as u32)]).unwrap();
    (tn, dims)
}

/// Textbook matrix-chain DP; cost of (i..j) = min cost(i..k)+cost(k+1..j)+d_i d_{k+1} d_{j+1}.
fn matrix_chain_optimum(d: &[usize]) -> f64 {
    let n = d.len() - 1;
    let mut c = vec![vec![0.0f64; n]; n];
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len - 1;
            c[i][j] = (i..j).map(|k| c[i][k] + c[k + 1][j] + (d[i] * d[k + 1] * d[j + 1]) as f64).fold(f64::INFINITY, f64::min);
        }
    }
    c[0][n - 1]
}

fn grid(side: usize, bond: usize) -> TensorNetwork {
    let mut tn = TensorNetwork::new();
    let mut next = 0u32;
    let mut h = vec![vec![Label(0); side]; side];
    let mut v = vec![vec![Label(0); side]; side];
    for r in 0..side {
        for c in 0..side {
            h[r][c] = Label(next);
            v[r][c] = Label(next + 1);
            next += 2;
        }
    }
    for r in 0..side {
        for c in 0..side {
            let mut modes = Vec::new();
            if c + 1 < side {
                modes.push(h[r][c]);
            }
            if c > 0 {
                modes.push(h[r][c - 1]);
            }
            if r + 1 < side {
                modes.push(v[r][c]);
            }
            if r > 0 {
                modes.push(v[r - 1][c]);
            }
            let ext = vec![bond; modes.len()];
            tn.add_tensor(modes, ext, None).unwrap();
        }
    }
    tn.set_output(vec![]).unwrap();
    tn
}

fn left_to_right(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = vec![(0, 1)];
    for i in 2..n {
        pairs.push((n + i - 2, i));
    }
    pairs
}

#[test]
fn greedy_small_cases() {
    let tn = parse_einsum("ij,jk->ik", [("i", 2), ("j", 3), ("k", 4)]).unwrap();
    assert_eq!(greedy_path(&tn, GreedyParams::default(), 0).unwrap().pairs(), &[(0, 1)]);
    let tn = parse_einsum("ij,jk,kl->il", [("i", 2), ("j", 4), ("k", 8), ("l", 16)]).unwrap();
    let t = greedy_path(&tn, GreedyParams::default(), 0).unwrap();
    assert_eq!(t.total_flops(&tn), 320.0);
}

#[test]
fn optimal_matches_tree_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..25 {
        let n = rng.random_range(2..=6);
        let tn = random_network(n, 6, 3, &mut rng);
        let best = enumerate_trees(&tn).iter().map(|t| t.total_flops(&tn)).fold(f64::INFINITY, f64::min);
        let opt = optimal_path(&tn).unwrap();
        assert_eq!(opt.total_flops(&tn), best);
        assert_eq!(path_cost(&tn, &opt).unwrap().total_flops, best);
    }
}

#[test]
fn greedy_is_bounded_by_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut within = 0;
    for seed in 0..100 {
        let tn = random_network(8, 9, 3, &mut rng);
        let opt = optimal_path(&tn).unwrap().total_flops(&tn);
        let g = greedy_path(&tn, GreedyParams::default(), seed).unwrap().total_flops(&tn);
        assert!(g >= opt);
        if g <= 10.0 * opt {
            within += 1;
        }
    }
    assert!(within >= 95, "{within}/100");
}

#[test]
fn simplify_absorbs_scalars_and_full_overlaps() {
    let mut tn = TensorNetwork::new();
    tn.add_tensor(vec![], vec![], Some(vec![C64::new(2.0, 0.0)])).unwrap();
    tn.add_tensor(vec![Label(0), Label(1)], vec![4, 2], None).unwrap();
    tn.add_tensor(vec![Label(1), Label(2)], vec![2, 5], None).unwrap();
    tn.set_output(vec![Label(0), Label(2)]).unwrap();
    let s = simplify(&tn).unwrap();
    assert_eq!(s.network.num_tensors(), 2);

    let tn = parse_einsum("ab,ab->", [("a", 3), ("b", 4)]).unwrap();
    let s = simplify(&tn).unwrap();
    assert_eq!(s.network.num_tensors(), 1);
    assert!(s.network.slot(0).modes.is_empty());
}

#[test]
fn simplify_preserves_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let tn = random_network(30, 20, 3, &mut rng);
        let s = simplify(&tn).unwrap();
        assert!(s.network.num_tensors() <= tn.num_tensors());
        let direct = contract_sliced(&tn, &greedy_path(&tn, GreedyParams::default(), 0).unwrap());
        let reduced = contract_sliced(&s.network, &greedy_path(&s.network, GreedyParams::default(), 0).unwrap());
        let scale = direct.norm().max(1.0);
        assert!(direct.max_abs_diff(&reduced).unwrap() / scale < 1e-10);
        let lifted = ContractionTree::new(&tn, s.lift(greedy_path(&s.network, GreedyParams::default(), 0).unwrap().pairs())).unwrap();
        assert!(direct.max_abs_diff(&contract_sliced(&tn, &lifted)).unwrap() / scale < 1e-10);
    }
}

#[test]
fn partition_separates_components() {
    let tn = parse_einsum("ab,bc,de,ef->acdf", [("a", 2), ("b", 3), ("c", 4), ("d", 5), ("e", 6), ("f", 7)]).unwrap();
    let t = partition_path(&tn, PartitionParams { cutoff: 1, ..Default::default() }, 0).unwrap();
    let first = 2.0 * 3.0 * 4.0 + 5.0 * 6.0 * 7.0;
    let outer = 2.0 * 4.0 * 5.0 * 7.0;
    assert_eq!(t.total_flops(&tn), first + outer);
}

#[test]
fn partition_chain_near_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..5 {
        let (tn, dims) = chain(16, &mut rng);
        let opt = matrix_chain_optimum(&dims);
        let t = partition_path(&tn, PartitionParams::default(), seed).unwrap();
        assert!(t.total_flops(&tn) <= 2.0 * opt, "{} vs {}", t.total_flops(&tn), opt);
    }
}

#[test]
fn partition_beats_sequential_on_grid() {
    let tn = grid(4, 4);
    let naive = ContractionTree::new(&tn, left_to_right(16)).unwrap().total_flops(&tn);
    let t = partition_path(&tn, PartitionParams::default(), 0).unwrap();
    assert!(t.total_flops(&tn) < naive, "{} vs {naive}", t.total_flops(&tn));
}

#[test]
fn find_path_never_worse_than_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..5 {
        let tn = random_network(30, 25, 3, &mut rng);
        let g = greedy_path(&tn, GreedyParams::default(), 0).unwrap().total_flops(&tn);
        let r = find_path(&tn, &OptimizerConfig { seed, ..Default::default() }).unwrap();
        assert!(r.total_flops <= g);
        assert!(r.slices.is_empty());
        assert_eq!(r.slicing_overhead_factor, 1.0);
    }
}

#[test]
fn find_path_reaches_optimum_on_small_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut hits = 0;
    for seed in 0..20 {
        let n = rng.random_range(3..=8);
        let tn = random_network(n, 9, 3, &mut rng);
        let opt = optimal_path(&tn).unwrap().total_flops(&tn);
        let r = find_path(&tn, &OptimizerConfig { num_hyper_samples: 64, seed, ..Default::default() }).unwrap();
        assert!(r.total_flops >= opt);
        if r.total_flops == opt {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn find_path_is_deterministic_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tn = random_network(24, 20, 3, &mut rng);
    let cfg = OptimizerConfig { num_hyper_samples: 8, seed: 11, ..Default::default() };
    let a = find_path(&tn, &cfg).unwrap();
    let b = find_path(&tn, &cfg).unwrap();
    assert_eq!(a, b);
    let mut prev = f64::INFINITY;
    for n in [1, 2, 4, 8, 16] {
        let r = find_path(&tn, &OptimizerConfig { num_hyper_samples: n, ..cfg.clone() }).unwrap();
        assert!(r.total_flops <= prev);
        prev = r.total_flops;
    }
}

#[test]
fn slicing_budget_and_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let tn = random_network(8, 8, 4, &mut rng);
        let tree = greedy_path(&tn, GreedyParams::default(), 0).unwrap();
        let peak = tree.largest_intermediate() * ELEMENT_BYTES;
        let (same, f) = select_slices(&tn, &tree, peak).unwrap();
        assert!(same.sliced().is_empty());
        assert_eq!(f, 1.0);
        let budget = (peak / 8.0).max(ELEMENT_BYTES);
        let (sliced, f) = select_slices(&tn, &tree, budget).unwrap();
        assert!(f >= 1.0);
        assert!(sliced.largest_intermediate() * ELEMENT_BYTES <= budget);
        let want = contract_sliced(&tn, &tree);
        let got = contract_sliced(&tn, &sliced);
        assert!(want.max_abs_diff(&got).unwrap() <= 1e-10 * want.norm().max(1.0));
    }
}

#[test]
fn slicing_output_mode_concatenates() {
    let mut tn = parse_einsum("ij,jk->ik", [("i", 3), ("j", 4), ("k", 2)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (id, len) in [(0, 12), (1, 8)] {
        tn.bind(id, (0..len).map(|_| C64::new(rng.random(), rng.random())).collect()).unwrap();
    }
    let tree = ContractionTree::new(&tn, vec![(0, 1)]).unwrap();
    let by_i = tree.resliced(&tn, vec![Label(0)]).unwrap();
    assert_eq!(by_i.num_slices(&tn), 3.0);
    let want = contract_sliced(&tn, &tree);
    assert!(want.max_abs_diff(&contract_sliced(&tn, &by_i)).unwrap() < 1e-14);
    let by_j = tree.resliced(&tn, vec![Label(1)]).unwrap();
    assert_eq!(by_j.num_slices(&tn), 4.0);
    assert!(by_j.node(2).modes.iter().all(|&l| l != Label(1)));
    assert!(want.max_abs_diff(&contract_sliced(&tn, &by_j)).unwrap() < 1e-14);
}

#[test]
fn infeasible_budget_is_reported() {
    let tn = parse_einsum("ij,jk->ik", [("i", 3), ("j", 4), ("k", 2)]).unwrap();
    let tree = ContractionTree::new(&tn, vec![(0, 1)]).unwrap();
    assert!(matches!(select_slices(&tn, &tree, 8.0), Err(Error::Infeasible { .. })));
    let cfg = OptimizerConfig { memory_budget: Some(1.0), ..Default::default() };
    assert!(matches!(find_path(&tn, &cfg), Err(Error::Infeasible { .. })));
}

#[test]
fn find_path_respects_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for seed in 0..5 {
        let tn = random_network(14, 12, 4, &mut rng);
        let free = find_path(&tn, &OptimizerConfig { seed, ..Default::default() }).unwrap();
        let budget = (free.largest_intermediate * ELEMENT_BYTES / 4.0).max(ELEMENT_BYTES);
        let r = find_path(&tn, &OptimizerConfig { seed, memory_budget: Some(budget), ..Default::default() }).unwrap();
        assert!(r.largest_intermediate * ELEMENT_BYTES <= budget);
        assert!(r.slicing_overhead_factor >= 1.0);
        let json = r.to_path_json(&tn);
        assert_eq!(json["pairs"].as_array().unwrap().len(), tn.num_tensors() - 1);
    }
}

#[test]
fn config_validation() {
    assert!(OptimizerConfig { num_hyper_samples: 0, ..Default::default() }.validate().is_err());
    assert!(OptimizerConfig { leaf_cutoff: (4, 13), ..Default::default() }.validate().is_err());
    assert!(OptimizerConfig::default().validate().is_ok());
}

