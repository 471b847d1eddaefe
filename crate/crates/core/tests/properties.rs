use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regraph_core::data::FEATURE_COUNT;
use regraph_core::graph::{
    build_connected, decompose_random, decompose_regional, EdgeWeighting, Haversine, RegionalPartition, SiteGraph,
    SiteMeta,
};
use regraph_core::models::{Architecture, GraphContext, Model, ModelSpec};
use regraph_core::numerics::Tensor;

const REGIONS: [&str; 4] = ["IA", "IL", "MN", "WI"];

fn site_table(n: usize, seed: u64) -> Vec<SiteMeta> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| SiteMeta {
            site_id: format!("s{i}"),
            region: REGIONS[rng.random_range(0..REGIONS.len())].to_owned(),
            latitude: rng.random_range(41.0..43.0),
            longitude: rng.random_range(-91.0..-88.0),
            travel_time: rng.random_range(0.0..30.0),
            owner: rng.random_range(0..2),
            amenity_count: rng.random_range(0..8),
            capacity: rng.random_range(10..100),
        })
        .collect()
}

fn assert_partition(p: &RegionalPartition, n: usize) {
    let mut seen = vec![0u32; n];
    for sg in p.subgraphs() {
        for &i in &sg.nodes {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1), "coverage {seen:?}");
}

fn assert_symmetric(t: &Tensor) {
    for i in 0..t.rows() {
        for j in 0..t.cols() {
            assert_eq!(t.get(i, j).to_bits(), t.get(j, i).to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regional_partition_invariants(n in 1usize..40, seed in any::<u64>(), threshold in 5.0f64..80.0) {
        let g = build_connected(&site_table(n, seed), &Haversine, threshold, EdgeWeighting::default()).unwrap();
        let p = decompose_regional(&g).unwrap();
        assert_partition(&p, n);
        for i in 0..n {
            prop_assert!(p.local_degree(i) <= g.degree(i));
            prop_assert_eq!(p.region_of(i), g.nodes()[i].region.as_str());
        }
        for sg in p.subgraphs() {
            for e in sg.graph.edges() {
                let (a, b) = (sg.nodes[e.i], sg.nodes[e.j]);
                prop_assert!(g.has_edge(a, b));
            }
            assert_symmetric(sg.graph.adjacency());
            assert_symmetric(sg.graph.normalized());
        }
        prop_assert!(p.overlap_cost() <= g.overlap_cost());
    }

    #[test]
    fn random_partition_invariants(n in 1usize..40, groups in 1usize..8, seed in any::<u64>()) {
        let groups = groups.min(n);
        let g = build_connected(&site_table(n, seed), &Haversine, 40.0, EdgeWeighting::default()).unwrap();
        let p = decompose_random(&g, groups, seed, &Haversine).unwrap();
        assert_partition(&p, n);
        let sizes: Vec<usize> = p.subgraphs().iter().map(|s| s.nodes.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let union = p.union_graph(&g).unwrap();
        for i in 0..n {
            let size = sizes[p.region_index(i)];
            prop_assert_eq!(p.local_degree(i), size - 1);
            prop_assert!(p.local_degree(i) <= union.degree(i));
        }
    }

    #[test]
    fn relabeling_sites_conjugates_the_adjacency(n in 2usize..30, seed in any::<u64>()) {
        let sites = site_table(n, seed);
        let g = build_connected(&sites, &Haversine, 40.0, EdgeWeighting::default()).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let shuffled: Vec<SiteMeta> = perm.iter().map(|&k| sites[k].clone()).collect();
        let h = build_connected(&shuffled, &Haversine, 40.0, EdgeWeighting::default()).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(h.adjacency().get(a, b).to_bits(), g.adjacency().get(perm[a], perm[b]).to_bits());
            }
        }
    }
}

fn inputs(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    (0..k)
        .map(|_| Tensor::matrix(n, FEATURE_COUNT, (0..n * FEATURE_COUNT).map(|_| rng.random()).collect()).unwrap())
        .collect()
}

fn permute_rows(t: &Tensor, perm: &[usize]) -> Tensor {
    let rows: Vec<Vec<f64>> = perm.iter().map(|&k| t.row(k).to_vec()).collect();
    Tensor::from_rows(&rows).unwrap()
}

fn contexts(arch: Architecture, g: &SiteGraph, seed: u64) -> (GraphContext, Option<RegionalPartition>) {
    let p = match arch {
        Architecture::RegTGCN => Some(decompose_regional(g).unwrap()),
        Architecture::RanTGCN => Some(decompose_random(g, 3, seed, &Haversine).unwrap()),
        _ => None,
    };
    (GraphContext::new(g, p.as_ref()).unwrap(), p)
}

#[test]
fn node_permutation_permutes_predictions() {
    let n = 14;
    let k = 3;
    for (t, arch) in Architecture::ALL.into_iter().enumerate() {
        let seed = 40 + t as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = build_connected(&site_table(n, seed), &Haversine, 60.0, EdgeWeighting::default()).unwrap();
        let (ctx, partition) = contexts(arch, &g, seed);
        let spec = ModelSpec::new(arch, k, vec![1, 2], seed)
            .with_hidden(5)
            .with_regions_from(&ctx);
        let spec = ModelSpec { cst_depth: 2, ..spec };
        let model = Model::new(spec).unwrap();
        let x = inputs(n, k, &mut rng);
        let base = model.predict(&ctx, &x).unwrap();

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let pg = g.permuted(&perm).unwrap();
        let pp = partition.map(|p| p.permuted(&perm).unwrap());
        let pctx = GraphContext::new(&pg, pp.as_ref()).unwrap();
        let px: Vec<Tensor> = x.iter().map(|t| permute_rows(t, &perm)).collect();
        let moved = model.predict(&pctx, &px).unwrap();
        let expected = permute_rows(&base, &perm);
        let worst = moved
            .data()
            .iter()
            .zip(expected.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{arch}: {worst}");
    }
}
