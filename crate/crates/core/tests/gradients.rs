//! Autodiff gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regraph_core::graph::{decompose_regional, Edge, EdgeWeighting, SiteGraph, SiteMeta};
use regraph_core::models::{Architecture, GraphContext, Model, ModelSpec};
use regraph_core::numerics::Tensor;
use regraph_core::training::{compute_gradients, mse};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn site(id: &str, region: &str, lat: f64) -> SiteMeta {
    SiteMeta {
        site_id: id.into(),
        region: region.into(),
        latitude: lat,
        longitude: -90.0,
        travel_time: 5.0,
        owner: 0,
        amenity_count: 2,
        capacity: 40,
    }
}

/// 4 nodes in 2 regions with one cross-region edge.
fn toy() -> (SiteGraph, GraphContext, GraphContext) {
    let nodes = vec![
        site("a", "IA", 42.0),
        site("b", "IA", 42.1),
        site("c", "WI", 42.2),
        site("d", "WI", 42.3),
    ];
    let edges = vec![
        Edge { i: 0, j: 1, miles: 7.0 },
        Edge {
            i: 1,
            j: 2,
            miles: 12.0,
        },
        Edge { i: 2, j: 3, miles: 9.0 },
        Edge {
            i: 0,
            j: 2,
            miles: 18.0,
        },
    ];
    let g = SiteGraph::from_edges(nodes, edges, EdgeWeighting::default()).unwrap();
    let p = decompose_regional(&g).unwrap();
    let plain = GraphContext::new(&g, None).unwrap();
    let regional = GraphContext::new(&g, Some(&p)).unwrap();
    (g, plain, regional)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn check(arch: Architecture, hidden: usize) {
    let (_, plain, regional) = toy();
    let ctx = if arch.uses_regions() { &regional } else { &plain };
    let mut spec = ModelSpec::new(arch, 3, vec![1, 2], 21)
        .with_hidden(hidden)
        .with_regions_from(ctx);
    spec.cst_depth = 2;
    let mut model = Model::new(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs: Vec<Tensor> = (0..3)
        .map(|_| Tensor::matrix(4, 8, (0..32).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect();
    let targets = Tensor::matrix(4, 2, (0..8).map(|_| rng.random::<f64>()).collect()).unwrap();
    // random attention scores so the softmax gradient is exercised off its symmetric point
    for p in model.params_mut().iter_mut() {
        if p.name.ends_with("scores") {
            p.value
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
    }
    compute_gradients(&mut model, ctx, &inputs, &targets).unwrap();
    let analytic: Vec<Tensor> = model.params().iter().map(|p| p.grad.clone().unwrap()).collect();
    let loss_at = |m: &Model| mse(&m.predict(ctx, &inputs).unwrap(), &targets).unwrap();
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for (pi, grad) in analytic.iter().enumerate() {
        for idx in 0..grad.len() {
            let orig = model.params().iter().nth(pi).unwrap().value.data()[idx];
            let set = |m: &mut Model, v: f64| m.params_mut().iter_mut().nth(pi).unwrap().value.data_mut()[idx] = v;
            set(&mut model, orig + H);
            let up = loss_at(&model);
            set(&mut model, orig - H);
            let down = loss_at(&model);
            set(&mut model, orig);
            let numeric = (up - down) / (2.0 * H);
            let e = rel_err(grad.data()[idx], numeric);
            if e > worst.0 {
                let name = model.params().iter().nth(pi).unwrap().name.clone();
                worst = (
                    e,
                    format!("{name}[{idx}] analytic {} numeric {numeric}", grad.data()[idx]),
                );
            }
            checked += 1;
        }
    }
    eprintln!("{arch}: {checked} scalars, worst {worst:?}");
    assert!(worst.0 < TOL, "{arch}: {}", worst.1);
}

#[test]
fn all_architectures() {
    for a in Architecture::ALL {
        check(a, 3);
    }
}
