use super::*;
use crate::kinematics::PlanarChain;
use crate::metric::pullback_metric_joint;
use crate::nets::{Activation, Layer, Mlp, RbfNet};
use crate::numerics::Rng;
use crate::vae::{JointVae, ModelConfig, TaskVae};

fn flat_rbf(d: usize, floor: Vec<f64>) -> RbfNet {
    let o = floor.len();
    let mut net = RbfNet::new(vec![vec![0.0; d]], 1.0, Matrix::zeros(o, 1), floor).unwrap();
    net.zero_weights();
    net
}

/// Decoder `x = z`, constant orientation and uncertainty.
fn identity_model() -> Model {
    let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]);
    let dec = Mlp::from_layers(vec![Layer { weight: w, bias: vec![0.0, 0.0, 0.0, 0.0, 1.0], activation: Activation::Identity }]).unwrap();
    let enc = Mlp::new(&[5, 4, 4], Activation::Identity, &mut Rng::new(1)).unwrap();
    Model::Task(TaskVae::from_parts(2, 3, enc, dec, flat_rbf(2, vec![10.0, 10.0]), flat_rbf(2, vec![5.0])).unwrap())
}

fn unit_spec(n: usize) -> GridSpec {
    GridSpec::new(vec![0.0, 0.0], vec![(n - 1) as f64; 2], vec![n, n], Connectivity::Full).unwrap()
}

fn centre_codes(n: usize) -> Vec<Vec<f64>> {
    let m = (n - 1) as f64;
    vec![vec![0.3 * m, 0.3 * m], vec![0.7 * m, 0.7 * m]]
}

#[test]
fn identity_decoder_gives_euclidean_weights() {
    let model = identity_model();
    let g = LatentGraph::build(&model, unit_spec(4), &centre_codes(4), &[]).unwrap();
    for e in 0..g.num_edges() {
        let (a, b) = g.grid().edge(e);
        let len = sq_dist(&g.grid().coords(a), &g.grid().coords(b)).sqrt();
        assert!((g.base_weights()[e] - len).abs() < 1e-12);
    }
    assert_eq!(g.weights(), g.base_weights());
    assert!((g.reference_density() - 1.0).abs() < 1e-12);
}

#[test]
fn build_rejects_uncovered_codes_and_wrong_dimension() {
    let model = identity_model();
    assert!(matches!(LatentGraph::build(&model, unit_spec(4), &[vec![0.0, 0.0], vec![3.0, 3.0]], &[]), Err(Error::Build(_))));
    let spec3 = GridSpec::new(vec![0.0; 3], vec![1.0; 3], vec![3; 3], Connectivity::Full).unwrap();
    assert!(LatentGraph::build(&model, spec3, &[vec![0.5; 3]], &[]).is_err());
}

fn obstacle(x: f64, y: f64, zeta: f64) -> Obstacle {
    Obstacle::new(vec![x, y], 0.5, zeta, 0.1).unwrap()
}

#[test]
fn reweight_reset_and_idempotence() {
    let model = identity_model();
    let mut g = LatentGraph::build(&model, unit_spec(12), &centre_codes(12), &[]).unwrap();
    let snapshot = g.weights().to_vec();
    assert_eq!(g.reweight(&[obstacle(500.0, 500.0, 1000.0)]).unwrap(), 0);
    assert_eq!(g.weights(), &snapshot[..]);

    let obs = [obstacle(5.0, 5.0, 1000.0)];
    let n = g.reweight(&obs).unwrap();
    assert!(n > 0);
    let once = g.weights().to_vec();
    g.reweight(&obs).unwrap();
    assert_eq!(g.weights(), &once[..]);
    assert!(once.iter().zip(&snapshot).all(|(c, b)| c >= b));

    g.reweight(&[obstacle(2.0, 8.0, 1000.0)]).unwrap();
    g.reweight(&[]).unwrap();
    assert_eq!(g.weights(), &snapshot[..]);
}

#[test]
fn reweight_count_matches_brute_force_scan() {
    let model = identity_model();
    let mut g = LatentGraph::build(&model, unit_spec(15), &centre_codes(15), &[]).unwrap();
    let obs = [obstacle(4.0, 6.0, 50.0), obstacle(10.5, 3.2, 10.0)];
    let n = g.reweight(&obs).unwrap();
    let mut brute = 0;
    for e in 0..g.num_edges() {
        let (a, b) = g.grid().edge(e);
        let (pa, pb) = (g.grid().coords(a), g.grid().coords(b));
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let near = obs.iter().any(|o| sq_dist(&mid, &o.center).sqrt() < 4.0 * o.effective_radius());
        if near {
            brute += 1;
            let s = ambient_scale(&mid, &obs);
            let want = (s * sq_dist(&pa, &pb)).sqrt();
            assert!((g.weights()[e] - want).abs() < 1e-12 * want);
        } else {
            assert_eq!(g.weights()[e], g.base_weights()[e]);
        }
    }
    assert_eq!(n, brute);
}

#[test]
fn path_cost_is_monotone_in_strength() {
    let model = identity_model();
    let mut g = LatentGraph::build(&model, unit_spec(20), &centre_codes(20), &[]).unwrap();
    let (s, t) = ([1.0, 9.5], [18.0, 9.5]);
    let mut last = g.shortest_path(&s, &t).unwrap().cost;
    for zeta in [0.5, 5.0, 50.0, 1000.0] {
        g.reweight(&[obstacle(9.5, 9.5, zeta)]).unwrap();
        let c = g.shortest_path(&s, &t).unwrap().cost;
        assert!(c >= last);
        last = c;
    }
    assert!(last > 17.0);
}

#[test]
fn blocked_plan_keeps_clear_of_the_obstacle() {
    let model = identity_model();
    let mut g = LatentGraph::build(&model, unit_spec(30), &centre_codes(30), &[]).unwrap();
    let (s, t) = ([2.0, 14.0], [27.0, 14.0]);
    let free = plan(&model, &mut g, &s, &t, &[], &PlanOptions::default()).unwrap();
    let obs = [Obstacle::new(vec![14.5, 14.0], 2.0, 1000.0, 0.0).unwrap()];
    let blocked = plan(&model, &mut g, &s, &t, &obs, &PlanOptions::default()).unwrap();
    assert!(blocked.diagnostics.graph_cost > free.diagnostics.graph_cost);
    assert!(blocked.diagnostics.min_clearance.unwrap() > 0.0);
    assert!(free.diagnostics.min_clearance.is_none());
    assert_eq!(blocked.trajectory.latent[0], s.to_vec());
    assert_eq!(*blocked.trajectory.latent.last().unwrap(), t.to_vec());
}

#[test]
fn start_equal_goal_is_a_stationary_plan() {
    let model = identity_model();
    let mut g = LatentGraph::build(&model, unit_spec(6), &centre_codes(6), &[]).unwrap();
    let p = plan(&model, &mut g, &[2.0, 3.0], &[2.0, 3.0], &[], &PlanOptions { samples: 7, ..PlanOptions::default() }).unwrap();
    assert_eq!(p.diagnostics.graph_cost, 0.0);
    assert_eq!(p.diagnostics.energy, 0.0);
    assert!(!p.diagnostics.high_energy);
    assert!(p.trajectory.rows.iter().all(|r| r == &p.trajectory.rows[0]));
}

#[test]
fn replanning_never_decodes() {
    let model = identity_model();
    let mut g = LatentGraph::build(&model, unit_spec(25), &centre_codes(25), &[]).unwrap();
    let before = model.decode_calls();
    for k in 0..5 {
        let obs = [obstacle(5.0 + 3.0 * k as f64, 12.0, 1000.0)];
        g.replan(&obs, &[1.0, 12.0], &[23.0, 12.0], None).unwrap();
    }
    assert_eq!(model.decode_calls(), before);
}

#[test]
fn cache_round_trip_is_exact() {
    let model = identity_model();
    let mut g = LatentGraph::build(&model, unit_spec(9), &centre_codes(9), &[obstacle(4.0, 4.0, 10.0)]).unwrap();
    g.tag = "abc".into();
    let mut buf = Vec::new();
    write_graph(&g, &mut buf).unwrap();
    let mut back = read_graph(&buf[..]).unwrap();
    assert_eq!(back.base_weights(), g.base_weights());
    assert_eq!(back.node_values, g.node_values);
    assert_eq!(back.support, g.support);
    assert_eq!(back.tag, "abc");
    assert_eq!(back.reference_density().to_bits(), g.reference_density().to_bits());
    let obs = [obstacle(4.0, 4.0, 10.0)];
    back.reweight(&obs).unwrap();
    assert_eq!(back.weights(), g.weights());
    let mut again = Vec::new();
    write_graph(&back, &mut again).unwrap();
    assert_eq!(again, buf);
    assert!(read_graph(&buf[..buf.len() - 3]).is_err());
    assert!(read_graph(&b"geoskill-graph 9\n"[..]).is_err());
}

#[test]
fn joint_edge_weights_approach_pullback_lengths() {
    let chain = PlanarChain::new(vec![1.0, 0.8]).unwrap();
    let cfg = ModelConfig { hidden: vec![8, 8], ..ModelConfig::default() };
    let mut rng = Rng::new(3);
    let mut jv = JointVae::new(chain, &cfg, &mut rng).unwrap();
    let centers: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.normal(), rng.normal()]).collect();
    let raw: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
    *jv.precision_mut() = RbfNet::new(centers, 0.9, Matrix::from_vec(2, 5, raw), vec![2.0, 2.0]).unwrap();
    let model = Model::Joint(jv);
    let spec = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![201, 201], Connectivity::Full).unwrap();
    let g = LatentGraph::build(&model, spec, &[vec![-0.5, -0.5], vec![0.5, 0.5]], &[]).unwrap();
    let Model::Joint(jv) = &model else { unreachable!() };
    let mut worst: f64 = 0.0;
    for e in (0..g.num_edges()).step_by(997) {
        let (a, b) = g.grid().edge(e);
        let (za, zb) = (g.grid().coords(a), g.grid().coords(b));
        let mid: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| 0.5 * (x + y)).collect();
        let dz: Vec<f64> = zb.iter().zip(&za).map(|(x, y)| x - y).collect();
        let q = pullback_metric_joint(jv, &mid, &[]).unwrap().quad_form(&dz).sqrt();
        worst = worst.max((g.base_weights()[e] - q).abs() / q);
    }
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn joint_cached_points_match_forward_kinematics() {
    let chain = PlanarChain::new(vec![1.0, 0.5, 0.3]).unwrap();
    let cfg = ModelConfig { hidden: vec![6], ..ModelConfig::default() };
    let model = Model::Joint(JointVae::new(chain.clone(), &cfg, &mut Rng::new(8)).unwrap());
    let g = LatentGraph::build(&model, unit_spec(5), &centre_codes(5), &[]).unwrap();
    let Model::Joint(jv) = &model else { unreachable!() };
    for node in [0, 7, 24] {
        let d = jv.decode(&g.grid().coords(node)).unwrap();
        for (m, p) in d.body.points.iter().enumerate() {
            assert_eq!(g.node_point(node, m), &p[..]);
        }
    }
}
