use mglarma_core::sim::*;
use mglarma_core::newton::NewtonConfig;
use ndarray::array;
use std::time::Instant;

fn main() {
    let scenario = SimScenario {
        t_len: 50,
        n_reps_per_condition: 100,
        n_conditions: 3,
        gamma_star: array![0.5],
        sign_policy: SignPolicy::AllPositive,
        n_sim_reps: 4,
        seed: 424,
        ..SimScenario::default()
    };
    let mut cfg = ExperimentConfig::new(
        scenario,
        vec![Method::Pipeline { q: 0 }, Method::Pipeline { q: 1 }, Method::OracleGamma, Method::ClassicalLasso],
    );
    cfg.n_subsamples = 1000;
    let t0 = Instant::now();
    let res = run_experiment(&cfg).unwrap();
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    for tag in ["q0", "q1", "oracle", "classical"] {
        let vals = res.max_diffs(tag);
        let (m, se) = mean_se(&vals).unwrap();
        let g1 = res.gamma_at_iteration(tag, 1, 0);
        println!("{tag:10} maxdiff mean={m:.3} se={se:.3} vals={vals:?} gamma1={g1:?}");
    }
    for o in res.outcomes.iter().filter(|o| o.method == "q1") {
        let m = o.metrics.as_ref().unwrap();
        let tm: Vec<String> = m.per_threshold.iter().map(|t| format!("{:.2}:{:.2}/{:.2}", t.threshold, t.tpr.unwrap(), t.fpr)).collect();
        println!("q1 rep {} wall={:.1}s thr:tpr/fpr {}", o.rep, o.wall_secs, tm.join(" "));
    }
    let _ = NewtonConfig::default();
}
