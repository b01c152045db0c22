use rangelens::verify::{self, Selection, VerificationConfig};

fn small() -> VerificationConfig {
    let mut c = VerificationConfig {
        n: 16,
        m: 500,
        trials: 24,
        seed: 11,
        ..Default::default()
    };
    c.order.triples = 48;
    c.hamming.points = 200;
    c.hamming.m_grid = vec![50, 200, 800];
    c.covering.runs = 6;
    c.covering.cloud_size = 80;
    c.covering.m = 300;
    c.covering.width_trials = 20;
    c.norm.trials = 12;
    c.concentration.rows = 2000;
    c.concentration.trials = 50;
    c.concentration.cloud_size = 60;
    c
}

fn run_json(threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| serde_json::to_string(&verify::run(&small(), Selection::All).unwrap()).unwrap())
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let one = run_json(1);
    assert_eq!(one, run_json(2));
    assert_eq!(one, run_json(8));
}

#[test]
fn seed_changes_results() {
    let a = serde_json::to_string(&verify::check_cosine_map(&small()).unwrap()).unwrap();
    let mut c = small();
    c.seed += 1;
    let b = serde_json::to_string(&verify::check_cosine_map(&c).unwrap()).unwrap();
    assert_ne!(a, b);
}

#[test]
fn all_selection_covers_every_check() {
    let reports = verify::run(&small(), Selection::All).unwrap();
    assert_eq!(reports.len(), 9);
    for r in &reports {
        let gating = r.components.iter().filter(|c| c.gating).all(|c| c.pass);
        assert_eq!(r.pass, gating);
    }
}
