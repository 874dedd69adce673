use unshuffle_core::instance::FloatInstance;
use unshuffle_core::solver::{run_pipeline, Certificate, SolverConfig};

fn main() {
    let mut total = 0;
    let mut pass = 0;
    let t_all = std::time::Instant::now();
    for n in 2..=8usize {
        for m in [2 * n, 100, 1000] {
            let mut cell = 0;
            let t0 = std::time::Instant::now();
            for trial in 0..10u64 {
                let seed = 60_000 + 101 * trial + (n as u64) * 13 + (m as u64);
                let inst = FloatInstance::generate(m, n, seed, 0.0).unwrap();
                let report = run_pipeline(&inst, &SolverConfig::default()).unwrap();
                let ok = report.certificate == Certificate::UniqueRoot
                    && report.relative_error.map_or(false, |e| e <= 1e-8);
                // soundness: never certify with wrong answer
                if report.certificate == Certificate::UniqueRoot {
                    assert!(report.relative_error.unwrap() <= 1e-6,
                        "WRONG CERTIFIED ANSWER n={n} m={m} seed={seed}");
                }
                total += 1;
                if ok { pass += 1; cell += 1; }
            }
            println!("n={n} m={m}: {cell}/10 in {:?}", t0.elapsed());
        }
    }
    println!("TOTAL {pass}/{total} in {:?}", t_all.elapsed());
}
