//! Temporary tuning harness; removed before release.

use dvcsched_core::sched::{baseline_sequential, compute_metrics, oracle_optimal, schedule, SchedulerParams};
use dvcsched_core::synth::{gen_instance, Profile};

#[test]
#[ignore]
fn suite_stats() {
    let profile = Profile::default();
    let mut base_fail = 0;
    let mut strict_station = 0;
    let mut strict_u = 0;
    let mut strict_p = 0;
    let mut max_base = 0;
    let mut max_greedy = 0;
    let start = std::time::Instant::now();
    for seed in 1..=100u64 {
        let instance = gen_instance(seed, &profile).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let g = schedule::<f64>(&instance, &SchedulerParams::default())
            .unwrap_or_else(|e| panic!("greedy seed {seed}: {e}"));
        max_greedy = max_greedy.max(g.station_count());
        match baseline_sequential::<f64>(&instance) {
            Ok(b) => {
                max_base = max_base.max(b.station_count());
                if g.station_count() < b.station_count() {
                    strict_station += 1;
                }
                let gm = compute_metrics(&g, &instance).unwrap();
                let bm = compute_metrics(&b, &instance).unwrap();
                if gm.utilization > bm.utilization {
                    strict_u += 1;
                }
                if gm.parallelization > bm.parallelization {
                    strict_p += 1;
                }
            }
            Err(e) => {
                base_fail += 1;
                eprintln!("baseline seed {seed} failed: {e}");
            }
        }
    }
    eprintln!(
        "elapsed={:?} base_fail={base_fail} strict_station={strict_station} strict_u={strict_u} strict_p={strict_p} max_base={max_base} max_greedy={max_greedy}",
        start.elapsed()
    );
}

#[test]
#[ignore]
fn oracle_stats() {
    let profile = Profile::small();
    let start = std::time::Instant::now();
    let mut worse = 0;
    for seed in 1..=20u64 {
        let instance = gen_instance(seed, &profile).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let g = schedule::<f64>(&instance, &SchedulerParams::default()).unwrap();
        let t0 = std::time::Instant::now();
        let o = oracle_optimal::<f64>(&instance).unwrap_or_else(|e| panic!("oracle seed {seed}: {e}"));
        assert!(g.f >= o.f, "seed {seed}: greedy f {} < oracle f {}", g.f, o.f);
        if g.station_count() > o.station_count() {
            worse += 1;
        }
        eprintln!(
            "seed {seed}: tasks={} greedy={} oracle={} oracle_time={:?}",
            instance.tasks.len(),
            g.station_count(),
            o.station_count(),
            t0.elapsed()
        );
    }
    eprintln!("total={:?} greedy_worse_on={worse}/20", start.elapsed());
}
