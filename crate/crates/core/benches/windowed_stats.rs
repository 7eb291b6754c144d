//! Times direct-enumeration against summed-area windowed statistics on one
//! thread. `cargo bench -p neugen-core` (add `-- --size 512 --patch 7` to
//! change the workload).

use std::time::Instant;

use neugen_core::neugen::{patch_stats, windowed_stats_fast, BorderPolicy};
use neugen_core::pipeline::with_workers;
use neugen_core::synth;

fn arg(args: &[String], name: &str, default: usize) -> usize {
    args.iter()
        .position(|a| a == name)
        .and_then(|i| args.get(i + 1))
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn best_of<F: FnMut()>(runs: usize, mut f: F) -> f64 {
    (0..runs)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let size = arg(&args, "--size", 1024);
    let s = arg(&args, "--patch", 15);
    let img = synth::noise(size, size, 3, 1);
    let (naive, fast) = with_workers(1, || {
        let naive = best_of(2, || {
            patch_stats(&img, s, BorderPolicy::Reflect).unwrap();
        });
        let fast = best_of(5, || {
            windowed_stats_fast(&img, s, BorderPolicy::Reflect).unwrap();
        });
        (naive, fast)
    })
    .expect("worker pool");
    println!("{size}x{size}x3, s = {s}, single thread");
    println!("naive        {:>9.3} ms", naive * 1e3);
    println!("summed-area  {:>9.3} ms", fast * 1e3);
    println!("speedup      {:>9.1}x", naive / fast);
}
