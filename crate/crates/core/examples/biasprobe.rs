// probe: exact vs entropic at various epsilon factors, n=1024, d=3, p=1
use wassrate::measures::parse_spec;
use wassrate::transport::*;
fn main() {
    let mu = parse_spec("uniform:d=3").unwrap();
    let x = mu.sample(1024, 11).unwrap();
    let y = mu.sample(1024, 12).unwrap();
    let t0 = std::time::Instant::now();
    let (exact, _) = wasserstein_assignment(&x, &y, 1.0, None).unwrap();
    println!("exact = {exact:.6}  ({:?})", t0.elapsed());
    let med = {
        // same heuristic as the estimator
        let mut c = vec![];
        for i in (0..1024).step_by(8) { for j in (0..1024).step_by(8) {
            let d2: f64 = x.point(i).iter().zip(y.point(j)).map(|(a,b)| (a-b)*(a-b)).sum();
            c.push(d2.sqrt());
        }}
        c.sort_by(|a,b| a.partial_cmp(b).unwrap());
        c[c.len()/2]
    };
    println!("median cost = {med:.4}");
    for f in [0.05, 0.02, 0.01, 0.005, 0.002, 0.001] {
        let t = std::time::Instant::now();
        let sol = wasserstein_entropic(&x, &y, 1.0, f * med, 4000).unwrap();
        println!(
            "eps = {:>7.5} ({f}*med): value = {:.6} (bias {:+.2}%), iters = {}, conv = {}, marg = {:.1e}, t = {:?}",
            f * med, sol.value, 100.0 * (sol.value / exact - 1.0), sol.iterations, sol.converged, sol.marginal_error, t.elapsed()
        );
    }
}
