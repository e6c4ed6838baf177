use alb_sim::*;
fn main() {
    let cfg = instances::table3();
    let t0 = std::time::Instant::now();
    let solved = solve(&cfg, None).unwrap();
    let r = solved.optimal().unwrap();
    println!("b&b: k_opt={} nodes={} in {:?}", r.k_opt, r.nodes_expanded, t0.elapsed());
    let t0 = std::time::Instant::now();
    let bfs = bfs_optimum(&reset(&cfg), &cfg, None).unwrap();
    println!("bfs: {:?} in {:?}", bfs, t0.elapsed());
    let space = CentralizedActionSpace::enumerate(&cfg, None).unwrap();
    let m = centralized_mask(&reset(&cfg), &space, &cfg);
    println!("reset mask feasible: {}", m.count_feasible());
    for (c, a) in &r.schedule { if !a.is_null() { println!("t={} -> {:?}", c, a.assignments().collect::<Vec<_>>()); } }
}
