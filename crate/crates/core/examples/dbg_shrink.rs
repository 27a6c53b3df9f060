use mchull_core::*;
fn main() {
    for n in [48usize, 128] {
        let spec = GridSpec::new(2, &[n, n], 1.0, &[0.0, 0.0]).unwrap();
        let c = (n as f64 - 1.0) / 2.0;
        let obstacle = VoxelSet::rasterize(spec.clone(), |p| {
            let (dx, dy) = (p[0] - c, p[1] - c);
            dx * dx + dy * dy <= 36.0
        }).unwrap();
        let stencil = Stencil::build(2, 16).unwrap();
        for hfrac in [0.15f64, 0.25, 0.4, 0.6] {
            let h = hfrac * n as f64;
            let params = FlowParams { h, max_steps: 5000, obstacle: obstacle.clone(),
                initial: VoxelSet::full_interior(spec.clone()), stencil: stencil.clone(), gamma_ref: 4.0 };
            let t0 = std::time::Instant::now();
            let traj = flow::run(&params).unwrap();
            let f = traj.final_set();
            let sym = f.symdiff_measure(&obstacle).unwrap();
            println!("n={n} h={h:.1} steps={} stat={} vol={} symdiff/obs={:.3} [{:?}]",
                traj.steps.len(), traj.stationary, f.count(), sym / obstacle.measure(), t0.elapsed());
        }
    }
}
