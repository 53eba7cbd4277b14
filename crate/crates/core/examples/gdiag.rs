// Scratch: forcing oracle deviation structure.
use chsurf_core::manufactured::ManufacturedSolution;
use chsurf_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let ms = ManufacturedSolution::new(
        Vec3::new(10.0, 0.0, 0.0),
        Vec3::new(10.0, 0.0, 0.0),
        0.1,
        1.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst = (0.0f64, Vec3::zeros(), 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let t = rng.gen_range(0.0..0.1);
        let center = Vec3::new(10.0, 0.0, 0.0) * t;
        let dir = loop {
            let d = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if d.norm() > 0.1 {
                break d.normalize();
            }
        };
        let x = center + dir;
        let g = ms.forcing(x, t);
        let g_fd = ms.forcing_fd_oracle(x, t);
        let rel = (g - g_fd).abs() / g_fd.abs().max(1e-2);
        if rel > worst.0 {
            worst = (rel, x, t, g, g_fd);
        }
    }
    println!("worst rel {:.3e} at x={:?} t={:.4}: g={:.8e} g_fd={:.8e}", worst.0, worst.1, worst.2, worst.3, worst.4);
    // Is the deviation a property of the oracle resolution? Richardson check
    // at the worst point by halving via a manual 2nd-order outer stencil
    // comparison is built into forcing_fd_oracle; instead evaluate g via an
    // independent route: surface_laplacian-based expansion of div(M P grad mu)
    // = M lap_G mu + grad_G M . grad_G mu.
    let (rel, x, t, g, _) = worst;
    let _ = rel;
    let h = 1e-5;
    // grad_G of M(c) and mu via small central differences projected.
    let n = (x - Vec3::new(10.0, 0.0, 0.0) * t).normalize();
    let grad = |f: &dyn Fn(Vec3) -> f64, y: Vec3| -> Vec3 {
        let mut g = Vec3::zeros();
        for d in 0..3 {
            let mut yp = y;
            let mut ym = y;
            yp[d] += h;
            ym[d] -= h;
            g[d] = (f(yp) - f(ym)) / (2.0 * h);
        }
        g
    };
    let cfun = |y: Vec3| ms.c_exact(y, t);
    let mfun = |y: Vec3| {
        let c = cfun(y);
        c * (1.0 - c)
    };
    let gm = grad(&mfun, x);
    let gmu = ms.grad_mu_exact(x, t);
    let gm_t = gm - n * n.dot(&gm);
    let gmu_t = gmu - n * n.dot(&gmu);
    // lap_G mu via the dual machinery exists only for c; use FD of the dual
    // gradient projected: div_G(P grad mu).
    let div_pgmu = {
        let flux = |y: Vec3| -> Vec3 {
            let nn = (y - Vec3::new(10.0, 0.0, 0.0) * t).normalize();
            let g = ms.grad_mu_exact(y, t);
            g - nn * nn.dot(&g)
        };
        let mut acc = 0.0;
        let hh = 2e-4;
        let mut jac = [[0.0f64; 3]; 3];
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += hh;
            xm[j] -= hh;
            let fp = flux(xp);
            let fm = flux(xm);
            for i in 0..3 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * hh);
            }
        }
        for i in 0..3 {
            acc += jac[i][i];
            for j in 0..3 {
                acc -= n[i] * n[j] * jac[i][j];
            }
        }
        acc + n.dot(&Vec3::new(jac[0][0], 0.0, 0.0)) * 0.0
    };
    let g_indep = -(mfun(x) * div_pgmu + gm_t.dot(&gmu_t));
    println!("independent product-rule route: g={g_indep:.8e} (dual g={g:.8e})");
}
