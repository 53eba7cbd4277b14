// Scratch: velocity magnitudes at surface quadrature points near the merge.
use chsurf_core::cutgeom::{extract_surface, select_band, surface_quadrature};
use chsurf_core::levelset::DiscreteLevelSet;
use chsurf_core::scenarios::preset;

fn main() {
    let cfg = preset("collide_steady", Some(4)).unwrap();
    let field = cfg.field().unwrap();
    let lattice = cfg.lattice().unwrap();
    for t in [0.239, 0.240, 0.241, 0.242] {
        let dls = DiscreteLevelSet::new(&field, &lattice, t);
        let band = select_band(&lattice, &dls, 1e-3).unwrap();
        let mut surf = extract_surface(&band, &dls);
        surface_quadrature(&mut surf, 4, &dls).unwrap();
        let mut mags: Vec<f64> = surf
            .quad_points
            .iter()
            .map(|x| field.material_velocity(*x, t).map(|u| u.norm()).unwrap_or(f64::INFINITY))
            .collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = mags.len();
        println!(
            "t={t}: |u| median={:.3} p99={:.3} max={:.3e}",
            mags[n / 2],
            mags[99 * n / 100],
            mags[n - 1]
        );
    }
}
