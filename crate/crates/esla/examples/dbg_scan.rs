use esla::esn::{esn_logpdf, esn_moments, EsnParams};
use esla::math::adaptive_simpson;

fn main() {
    let p = EsnParams::new(55.75385869398393, 5.63853043412985, -6.66144649053042048, -9.89975833943288031).unwrap();
    let m = esn_moments(&p);
    println!("closed: mean={:.12e} var={:.12}", m.mean, m.variance);
    // manual panelized quadrature with varying panel width and tol
    for (pw, tol) in [(1.5, 1e-12), (0.75, 1e-12), (1.5, 1e-14), (0.25, 1e-14)] {
        let (lo, hi) = (m.mean - 12.0, 55.75385869398393 + 12.0 * 5.63853043412985);
        let lo = lo.min(55.75385869398393 - 12.0 * 5.63853043412985);
        let panels = ((hi - lo) / pw).ceil() as usize;
        let w = (hi - lo) / panels as f64;
        let mass: f64 = (0..panels)
            .map(|k| {
                let a = lo + k as f64 * w;
                adaptive_simpson(&|t| esn_logpdf(&p, t).exp(), a, a + w, tol / panels as f64)
            })
            .sum();
        let m2: f64 = (0..panels)
            .map(|k| {
                let a = lo + k as f64 * w;
                adaptive_simpson(
                    &|t| (t - m.mean).powi(2) * esn_logpdf(&p, t).exp(),
                    a,
                    a + w,
                    tol / panels as f64,
                )
            })
            .sum::<f64>()
            / mass;
        println!("pw={pw} tol={tol:.0e}: mass-1={:+.3e} m2-var={:+.3e}", mass - 1.0, m2 - m.variance);
    }
}
