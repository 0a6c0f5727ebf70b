mod common;

use common::rel_diff;
use nirom::dmd::reconstruct;
use nirom::rank::select_rank;
use nirom::rbf::nirom_predict;
use nirom::{swe, Error, NiromInterpolant, RankCriteria, RbfLayout, Scales, SweConfig};

#[test]
fn prediction_matches_nodes_and_dense_reference() {
    let cfg = SweConfig::default();
    let run = swe::simulate(&cfg).unwrap();
    let fine = swe::simulate(&SweConfig { dt: cfg.dt / 2.0, n_snapshots: 2 * cfg.n_snapshots - 1, ..cfg.clone() }).unwrap();
    let scales = Scales::from_initial(&cfg, &run.initial).unwrap();
    let coarse = swe::nondimensionalize(&run, scales).unwrap();
    let fine = swe::nondimensionalize(&fine, scales).unwrap();

    for (v, reference) in [(&coarse.h, &fine.h), (&coarse.u, &fine.u), (&coarse.v, &fine.v)] {
        let sel = select_rank(v, &RankCriteria::for_snapshots(v.cols()), 5).unwrap();
        assert!(sel.converged, "{} did not converge", v.field());
        let interp = NiromInterpolant::fit(&sel.model, RbfLayout::Joint).unwrap();
        let rec = reconstruct(&sel.model, v.cols());
        for t in 0..v.cols() {
            let p = nirom_predict(&sel.model, &interp, t as f64 * v.dt()).unwrap();
            let col: Vec<f64> = (0..p.len()).map(|i| rec.data[(i, t)]).collect();
            assert!(rel_diff(&col, &p) <= 1e-6);
        }
        let at_node = rel_diff(&v.column(5), &nirom_predict(&sel.model, &interp, 5.0 * v.dt()).unwrap());
        let mid = rel_diff(&reference.column(11), &nirom_predict(&sel.model, &interp, 5.5 * v.dt()).unwrap());
        assert!(mid <= 5.0 * at_node, "{}: midpoint {mid:e} vs node {at_node:e}", v.field());

        let (_, end) = interp.window();
        assert!(matches!(nirom_predict(&sel.model, &interp, end * 1.01), Err(Error::OutOfWindow { .. })));
        assert!(matches!(nirom_predict(&sel.model, &interp, -0.1), Err(Error::OutOfWindow { .. })));
    }
}

#[test]
fn per_mode_layout_agrees_at_nodes() {
    let cfg = SweConfig { n_snapshots: 40, ..SweConfig::default() };
    let run = swe::simulate(&cfg).unwrap();
    let sel = select_rank(&run.h, &RankCriteria::for_snapshots(40), 5).unwrap();
    let joint = NiromInterpolant::fit(&sel.model, RbfLayout::Joint).unwrap();
    let per_mode = NiromInterpolant::fit(&sel.model, RbfLayout::PerMode).unwrap();
    for t in [0.0, 7.0 * cfg.dt, 39.0 * cfg.dt] {
        let a = nirom_predict(&sel.model, &joint, t).unwrap();
        let b = nirom_predict(&sel.model, &per_mode, t).unwrap();
        assert!(rel_diff(&a, &b) < 1e-9);
    }
}
