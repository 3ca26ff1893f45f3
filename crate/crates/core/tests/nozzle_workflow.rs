use uqforge_core::chaos::{fit_regression, BasisSet};
use uqforge_core::doe::{scale, sobol_sequence};
use uqforge_core::models::{nozzle_q1d, nozzle_space};
use uqforge_core::sensitivity::{saltelli_sobol, sobol_compare};

const STATIONS: usize = 12;

#[test]
fn exit_state_surrogates_from_sobol_design() {
    let space = nozzle_space();
    let unit = sobol_sequence(7, 100, 0).unwrap();
    let physical = scale(&unit, &space).unwrap();
    let standard = unit.unit_to_standard(&space).unwrap();
    let runs: Vec<Vec<f64>> = physical.points.row_iter().map(|x| nozzle_q1d(x, STATIONS).unwrap()).collect();

    // ideal-gas closure holds on every evaluated profile
    for (x, out) in physical.points.row_iter().zip(&runs) {
        for s in 0..STATIONS {
            let (p, t, rho) = (out[s], out[STATIONS + s], out[3 * STATIONS + s]);
            assert!((rho * x[3] * t - p).abs() <= 1e-12 * p);
        }
    }

    let basis = BasisSet::total_degree(&space, 2).unwrap();
    let exit = STATIONS - 1;
    for field in 0..4 {
        let y: Vec<f64> = runs.iter().map(|r| r[field * STATIONS + exit]).collect();
        let pce = fit_regression(&space, &basis, &standard, &y, None).unwrap();
        let loo = pce.diagnostics().unwrap().loo_error;
        assert!(loo < 1e-4, "field {field}: loo {loo}");
        let s = pce.sobol();
        for inert in 4..7 {
            assert!(s.total[inert] < 1e-6, "field {field} input {inert}: {}", s.total[inert]);
        }
        let mc = saltelli_sobol(|x| Ok(nozzle_q1d(x, STATIONS)?[field * STATIONS + exit]), &space, 2048, 0).unwrap();
        let cmp = sobol_compare(&pce, &mc, 0.05).unwrap();
        assert!(!cmp.any_flagged(), "field {field}:\n{cmp}");
    }
}
