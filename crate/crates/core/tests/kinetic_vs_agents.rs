use std::sync::Arc;

use kinex_core::distance;
use kinex_core::kinetics::{advance_with, default_seed, preset_grid, solve_steady, EvolutionState, Integrator};
use kinex_core::montecarlo::{run_ensemble, EnsembleConfig};
use kinex_core::{GridPdf, ModelParams};

fn steady(model: &ModelParams) -> GridPdf {
    let grid = Arc::new(preset_grid(model).unwrap());
    let seed = default_seed(model, grid).unwrap();
    let (f, report) = solve_steady(model, &seed, 100, 1e-5).unwrap();
    assert!(report.converged);
    f
}

fn agents(model: ModelParams, grid: Arc<kinex_core::WealthGrid>) -> GridPdf {
    let config = EnsembleConfig::new(2000, model, 4_000_000, 4, 11).unwrap();
    run_ensemble(&config).unwrap().histogram.to_grid_pdf(grid, 1.0).unwrap()
}

#[test]
fn agents_settle_on_the_kinetic_steady_state() {
    for model in [
        ModelParams::saving(0.5, 1.0).unwrap(),
        ModelParams::angle(0.3, 1.0).unwrap(),
    ] {
        let kinetic = steady(&model);
        let sampled = agents(model, kinetic.shared_grid());
        let l1 = distance(&kinetic, &sampled).unwrap().l1;
        assert!(l1 < 0.03, "{}: L1 = {l1}", model.kind().name());
    }
}

#[test]
fn evolution_approaches_equilibrium_monotonically() {
    let model = ModelParams::pure(1.0).unwrap();
    let f_eq = steady(&model);
    // agents all start at the mean: a narrow bump
    let bump = GridPdf::from_fn(f_eq.shared_grid(), 1.0, |u| (-((u - 1.0) / 0.2).powi(2)).exp()).unwrap();
    let mut state = EvolutionState::new(bump, model, 100).unwrap();
    let mut last = distance(state.pdf(), &f_eq).unwrap().l1;
    for _ in 0..40 {
        state = advance_with(&state, 10.0, Integrator::IntegratingFactor).unwrap();
        let d = distance(state.pdf(), &f_eq).unwrap().l1;
        assert!(d < last, "distance rose from {last} to {d}");
        last = d;
        assert!((state.pdf().mass() - 1.0).abs() < 1e-9);
        assert!((state.pdf().mean() - 1.0).abs() < 1e-6);
    }
    assert!(last < 0.05, "{last}");
}
