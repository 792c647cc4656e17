//! Scratch probe: baseline error magnitudes on the synthetic dataset.

use mocap_recon::eval::{run_rate_table, EvalContext, Method, RateTableSpec};
use mocap_recon::pipeline::{load_sequences, make_splits, prepare, Catalog, SplitFilter, SplitSpec};
use mocap_recon::synth;

fn main() {
    let dir = std::env::temp_dir().join("mocap_recon_calibrate");
    let paths = synth::write_dataset(&dir, 42, 10.0).unwrap();
    let catalog = Catalog::load(&paths.catalog).unwrap();
    let split = SplitSpec::load(&paths.split).unwrap();
    let all = load_sequences(&catalog, &dir).unwrap();
    let splits = make_splits(&all, &split, &SplitFilter::None).unwrap();
    let prepared = prepare(&splits).unwrap();
    println!(
        "max_abs = {:.3} file units ({:.3} cm)",
        prepared.normalizer.max_abs,
        prepared.normalizer.max_abs * prepared.unit_scale_to_cm
    );
    let ctx = EvalContext::of(&prepared);
    let methods = [Method::Interpolation, Method::FillMean];
    let seqs: Vec<_> = prepared.test.iter().collect();
    let spec = RateTableSpec {
        rates: vec![0.1, 0.2, 0.3],
        repeats: 3,
        gap_mean: 10.0,
        gap_std: 5.0,
        seed: 7,
    };
    let t0 = std::time::Instant::now();
    let report = run_rate_table(&ctx, &methods, &seqs, &spec).unwrap();
    println!("rate table in {:?}", t0.elapsed());
    println!("{}", report.to_csv());
}
