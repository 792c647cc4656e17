//! Scratch probe: desk-scale training speed and trained-model quality.

use mocap_recon::eval::{
    run_gap_sweep, run_long_gap, run_rate_table, EvalContext, GapSweepSpec, LongGapSpec, Method,
    RateTableSpec,
};
use mocap_recon::model::{train, TrainConfig};
use mocap_recon::pipeline::{load_sequences, make_splits, prepare, Catalog, SplitFilter, SplitSpec};
use mocap_recon::synth;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1);
    let max_w: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(256);

    let dir = std::env::temp_dir().join("mocap_recon_calibrate");
    let paths = synth::write_dataset(&dir, 42, 10.0).unwrap();
    let catalog = Catalog::load(&paths.catalog).unwrap();
    let split = SplitSpec::load(&paths.split).unwrap();
    let all = load_sequences(&catalog, &dir).unwrap();
    let splits = make_splits(&all, &split, &SplitFilter::None).unwrap();
    let prepared = prepare(&splits).unwrap();
    println!(
        "train sequences: {}, windows/seq cap {max_w}, threads {}",
        prepared.train.len(),
        std::env::var("RAYON_NUM_THREADS").unwrap_or_default()
    );

    let mut lstm_cfg = TrainConfig::desk_lstm();
    lstm_cfg.epochs = epochs;
    lstm_cfg.max_windows_per_sequence = max_w;
    lstm_cfg.rng_seed = 11;
    let t0 = Instant::now();
    let (lstm_params, log) = train(&prepared, &lstm_cfg).unwrap();
    println!(
        "LSTM: {} steps in {:?} ({:?}/step), first loss {:.5}, last {:.5}, val {:?}",
        log.step_losses.len(),
        t0.elapsed(),
        t0.elapsed() / log.step_losses.len().max(1) as u32,
        log.step_losses.first().unwrap_or(&0.0),
        log.step_losses.last().unwrap_or(&0.0),
        log.val_rmse_cm,
    );

    let mut win_cfg = TrainConfig::desk_window();
    win_cfg.epochs = epochs;
    win_cfg.max_windows_per_sequence = max_w;
    win_cfg.rng_seed = 12;
    let t0 = Instant::now();
    let (win_params, wlog) = train(&prepared, &win_cfg).unwrap();
    println!(
        "WINDOW: {} steps in {:?} ({:?}/step), first loss {:.5}, last {:.5}, val {:?}",
        wlog.step_losses.len(),
        t0.elapsed(),
        t0.elapsed() / wlog.step_losses.len().max(1) as u32,
        wlog.step_losses.first().unwrap_or(&0.0),
        wlog.step_losses.last().unwrap_or(&0.0),
        wlog.val_rmse_cm,
    );

    let ctx = EvalContext::of(&prepared);
    let methods = [
        Method::Interpolation,
        Method::FillMean,
        Method::Model(&lstm_params),
        Method::Model(&win_params),
    ];
    let seqs: Vec<_> = prepared.test.iter().collect();
    let t0 = Instant::now();
    let report = run_rate_table(
        &ctx,
        &methods,
        &seqs,
        &RateTableSpec {
            rates: vec![0.1, 0.2, 0.3],
            repeats: 3,
            gap_mean: 10.0,
            gap_std: 5.0,
            seed: 7,
        },
    )
    .unwrap();
    println!("rate table in {:?}\n{}", t0.elapsed(), report.to_csv());

    // Gap sweep on each test motion with the LSTM vs interpolation.
    for seq in &prepared.test {
        let sweep = run_gap_sweep(
            &ctx,
            &[Method::Interpolation, Method::Model(&lstm_params)],
            seq,
            &GapSweepSpec {
                gap_lengths: vec![12, 60, 120, 240, 480],
                missing_markers: 5,
                repeats: 3,
                lead_in: 120,
                seed: 3,
            },
        )
        .unwrap();
        println!("{}", sweep.to_csv());
    }

    // Long-gap stability for the LSTM.
    let (lg, curves) = run_long_gap(
        &ctx,
        &[Method::Interpolation, Method::Model(&lstm_params)],
        &prepared.test[0],
        &LongGapSpec {
            marker_counts: vec![3, 30],
            repeats: 5,
            start_s: 1.5,
            present_s: 1.0,
            gap_s: 5.0,
            seed: 4,
        },
    )
    .unwrap();
    println!("{}", lg.to_csv());
    for c in &curves {
        let n = c.mean_err_cm.len();
        let first: f64 = c.mean_err_cm[..120].iter().sum::<f64>() / 120.0;
        let last: f64 = c.mean_err_cm[n - 120..].iter().sum::<f64>() / 120.0;
        println!(
            "curve {} markers={}: first-second mean {:.2} cm, last-second mean {:.2} cm",
            c.method, c.marker_count, first, last
        );
    }
}
