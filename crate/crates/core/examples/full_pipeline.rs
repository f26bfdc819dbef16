//! Gradient, pulse and CCA stages on a simulated session, with the JSON run
//! report and the ERP contrast against the clean truth.

use trio::evaluate::{average_erp, epoch, erp_channel_correlation, peak_amplitudes};
use trio::pipeline::{run_pipeline, PipelineConfig};
use trio::synth::{generate_session, SessionConfig};
use trio::{ChannelSelector, Recording};

fn erp(rec: &Recording) -> trio::Result<ndarray::Array2<f64>> {
    let eeg = rec.select_channels(&"EEG".parse::<ChannelSelector>()?)?;
    average_erp(&epoch(&eeg, "STIM/*", 1.0, 3.0)?, None)
}

fn main() -> trio::Result<()> {
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 20;
    let s = generate_session(&cfg, 0)?;

    let run = match run_pipeline(&s.contaminated, &PipelineConfig::default()) {
        Ok(run) => run,
        Err(failure) => {
            eprintln!("{}", serde_json::to_string_pretty(&failure.report).unwrap());
            return Err(failure.error);
        }
    };
    for stage in &run.report.stages {
        let worst = stage.attenuation_db.iter().map(|c| c.db).fold(f64::INFINITY, f64::min);
        println!("{:>8}: {} markers, worst channel {:.1} dB", stage.stage, stage.markers, worst);
    }
    println!("rejected components {:?}", run.report.rejected_components);

    let before_cca = &run.intermediates[1].1;
    let peak = |m: &ndarray::Array2<f64>| peak_amplitudes(m).into_iter().fold(0.0, f64::max);
    let (pre, post, truth) = (erp(before_cca)?, erp(&run.output)?, erp(&s.clean_eeg)?);
    let corr = erp_channel_correlation(&post, &truth)?;
    println!(
        "ERP peak {:.1} uV before CCA, {:.1} uV after, {:.1} uV clean; mean r {:.3}",
        peak(&pre),
        peak(&post),
        peak(&truth),
        corr.mean.unwrap_or(f64::NAN)
    );
    Ok(())
}
