//! Detect gradient onsets, subtract the averaged template, and score the
//! result against the gradient-free truth.

use trio::evaluate::{artifact_attenuation, max_harmonics, AttenuationSpec};
use trio::gradient::{detect_gradient_onsets, repetition_length, subtract_gradient_artifact, GaParams};
use trio::synth::{generate_session, SessionConfig};

fn main() -> trio::Result<()> {
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 10;
    let s = generate_session(&cfg, 1)?;
    let rec = &s.contaminated;

    let params = GaParams::default();
    let onsets = detect_gradient_onsets(rec, &params)?;
    let len = repetition_length(&onsets).expect("at least two onsets");
    println!("{} onsets ({} planted), repetition {len} samples", onsets.len(), s.true_markers("GA_ONSET").len());

    let corrected = subtract_gradient_artifact(rec, &onsets, &params)?;
    let f0 = rec.rate_hz() / len as f64;
    let n_fft = 50 * len;
    let spec = AttenuationSpec::Harmonic { f0_hz: f0, n_harmonics: max_harmonics(f0, rec.rate_hz(), n_fft), n_fft };
    let db = artifact_attenuation(rec, &corrected, &spec)?;
    let truth = s.gradient_free();
    for (c, ch) in rec.channels().iter().enumerate() {
        let resid = &corrected.channel(c) - &truth.channel(c);
        let rms = (resid.mapv(|v| v * v).mean().unwrap_or(0.0)).sqrt();
        println!("{:>5}  {:6.1} dB   residual {:6.2} uV rms", ch.name, db[c], rms);
    }
    Ok(())
}
