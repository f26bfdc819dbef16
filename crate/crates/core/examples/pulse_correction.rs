//! R-peak detection with suspect flags, then cardiac-locked subtraction on
//! a session without gradient artifact.

use trio::evaluate::{artifact_attenuation, AttenuationSpec};
use trio::pulse::{detect_r_peaks, subtract_pulse_artifact, BcgParams};
use trio::synth::{generate_session, SessionConfig};

fn main() -> trio::Result<()> {
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 12;
    cfg.gradient.enabled = false;
    let s = generate_session(&cfg, 2)?;
    let rec = &s.contaminated;

    let report = detect_r_peaks(rec)?;
    println!(
        "{} peaks ({} planted), median RR {:.3} s, {} suspect flags",
        report.peaks.len(),
        s.true_markers("R_PEAK").len(),
        report.rr_median_s,
        report.suspects.len()
    );
    for row in report.suspect_rows().iter().take(5) {
        println!("  suspect {}", row.join(" "));
    }

    let params = BcgParams::default();
    let corrected = subtract_pulse_artifact(rec, &report.peaks, &params)?;
    let spec = AttenuationSpec::CardiacLocked { peaks: report.peaks.clone(), pre_s: 0.0, post_s: report.rr_median_s };
    let db = artifact_attenuation(rec, &corrected, &spec)?;
    for (c, ch) in rec.channels().iter().enumerate().take(9) {
        println!("{:>5}  locked-average attenuation {:5.1} dB", ch.name, db[c]);
    }
    Ok(())
}
