//! Hann-windowed magnitude spectra before and after gradient correction,
//! written as CSV.
//!
//! cargo run --example spectra -- spectra.csv

use trio::evaluate::{harmonic_power, magnitude_spectrum, write_spectra_csv};
use trio::pipeline::gradient_stage;
use trio::synth::{generate_session, SessionConfig};

fn main() -> trio::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "spectra.csv".into());
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 6;
    let s = generate_session(&cfg, 3)?;
    let (corrected, _) = gradient_stage(&s.contaminated, &Default::default(), None)?;

    let c = s.contaminated.channel_index("C3").expect("montage");
    let rate = s.contaminated.rate_hz();
    let n_fft = 5050;
    let before = magnitude_spectrum(&s.contaminated.channel(c).to_vec(), rate, n_fft)?;
    let after = magnitude_spectrum(&corrected.channel(c).to_vec(), rate, n_fft)?;
    let f0 = rate / cfg.gradient.period_samples as f64;
    println!("C3 power at {f0:.2} Hz harmonics: before {:.3e}, after {:.3e}",
        harmonic_power(&before, f0, 20)?, harmonic_power(&after, f0, 20)?);

    write_spectra_csv(&out, &[("C3_raw".to_string(), before), ("C3_corrected".to_string(), after)])?;
    println!("wrote {out}");
    Ok(())
}
