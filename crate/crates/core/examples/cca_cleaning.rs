//! Canonical correlation of EEG against EMG and EOG leads; components above
//! the threshold are projected out.

use trio::cca::{clean, compute_cca, CcaParams};
use trio::synth::{generate_session, SessionConfig};
use trio::ChannelSelector;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() -> trio::Result<()> {
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 20;
    cfg.gradient.enabled = false;
    cfg.cardiac.enabled = false;
    let s = generate_session(&cfg, 0)?;

    let eeg = s.contaminated.select_channels(&"EEG".parse::<ChannelSelector>()?)?;
    let refs = s.contaminated.select_channels(&"EMG+EOG".parse::<ChannelSelector>()?)?;
    let params = CcaParams::default();
    let pass = clean(&eeg, &refs, &params, None)?;
    for c in pass.report() {
        println!("component {}  rho {:.3}{}", c.index, c.rho, if c.rejected { "  rejected" } else { "" });
    }

    println!("{:>5} {:>8} {:>8}", "", "before", "after");
    for (c, ch) in eeg.channels().iter().enumerate() {
        let truth = s.clean_eeg.channel(c).to_vec();
        println!(
            "{:>5} {:8.3} {:8.3}",
            ch.name,
            pearson(&eeg.channel(c).to_vec(), &truth),
            pearson(&pass.cleaned.channel(c).to_vec(), &truth)
        );
    }
    let again = compute_cca(&pass.cleaned, &refs, &params)?;
    println!("largest rho after cleaning {:.3}", again.correlations[0]);
    Ok(())
}
