use ndarray::Array2;
use trio::evaluate::{drift_report, roi_snr};

fn main() -> trio::Result<()> {
    let r = drift_report(9900, 0.0101, 99.16)?;
    println!(
        "{} frames of {:.1} ms vs {:.2} s of triggers: {:.2} ms/s (flag above {:.1}: {})",
        r.mri_frames,
        r.frame_period_s * 1e3,
        r.eeg_trigger_span_s,
        r.drift_ms_per_s,
        r.threshold_ms_per_s,
        r.exceeds_threshold
    );

    // bright disc on an alternating-sign background
    let n = 48;
    let image = Array2::from_shape_fn((n, n), |(i, j)| {
        let (y, x) = (i as f64 - 24.0, j as f64 - 24.0);
        if x * x + y * y < 100.0 {
            12.0
        } else if (i + j) % 2 == 0 {
            1.5
        } else {
            -1.5
        }
    });
    let roi = image.mapv(|v| v > 10.0);
    let noise = Array2::from_shape_fn((n, n), |(i, _)| i < 8);
    println!("ROI SNR {:.3}", roi_snr(&image, &roi, &noise)?);
    Ok(())
}
