// Temporary magnitude probes, not part of the suite.

use expsum::complete_sums::scan_complete_sums;
use expsum::correlation::scan_conjecture;
use expsum::ffq::PrimeModulus;

#[test]
#[ignore]
fn probe_scan_magnitudes() {
    for q in [101u64, 211, 499] {
        let p = PrimeModulus::new(q).unwrap();
        let r = scan_complete_sums(p, 2, &[0, 1, 50]).unwrap();
        println!(
            "complete q={q}: max_ratio={:.6} argmax b={:?} h={} scanned={}",
            r.max_ratio, r.argmax.b, r.argmax.h, r.count_scanned
        );
    }
    for q in [101u64, 199] {
        let p = PrimeModulus::new(q).unwrap();
        let r = scan_conjecture(p, 2, u64::MAX).unwrap();
        println!(
            "conj q={q}: full={:.4} at b={:?} mu=({},{}) | offdiag={:.4} at b={:?} mu=({},{}) | quads={} scanned={}",
            r.max_ratio,
            r.argmax.b,
            r.argmax.mu1,
            r.argmax.mu2,
            r.max_ratio_offdiag,
            r.argmax_offdiag.b,
            r.argmax_offdiag.mu1,
            r.argmax_offdiag.mu2,
            r.quadruples,
            r.scanned
        );
        println!("  hist={:?}", r.histogram);
    }
}
