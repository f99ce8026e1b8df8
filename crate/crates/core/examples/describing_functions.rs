//! FORE describing functions against a simulated Fourier projection.

use cglp::describing::{cglp_response, fore_base_linear, fore_hosidf, fore_sidf, fourier_oracle, CgLpController, ResetElement};

fn main() -> cglp::Result<()> {
    let f_r = 324.0;
    println!("gamma  f/f_r  n   analytic              simulated             rel. error");
    for gamma in [0.3, 0.8] {
        let e = ResetElement::Fore { f_r_hz: f_r, gamma };
        for ratio in [0.1, 1.0, 10.0] {
            let f = ratio * f_r;
            let o = fourier_oracle(&e, f, 5)?;
            for n in [1, 3, 5] {
                let a = e.analytic(n, f)?;
                let s = o.get(n).unwrap_or_default();
                println!(
                    "{gamma:5.1} {ratio:6.1} {n:2}   {:>9.5}∠{:>7.2}°   {:>9.5}∠{:>7.2}°   {:.1e}",
                    a.norm(),
                    a.arg().to_degrees(),
                    s.norm(),
                    s.arg().to_degrees(),
                    (s - a).norm() / a.norm()
                );
            }
        }
    }

    println!("\nFORE at f_r: base-linear vs SIDF vs third harmonic");
    for gamma in [0.0, 0.3, 0.6, 1.0] {
        let bl = fore_base_linear(f_r, f_r)?;
        let r1 = fore_sidf(f_r, f_r, gamma)?;
        let r3 = fore_hosidf(3, f_r, f_r, gamma)?;
        println!(
            "gamma {gamma:.1}: phase {:6.2} -> {:6.2} deg, |R3|/|R1| {:.3}",
            bl.arg().to_degrees(),
            r1.arg().to_degrees(),
            r3.norm() / r1.norm()
        );
    }

    let c = CgLpController::reference_design();
    let v = cglp_response(1, 269.0, &c)?;
    println!(
        "\nCgLp at 269 Hz: SIDF gain {:.3} dB, phase lead {:.2} deg",
        20.0 * v.norm().log10(),
        v.arg().to_degrees()
    );
    Ok(())
}
