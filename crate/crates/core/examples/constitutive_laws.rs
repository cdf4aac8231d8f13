//! Saturation, mobility and equivalent pore pressure for both test media.

use unsat_poro::constitutive::VanGenuchten;

fn main() -> unsat_poro::Result<()> {
    for (name, vg) in [
        ("test I (Lipschitz)", VanGenuchten::test_case_one()),
        ("test II (Hoelder mobility)", VanGenuchten::test_case_two()),
    ] {
        println!(
            "{name}: a_vG = {}, n_vG = {}, L_s = {:.4}",
            vg.a_vg,
            vg.n_vg,
            vg.saturation_lipschitz()
        );
        println!(
            "{:>8} {:>10} {:>10} {:>12} {:>12}",
            "p", "s_w", "s_w'", "k_w", "p_E"
        );
        for p in [-20.0, -10.0, -5.0, -2.0, -1.0, -0.1, 0.0, 0.5] {
            let s = vg.saturation(p)?;
            println!(
                "{p:8.2} {s:10.5} {:10.5} {:12.5e} {:12.5}",
                vg.saturation_derivative(p)?,
                vg.mobility(s)?,
                vg.equivalent_pore_pressure(p)?
            );
        }
        let d = vg.mobility_derivative_wrt_p(-0.01)?;
        println!(
            "dk_w/dp at p = -0.01: {:.3e} (capped: {})\n",
            d.value, d.unbounded
        );
    }
    Ok(())
}
