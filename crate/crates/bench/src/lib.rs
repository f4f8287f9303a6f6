//! Working points shared by the benchmarks.

use entroprod::dicke::DickeBareParams;
use entroprod::{preset, Preset, SystemParams};

/// Optomechanical preset at g_ab = r·κ_a.
pub fn optomech(r: f64) -> SystemParams {
    let p = preset(Preset::Optomechanics);
    p.with_g_ab(r * p.kappa_a)
}

/// Bare Dicke parameters of the BEC preset at pump strength x.
pub fn bec(x: f64) -> DickeBareParams {
    DickeBareParams::table(x)
}
