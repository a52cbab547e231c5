use dflux_core::generators::{lacunary_field, LacunarySpec};
use dflux_core::grid::GridSpec;
use dflux_core::spectral::to_spectral;

fn main() {
    let g = GridSpec::<f64>::new([128, 128, 128]).unwrap();
    for seed in [41u64, 42] {
        let spec = LacunarySpec::new(0.5, 0.25, (1, 5), seed)
            .unwrap()
            .flux_chain(true);
        let gen = lacunary_field(g, &spec).unwrap();
        println!("seed {seed}:");
        for k in [[12i64, 0, 0], [8, 8, 0], [20, 8, 0]] {
            let mut c = [num_complex::Complex64::default(); 3];
            for i in 0..3 {
                let s = to_spectral(gen.field.comp(i)).unwrap();
                c[i] = s.coeff_at(k);
            }
            println!(
                "  k={k:?}: u1 {:+.3e}{:+.3e}i  u2 {:+.3e}{:+.3e}i  u3 {:+.3e}{:+.3e}i",
                c[0].re, c[0].im, c[1].re, c[1].im, c[2].re, c[2].im
            );
        }
    }
}
