use nalgebra::DMatrix;
use proptest::prelude::*;

use csmac_core::griddata::{
    gen_series, wind_power, Ar1Model, DataField, GeneratorConfig, HarmonicModel, WindTurbineCurve,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip(rows in 1usize..6, cols in 1usize..9, seed in any::<u64>(), scale in 1e-6..1e6f64) {
        let values = DMatrix::from_fn(rows, cols, |i, j| scale * ((seed ^ (i * 31 + j) as u64) % 1000) as f64 - scale * 500.0);
        let f = DataField::new(values, 5.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = DataField::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(g.values, f.values);
        prop_assert_eq!(g.ri_minutes, f.ri_minutes);
    }

    #[test]
    fn turbine_curve_is_continuous_and_bounded(v_ci in 1.0..4.0f64, dr in 5.0..10.0f64, dco in 5.0..15.0f64, p_r in 1.0..3000.0f64, v in 0.0..40.0f64) {
        let c = WindTurbineCurve::new(v_ci, v_ci + dr, v_ci + dr + dco, p_r).unwrap();
        let p = wind_power(v, &c);
        prop_assert!((0.0..=p_r * (1.0 + 1e-12)).contains(&p));
        prop_assert!(wind_power(c.v_ci, &c).abs() <= 1e-9 * p_r);
        prop_assert!((wind_power(c.v_r, &c) - p_r).abs() <= 1e-9 * p_r);
    }

    #[test]
    fn series_is_reproducible(seed in any::<u64>(), len in 1usize..400) {
        let h = HarmonicModel::constant(2.0);
        let a = Ar1Model::constant(0.5);
        let x = gen_series(&h, &a, len, seed).unwrap();
        prop_assert_eq!(x.len(), len);
        prop_assert!(x.iter().all(|v| v.is_finite()));
        prop_assert_eq!(x, gen_series(&h, &a, len, seed).unwrap());
    }
}

#[test]
fn generated_fields_are_seeded_and_finite() {
    let g = GeneratorConfig::default();
    let a = g.generate(32, 64, 11).unwrap();
    assert_eq!((a.n_s(), a.n_t()), (32, 64));
    assert!(a.values.iter().all(|v| v.is_finite()));
    assert_eq!(a.values, g.generate(32, 64, 11).unwrap().values);
    assert_ne!(a.values, g.generate(32, 64, 12).unwrap().values);
}

#[test]
fn generated_field_survives_csv() {
    let f = GeneratorConfig::default().generate(16, 32, 3).unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    assert_eq!(
        DataField::read_csv(buf.as_slice()).unwrap().values,
        f.values
    );
}
