#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sgsde_core::model::{Monotonicity, OutputFunctionSpec, OutputKind, SystemSpec};

pub fn a51() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 1.0, -2.0, 0.0, 0.0, 1.0, -1.0])
}

pub fn a52() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0]))
}

pub fn a53() -> DMatrix<f64> {
    let c = 2f64.powf(1.0 / 3.0);
    DMatrix::from_row_slice(3, 3, &[-1.0, c, 0.0, 0.0, -2.0, c, c, 0.0, -4.0])
}

pub fn a61() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, -1.0])
}

pub fn ex51(sigma: f64) -> SystemSpec {
    SystemSpec::new(
        a51(),
        DMatrix::from_diagonal_element(3, 3, sigma),
        OutputFunctionSpec::uniform(
            OutputKind::ReciprocalOffsetArctan,
            OutputFunctionSpec::diagonal_wiring(3),
            &[6.0, 1.0],
            Monotonicity::OrderPreserving,
        )
        .unwrap(),
        1.0 / 36.0,
    )
    .unwrap()
}

pub fn ex52(sigma: f64) -> SystemSpec {
    SystemSpec::new(
        a52(),
        DMatrix::from_diagonal_element(3, 3, sigma),
        OutputFunctionSpec::uniform(
            OutputKind::ReciprocalOffsetTanh,
            OutputFunctionSpec::cyclic_wiring(3),
            &[4.0, 1.0],
            Monotonicity::AntiOrderPreserving,
        )
        .unwrap(),
        1.0 / 16.0,
    )
    .unwrap()
}

pub fn ex53(sigma: f64) -> SystemSpec {
    SystemSpec::new(
        a53(),
        DMatrix::from_diagonal_element(3, 3, sigma),
        OutputFunctionSpec::uniform(
            OutputKind::ReciprocalOffsetAtanShifted,
            OutputFunctionSpec::cyclic_wiring(3),
            &[4.0, 1.0],
            Monotonicity::AntiOrderPreserving,
        )
        .unwrap(),
        1.0 / 16.0,
    )
    .unwrap()
}

pub fn ex61(sigma: f64) -> SystemSpec {
    SystemSpec::new(
        a61(),
        DMatrix::from_diagonal_element(2, 2, sigma),
        OutputFunctionSpec::uniform(
            OutputKind::AffineClamped,
            OutputFunctionSpec::diagonal_wiring(2),
            &[0.5, 0.5, 1.0],
            Monotonicity::OrderPreserving,
        )
        .unwrap(),
        0.5,
    )
    .unwrap()
}

pub fn constant_h(a: DMatrix<f64>, sigma: DMatrix<f64>, c: f64) -> SystemSpec {
    let d = a.nrows();
    SystemSpec::new(
        a,
        sigma,
        OutputFunctionSpec::constant(&vec![c; d]).unwrap(),
        0.0,
    )
    .unwrap()
}

pub fn catalog() -> Vec<(&'static str, SystemSpec)> {
    vec![("5.1", ex51(0.2)), ("5.2", ex52(0.2)), ("5.3", ex53(0.2))]
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
