use proptest::prelude::*;
use std::collections::HashSet;
use stripepaint_tensor::{set_debug_checks, Init, Rng, Tape, Tensor, TensorError};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-50.0f32..50.0, len)
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..5, cols in 1usize..9, seed in any::<u64>()) {
        let x = Tensor::randn(&[rows, cols], 20.0, &mut Rng::new(seed)).unwrap();
        let y = x.softmax(1).unwrap();
        for row in y.data().chunks(cols) {
            let s: f64 = row.iter().map(|&v| f64::from(v)).sum();
            prop_assert!((s - 1.0).abs() <= 1e-6, "row sum {}", s);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn permute_round_trip_is_exact(data in finite_vec(24)) {
        let x = Tensor::from_vec(data, &[2, 3, 4]).unwrap();
        let y = x.permute(&[2, 0, 1]).unwrap().permute(&[1, 2, 0]).unwrap();
        prop_assert_eq!(x.data(), y.data());
    }

    #[test]
    fn split_concat_round_trip_is_exact(data in finite_vec(30), cut in 1usize..5) {
        let x = Tensor::from_vec(data, &[6, 5]).unwrap();
        let parts = x.split(1, &[cut, 5 - cut]).unwrap();
        let y = Tensor::concat(&parts, 1).unwrap();
        prop_assert_eq!(x.data(), y.data());
    }

    #[test]
    fn seeded_constructor_reproducible(seed in any::<u64>(), n in 1usize..64) {
        let init = Init::SeededNormal { seed, stddev: 0.02 };
        let a = Tensor::construct(&[n], init).unwrap();
        let b = Tensor::construct(&[n], init).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }
}

#[test]
fn tape_is_topological_and_unique() {
    let mut rng = Rng::new(1);
    let a = Tensor::randn(&[3, 3], 1.0, &mut rng)
        .unwrap()
        .requires_grad_();
    let b = Tensor::randn(&[3, 3], 1.0, &mut rng)
        .unwrap()
        .requires_grad_();
    let c = a.matmul(&b).unwrap();
    let d = c.add(&a).unwrap().relu().unwrap();
    let loss = d.mul(&c).unwrap().sum().unwrap();
    let tape = Tape::build(&loss);
    let pos: std::collections::HashMap<u64, usize> = tape
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id(), i))
        .collect();
    assert_eq!(pos.len(), tape.len(), "every node visited once");
    let ids: HashSet<u64> = [a.id(), b.id(), c.id(), d.id(), loss.id()]
        .into_iter()
        .collect();
    assert!(ids.iter().all(|id| pos.contains_key(id)));
    assert!(pos[&a.id()] < pos[&c.id()]);
    assert!(pos[&c.id()] < pos[&d.id()]);
    assert!(pos[&d.id()] < pos[&loss.id()]);
}

#[test]
fn backward_is_idempotent_after_zeroing() {
    let mut rng = Rng::new(2);
    let w = Tensor::randn(&[4, 4], 1.0, &mut rng)
        .unwrap()
        .requires_grad_();
    let x = Tensor::randn(&[2, 4], 1.0, &mut rng).unwrap();
    let run = || {
        let loss = x
            .matmul(&w)
            .unwrap()
            .gelu()
            .unwrap()
            .square()
            .unwrap()
            .mean()
            .unwrap();
        loss.backward().unwrap();
        let g = w.grad().unwrap();
        w.zero_grad();
        g
    };
    assert_eq!(run(), run());
}

#[test]
fn every_tensor_on_path_gets_grad() {
    let x = Tensor::from_vec(vec![1.0, -2.0], &[2])
        .unwrap()
        .requires_grad_();
    let h = x.scale(3.0).unwrap();
    let y = h.square().unwrap().sum().unwrap();
    y.backward().unwrap();
    assert!(x.grad().is_some() && h.grad().is_some() && y.grad().is_some());
}

#[test]
fn backward_contract_errors() {
    let x = Tensor::from_vec(vec![1.0, 2.0], &[2])
        .unwrap()
        .requires_grad_();
    assert!(matches!(
        x.scale(2.0).unwrap().backward(),
        Err(TensorError::Contract(_))
    ));
    let c = Tensor::scalar(1.0);
    assert!(matches!(c.backward(), Err(TensorError::Contract(_))));
}

#[test]
fn debug_mode_flags_division_by_zero() {
    // The only test in this binary that touches the global flag.
    let a = Tensor::from_vec(vec![1.0], &[1]).unwrap();
    let z = Tensor::from_vec(vec![0.0], &[1]).unwrap();
    set_debug_checks(true);
    let flagged = a.div(&z);
    set_debug_checks(false);
    assert_eq!(flagged.unwrap_err(), TensorError::NonFinite { op: "div" });
    assert!(a.div(&z).unwrap().data()[0].is_infinite());
}
