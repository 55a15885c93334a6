use std::path::Path;

use proptest::prelude::*;

use rsgd_core::data::{decode_dataset, encode_dataset, generate_teacher, BatchPlan};
use rsgd_core::network::{
    decode_checkpoint, encode_checkpoint, softmax, Activation, Architecture, GradientSet, LossKind,
    NetworkParams,
};
use rsgd_core::optim::{
    memory_length_pmf, sgdm_unfold, LearningRateSchedule, MomentumPolicy, OptimizerKind,
    OptimizerState, ReinforcementSchedule,
};
use rsgd_core::rng::{gaussian_matrix, RngStream, StreamId};

fn schedule() -> impl Strategy<Value = ReinforcementSchedule> {
    prop_oneof![
        (0.5f64..=1.0, 0.0f64..0.01)
            .prop_map(|(g, l)| ReinforcementSchedule::exp_gamma(g, l).unwrap()),
        (0.01f64..3.0, 0.05f64..2.0)
            .prop_map(|(a, b)| ReinforcementSchedule::power_law(a, b).unwrap()),
    ]
}

fn random_grads(n: usize, seed: u64) -> Vec<GradientSet> {
    let mut rng = RngStream::new(seed, StreamId::Custom(7));
    (0..n)
        .map(|_| {
            GradientSet::new(vec![
                gaussian_matrix(2, 3, 0.0, 1.0, &mut rng),
                gaussian_matrix(1, 2, 0.0, 1.0, &mut rng),
            ])
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn memory_pmf_is_a_distribution(s in schedule(), t in 0u64..10_000, per_epoch in 1u64..50) {
        let pmf = memory_length_pmf(&s, t, |l| l / per_epoch);
        prop_assert_eq!(pmf.len() as u64, t + 1);
        prop_assert!(pmf.iter().all(|&p| p >= 0.0));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn momentum_matches_unfolded_form(s in schedule(), fixed in proptest::option::of(0.0f64..=1.0), len in 1usize..50, seed: u64) {
        let policy = match fixed {
            Some(rho) => MomentumPolicy::Fixed(rho),
            None => MomentumPolicy::Adaptive(s),
        };
        let grads = random_grads(len, seed);
        let mut state = OptimizerState::new(OptimizerKind::Sgdm(policy), &grads[0].shapes());
        let lr = LearningRateSchedule::new(0.8, 0.99, 0.02).unwrap();
        let (mut rhos, mut etas) = (Vec::new(), Vec::new());
        let mut last = None;
        for (t, g) in grads.iter().enumerate() {
            let epoch = t as u64 / 5;
            if t > 0 && t % 5 == 0 {
                state.end_epoch();
            }
            let eta = lr.eta_at(epoch + 1);
            rhos.push(policy.rho(t as u64, epoch));
            etas.push(eta);
            last = Some(state.sgdm_step(g, eta).unwrap());
        }
        let closed = sgdm_unfold(&rhos, &grads, &etas).unwrap();
        prop_assert!(last.unwrap().max_abs_diff(&closed) <= 1e-10);
    }

    #[test]
    fn never_reinforcing_is_plain_sgd(len in 1usize..30, seed: u64, eta in 0.001f64..1.0) {
        let grads = random_grads(len, seed);
        let shapes = grads[0].shapes();
        let mut r = OptimizerState::new(OptimizerKind::Rsgd(ReinforcementSchedule::NEVER), &shapes);
        let mut b = OptimizerState::new(OptimizerKind::Backprop, &shapes);
        let mut coins = RngStream::new(seed, StreamId::Reinforcement);
        for g in &grads {
            prop_assert_eq!(r.rsgd_step(g, eta, &mut coins).unwrap(), b.sgd_step(g, eta).unwrap());
        }
    }

    #[test]
    fn learning_rate_is_monotone_and_floored(eta0 in 0.001f64..2.0, beta in 0.9f64..=1.0, floor in 0.0001f64..0.1) {
        let lr = LearningRateSchedule::new(eta0, beta, floor).unwrap();
        let mut prev = f64::INFINITY;
        for e in 1..200 {
            let eta = lr.eta_at(e);
            prop_assert!(eta >= floor && eta <= prev);
            prev = eta;
        }
    }

    #[test]
    fn softmax_is_a_distribution(xs in proptest::collection::vec(-50.0f64..50.0, 1..20)) {
        let p = softmax(&xs);
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn checkpoint_round_trip(widths in proptest::collection::vec(1usize..6, 2..5), relu: bool, ce: bool, bias: bool, seed: u64) {
        let hidden = if relu { Activation::Relu } else { Activation::Sigmoid };
        let loss = if ce { LossKind::CrossEntropy } else { LossKind::Quadratic };
        let arch = Architecture::with_loss(widths, hidden, loss, bias).unwrap();
        let p = NetworkParams::init(arch, &mut RngStream::new(seed, StreamId::WeightInit));
        let back = decode_checkpoint(&encode_checkpoint(&p), Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert!(back.values().zip(p.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn dataset_round_trip(n_in in 1usize..8, n_out in 1usize..4, count in 1usize..30, seed: u64) {
        let (d, _) = generate_teacher(n_in, n_out, count, 0, &mut RngStream::new(seed, StreamId::DataGen)).unwrap();
        prop_assert_eq!(decode_dataset(&encode_dataset(&d), Path::new("mem")).unwrap(), d);
    }

    #[test]
    fn batches_cover_each_epoch(batches in 1usize..10, size in 1usize..10, seed: u64) {
        let count = batches * size;
        let mut plan = BatchPlan::new(count, size, RngStream::new(seed, StreamId::Shuffle)).unwrap();
        for _ in 0..3 {
            let mut seen: Vec<usize> = (0..batches).flat_map(|_| plan.next_indices().to_vec()).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..count).collect::<Vec<_>>());
        }
    }
}
