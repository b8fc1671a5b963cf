use proptest::prelude::*;

use incentive_marl::config::EnvConfig;
use incentive_marl::env::{JointAction, SupplyChainEnv, MAX_ORDER};
use incentive_marl::game::MarkovGame;
use incentive_marl::manager::{ManagerAction, MediatedGame};

fn action() -> impl Strategy<Value = JointAction> {
    prop::array::uniform3(prop::array::uniform2(0..=MAX_ORDER)).prop_map(JointAction)
}

fn aux() -> impl Strategy<Value = ManagerAction> {
    prop::array::uniform3(prop::array::uniform2(0.0..=1.0f64)).prop_map(ManagerAction)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conservation_holds_along_any_trajectory(
        seed in any::<u64>(),
        actions in prop::collection::vec(action(), 1..52),
    ) {
        let env = SupplyChainEnv::new(EnvConfig::default()).unwrap();
        let mut state = env.reset(seed);
        for a in &actions {
            let out = env.step_in_place(&mut state, a).unwrap();
            prop_assert!(state.audit().is_ok());
            prop_assert!((0.0..=1.0).contains(&out.ofr));
            for f in &out.factories {
                prop_assert!(f.items_shipped_on_time <= f.orders_received);
                prop_assert!(f.items_shipped_on_time <= f.items_shipped);
            }
        }
    }

    #[test]
    fn pure_step_matches_in_place(seed in any::<u64>(), actions in prop::collection::vec(action(), 1..20)) {
        let env = SupplyChainEnv::new(EnvConfig::default()).unwrap();
        let mut a = env.reset(seed);
        let mut b = env.reset(seed);
        for act in &actions {
            let (next, out) = env.step(&a, act).unwrap();
            let out_b = env.step_in_place(&mut b, act).unwrap();
            prop_assert_eq!(out, out_b);
            a = next;
        }
        prop_assert_eq!(a, b);
    }

    #[test]
    fn incentives_are_non_negative_and_balance(
        seed in any::<u64>(),
        plan in prop::collection::vec((aux(), action()), 1..30),
    ) {
        let game = MediatedGame::new(EnvConfig::default(), 1.0 / 300.0).unwrap();
        let mut state = game.reset(seed);
        for (k, (m, a)) in plan.iter().enumerate() {
            let step = game.mediate_step(&mut state, m, a).unwrap();
            prop_assert!(step.incentives_paid.iter().all(|&x| x >= 0.0));
            if k == 0 {
                prop_assert_eq!(step.incentives_paid, [0.0; 3]);
            }
            let raw: f64 = step.raw_rewards.iter().sum();
            let shaped: f64 = step.shaped_rewards.iter().sum();
            let paid: f64 = step.incentives_paid.iter().sum();
            prop_assert!((shaped - paid - raw).abs() <= 1e-9);
            prop_assert!((step.manager_reward - (raw - paid)).abs() <= 1e-9);
            for obs in step.augmented_obs(m).unwrap() {
                prop_assert_eq!(obs.len(), game.game().schema().len() + 2);
            }
        }
    }

    #[test]
    fn observations_are_finite_and_sized(seed in any::<u64>(), actions in prop::collection::vec(action(), 1..52)) {
        let game = MarkovGame::new(EnvConfig::default()).unwrap();
        let mut state = game.reset(seed);
        for a in &actions {
            let step = game.joint_step(&mut state, a).unwrap();
            prop_assert_eq!(step.manager_obs.len(), game.schema().manager_len());
            for obs in &step.agent_obs {
                prop_assert_eq!(obs.len(), game.schema().len());
                prop_assert!(obs.iter().all(|x| x.is_finite() && *x >= 0.0));
            }
        }
    }
}
