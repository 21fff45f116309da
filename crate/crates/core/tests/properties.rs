mod common;

use std::collections::BTreeSet;

use chrono::{Datelike, Days, NaiveDate};
use proptest::prelude::*;

use citizennet::citizen::is_of_voting_age;
use citizennet::ledger::verify_chain;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_workloads_converge_and_stay_serializable(seed in any::<u64>(), size in 20usize..60) {
        let config = convergence_config();
        let scenario = convergence_scenario(seed, size);
        let sim = run(&config, &scenario);
        for ch in sim.channel_ids() {
            let peers = sim.channel_peers(&ch);
            let hashes: BTreeSet<_> = peers.iter().map(|p| p.ledger(&ch).unwrap().state_hash()).collect();
            prop_assert_eq!(hashes.len(), 1, "{}", ch);
            for p in peers {
                let blocks = p.ledger(&ch).unwrap().blocks().as_slice();
                prop_assert!(verify_chain(blocks).is_ok());
                let bad = serial_order_violations(blocks);
                prop_assert!(bad.is_empty(), "{}/{}: {:?}", p.peer_id, ch, bad);
            }
        }
        let (_, mismatches) = replay_mismatches(&sim);
        prop_assert!(mismatches.is_empty(), "{:?}", mismatches);
        prop_assert_eq!(run(&config, &scenario).report().to_json(), sim.report().to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn voting_age_is_monotone_and_matches_the_calendar(
        dob_days in 0u64..20_000,
        later in 0u64..12_000,
        step in 0u64..400,
    ) {
        let base = NaiveDate::from_ymd_opt(1960, 1, 1).unwrap();
        let dob = base + Days::new(dob_days);
        let on = dob + Days::new(later);
        let b18 = eighteenth_birthday(dob.year() as i64, dob.month(), dob.day());
        let want = (on.year() as i64, on.month(), on.day()) >= b18;
        prop_assert_eq!(is_of_voting_age(dob, on), want);
        if want {
            prop_assert!(is_of_voting_age(dob, on + Days::new(step)));
        }
    }
}
