//! Shared inputs for the benchmarks.

use orderctx::behavior::{behavior_from_assignment, make_pr_box, make_tsirelson, mix, Behavior};
use orderctx::enumerate_local_assignments;
use orderctx::Scenario;

/// A fully mixed no-signaling behavior in the two-party binary scenario.
pub fn mixed_2222() -> Behavior {
    let local = behavior_from_assignment(&enumerate_local_assignments(&Scenario::binary(2)).unwrap()[6]);
    mix(&[(0.4, &make_tsirelson()), (0.35, &make_pr_box()), (0.25, &local)]).unwrap()
}

/// PR box on the first two parties, uniform noise on the third, mixed with a
/// local vertex so that every chain conditional is non-degenerate.
pub fn mixed_3_party() -> Behavior {
    let noise = Behavior::uniform(Scenario::binary(1));
    let pr_c = make_pr_box().product(&noise).unwrap();
    let locals = enumerate_local_assignments(&Scenario::binary(3)).unwrap();
    let local = behavior_from_assignment(&locals[27]);
    let tsirelson_c = make_tsirelson().product(&noise).unwrap();
    mix(&[(0.5, &pr_c), (0.3, &tsirelson_c), (0.2, &local)]).unwrap()
}
