use std::sync::OnceLock;

use crate::dlog::DlogTable;
use crate::group::{group_gen, GroupContext, TEST_GROUP_BITS};

/// Shared 64-bit group with a `2^16` table, built once per test binary.
pub(crate) fn fixture() -> &'static (GroupContext, DlogTable) {
    static FIXTURE: OnceLock<(GroupContext, DlogTable)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let ctx = group_gen(TEST_GROUP_BITS, b"fedv-core tests").unwrap();
        let table = DlogTable::build(&ctx, 1 << 16).unwrap();
        (ctx, table)
    })
}
