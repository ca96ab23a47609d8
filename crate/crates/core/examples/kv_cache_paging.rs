//! Allocate, grow and free sequences in a small paged KV pool.

use batchsim::BlockPool;

fn show(pool: &BlockPool, label: &str) {
    println!(
        "{label:<24} used={:>2} free={:>2} utilization={:.2}",
        pool.used_blocks(),
        pool.free_blocks(),
        pool.utilization()
    );
}

fn main() {
    let mut pool = BlockPool::new(16, 64);
    show(&pool, "empty");

    pool.allocate(1, 130).unwrap();
    pool.allocate(2, 64).unwrap();
    show(&pool, "two prompts");
    println!("  seq 1 table: {:?}", pool.table(1).unwrap());

    // 130 -> 192 tokens fits in the third block; one more token needs a fourth.
    println!(
        "  grow seq 1 by 62: {} new blocks",
        pool.extend(1, 62).unwrap()
    );
    println!(
        "  grow seq 1 by 1: {} new blocks",
        pool.extend(1, 1).unwrap()
    );

    match pool.allocate(3, 64 * 20) {
        Ok(_) => println!("  unexpected success"),
        Err(e) => println!("  seq 3 refused: {e}"),
    }

    println!("  free seq 1: {} blocks returned", pool.free(1).unwrap());
    show(&pool, "after free");

    // Freed ids are reused lowest first.
    pool.allocate(4, 100).unwrap();
    println!("  seq 4 table: {:?}", pool.table(4).unwrap());
    pool.check_invariants().unwrap();
}
