//! Blocked KV-cache bookkeeping.
//!
//! KV storage is carved into fixed-size blocks. A sequence owns an ordered
//! list of blocks that need not be contiguous, so allocation only ever fails
//! when the pool runs out of free blocks, never because of placement.
//! Free blocks are reused lowest-id first to keep traces deterministic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, KvError};

pub type SequenceId = u64;
pub type BlockId = u32;

/// Number of blocks needed to hold `tokens` tokens.
pub fn blocks_required(tokens: u64, block_size: u64) -> usize {
    assert!(block_size >= 1, "block_size must be >= 1");
    tokens.div_ceil(block_size) as usize
}

/// Pool dimensions as they appear in scenario configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvConfig {
    pub total_blocks: u64,
    pub block_size_tokens: u64,
}

impl Default for KvConfig {
    fn default() -> Self {
        Self {
            total_blocks: 4096,
            block_size_tokens: 64,
        }
    }
}

impl KvConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.total_blocks < 1 {
            return Err(ConfigError::new("kv_cache.total_blocks", "must be >= 1"));
        }
        if self.block_size_tokens < 1 {
            return Err(ConfigError::new(
                "kv_cache.block_size_tokens",
                "must be >= 1",
            ));
        }
        if self.total_blocks > u64::from(BlockId::MAX) {
            return Err(ConfigError::new(
                "kv_cache.total_blocks",
                format!("must be <= {}", BlockId::MAX),
            ));
        }
        Ok(())
    }

    pub fn capacity_tokens(&self) -> u64 {
        self.total_blocks.saturating_mul(self.block_size_tokens)
    }
}

/// Blocks held by one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTable {
    pub sequence_id: SequenceId,
    pub blocks: Vec<BlockId>,
    pub tokens_stored: u64,
}

#[derive(Debug, Clone)]
pub struct BlockPool {
    block_size: u64,
    total_blocks: usize,
    free: BTreeSet<BlockId>,
    owner: BTreeMap<BlockId, SequenceId>,
    tables: BTreeMap<SequenceId, BlockTable>,
}

impl BlockPool {
    pub fn new(total_blocks: usize, block_size: u64) -> Self {
        assert!(total_blocks >= 1, "total_blocks must be >= 1");
        assert!(block_size >= 1, "block_size must be >= 1");
        assert!(total_blocks <= BlockId::MAX as usize);
        Self {
            block_size,
            total_blocks,
            free: (0..total_blocks as BlockId).collect(),
            owner: BTreeMap::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn from_config(cfg: &KvConfig) -> Self {
        Self::new(cfg.total_blocks as usize, cfg.block_size_tokens)
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    pub fn total_blocks(&self) -> usize {
        self.total_blocks
    }

    pub fn free_blocks(&self) -> usize {
        self.free.len()
    }

    pub fn used_blocks(&self) -> usize {
        self.owner.len()
    }

    pub fn table(&self, id: SequenceId) -> Option<&BlockTable> {
        self.tables.get(&id)
    }

    pub fn live_sequences(&self) -> impl Iterator<Item = &BlockTable> {
        self.tables.values()
    }

    /// New blocks `id` would need to grow by `additional` tokens. Sequences
    /// without a table are treated as empty.
    pub fn blocks_to_grow(&self, id: SequenceId, additional: u64) -> usize {
        let stored = self.tables.get(&id).map_or(0, |t| t.tokens_stored);
        blocks_required(stored + additional, self.block_size)
            - blocks_required(stored, self.block_size)
    }

    fn take_blocks(&mut self, id: SequenceId, n: usize) -> Vec<BlockId> {
        let taken: Vec<BlockId> = self.free.iter().copied().take(n).collect();
        for b in &taken {
            self.free.remove(b);
            self.owner.insert(*b, id);
        }
        taken
    }

    pub fn allocate(&mut self, id: SequenceId, tokens: u64) -> Result<&BlockTable, KvError> {
        if self.tables.contains_key(&id) {
            return Err(KvError::DuplicateSequence(id));
        }
        let needed = blocks_required(tokens, self.block_size);
        if needed > self.free.len() {
            return Err(KvError::InsufficientBlocks {
                needed,
                free: self.free.len(),
            });
        }
        let blocks = self.take_blocks(id, needed);
        let table = BlockTable {
            sequence_id: id,
            blocks,
            tokens_stored: tokens,
        };
        Ok(self.tables.entry(id).or_insert(table))
    }

    /// Grow a live table by `additional` tokens, returning how many blocks
    /// were appended.
    pub fn extend(&mut self, id: SequenceId, additional: u64) -> Result<usize, KvError> {
        if !self.tables.contains_key(&id) {
            return Err(KvError::UnknownSequence(id));
        }
        let needed = self.blocks_to_grow(id, additional);
        if needed > self.free.len() {
            return Err(KvError::InsufficientBlocks {
                needed,
                free: self.free.len(),
            });
        }
        let fresh = self.take_blocks(id, needed);
        let table = self.tables.get_mut(&id).expect("checked above");
        table.blocks.extend(fresh);
        table.tokens_stored += additional;
        Ok(needed)
    }

    /// Allocate when `id` has no table yet, extend otherwise.
    pub fn reserve(&mut self, id: SequenceId, additional: u64) -> Result<usize, KvError> {
        if self.tables.contains_key(&id) {
            self.extend(id, additional)
        } else {
            self.allocate(id, additional).map(|t| t.blocks.len())
        }
    }

    pub fn free(&mut self, id: SequenceId) -> Result<usize, KvError> {
        let table = self
            .tables
            .remove(&id)
            .ok_or(KvError::UnknownSequence(id))?;
        for b in &table.blocks {
            self.owner.remove(b);
            self.free.insert(*b);
        }
        Ok(table.blocks.len())
    }

    pub fn utilization(&self) -> f64 {
        self.owner.len() as f64 / self.total_blocks as f64
    }

    /// Verify the pool's structural invariants, describing the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.free.len() + self.owner.len() != self.total_blocks {
            return Err(format!(
                "conservation: free {} + owned {} != total {}",
                self.free.len(),
                self.owner.len(),
                self.total_blocks
            ));
        }
        if let Some(b) = self.free.iter().find(|b| self.owner.contains_key(b)) {
            return Err(format!("block {b} is both free and owned"));
        }
        let mut seen = BTreeSet::new();
        for table in self.tables.values() {
            let expected = blocks_required(table.tokens_stored, self.block_size);
            if table.blocks.len() != expected {
                return Err(format!(
                    "sequence {} holds {} blocks for {} tokens, expected {expected}",
                    table.sequence_id,
                    table.blocks.len(),
                    table.tokens_stored
                ));
            }
            for b in &table.blocks {
                if !seen.insert(*b) {
                    return Err(format!("block {b} appears in two tables"));
                }
                if self.owner.get(b) != Some(&table.sequence_id) {
                    return Err(format!("owner map disagrees for block {b}"));
                }
            }
        }
        if seen.len() != self.owner.len() {
            return Err("owned blocks not covered by any table".into());
        }
        Ok(())
    }
}
