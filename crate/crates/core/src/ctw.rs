//! Context Tree Weighting over binary streams.
//!
//! Every node on the context path keeps Krichevsky–Trofimov counts and two
//! log-probabilities: `log_kt` for the KT estimate of the bits seen in that
//! context and `log_weighted` for the CTW mixture of "stop here" and "split
//! on one more context bit", each with prior weight one half.
//!
//! Bits can be pushed in two ways. A *learning* update changes the
//! statistics along the current context path and then shifts the bit into
//! the context window. A *context-only* update just shifts the window. The
//! return predictor relies on this split: only return bits are learned,
//! while action and percept bits only condition.
//!
//! Updates made while a [`Checkpoint`] is outstanding are recorded in an
//! undo log holding full prior field values, so [`ContextTree::revert`]
//! restores the tree bit for bit, including nodes created in the meantime.
//! With no checkpoint outstanding nothing is logged.
//!
//! # Snapshot format (version 1, little-endian)
//!
//! ```text
//! magic "CTW1" | version u16 | depth u16 | context u128 | learned u64
//! node_count u32 | node_count × (zeros u32, ones u32, log_kt f64,
//!                                log_weighted f64, child0 u32, child1 u32)
//! ```
//! Node 0 is the root; a child index of 0 means "absent". The context's
//! most recent bit is bit 0.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::wire::{ByteReader, ByteWriter, WireError};

/// Deepest supported context (the window is a `u128`).
pub const MAX_DEPTH: usize = 128;

const LN_HALF: f64 = -std::f64::consts::LN_2;
const MAGIC: [u8; 4] = *b"CTW1";
const VERSION: u16 = 1;

static NEXT_TREE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CtwError {
    #[error("context depth {0} exceeds the maximum of {MAX_DEPTH}")]
    DepthTooLarge(usize),
    #[error("checkpoint was already reverted or committed")]
    StaleCheckpoint,
    #[error("checkpoint belongs to a different tree")]
    ForeignCheckpoint,
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// KT estimate of `next` after `zeros` zeros and `ones` ones.
pub fn kt_probability(zeros: u64, ones: u64, next: u8) -> f64 {
    let seen = if next == 0 { zeros } else { ones };
    (seen as f64 + 0.5) / ((zeros + ones) as f64 + 1.0)
}

/// `ln(½·e^a + ½·e^b)`.
#[inline]
fn log_mix(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    LN_HALF + hi + (lo - hi).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtwNode {
    pub zeros: u32,
    pub ones: u32,
    pub log_kt: f64,
    pub log_weighted: f64,
    children: [u32; 2],
}

impl CtwNode {
    const FRESH: CtwNode = CtwNode {
        zeros: 0,
        ones: 0,
        log_kt: 0.0,
        log_weighted: 0.0,
        children: [0, 0],
    };

    pub fn child(&self, bit: u8) -> Option<usize> {
        match self.children[bit as usize] {
            0 => None,
            i => Some(i as usize),
        }
    }

    #[inline]
    fn log_kt_after(&self, bit: u8) -> f64 {
        let seen = if bit == 0 { self.zeros } else { self.ones };
        let total = self.zeros as u64 + self.ones as u64;
        self.log_kt + ((seen as f64 + 0.5) / (total as f64 + 1.0)).ln()
    }
}

#[derive(Debug, Clone)]
enum Undo {
    Stats {
        index: u32,
        zeros: u32,
        ones: u32,
        log_kt: f64,
        log_weighted: f64,
    },
    Created {
        parent: u32,
        side: u8,
    },
    Context(u128),
}

#[derive(Debug, Clone, Copy)]
struct Mark {
    serial: u64,
    undo_len: usize,
    learned: u64,
}

/// Handle returned by [`ContextTree::checkpoint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[must_use = "a checkpoint must be reverted or committed"]
pub struct Checkpoint {
    tree: u64,
    serial: u64,
}

#[derive(Debug, Clone)]
pub struct ContextTree {
    depth: usize,
    nodes: Vec<CtwNode>,
    context: u128,
    learned: u64,
    undo: Vec<Undo>,
    marks: Vec<Mark>,
    id: u64,
    next_serial: u64,
}

impl ContextTree {
    pub fn new(depth: usize) -> Result<Self, CtwError> {
        if depth > MAX_DEPTH {
            return Err(CtwError::DepthTooLarge(depth));
        }
        Ok(Self {
            depth,
            nodes: vec![CtwNode::FRESH],
            context: 0,
            learned: 0,
            undo: Vec::new(),
            marks: Vec::new(),
            id: NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed),
            next_serial: 0,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> &CtwNode {
        &self.nodes[0]
    }

    pub fn node(&self, index: usize) -> Option<&CtwNode> {
        self.nodes.get(index)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Log of the probability the tree assigns to every learned bit so far.
    pub fn log_block_probability(&self) -> f64 {
        self.nodes[0].log_weighted
    }

    /// The last `depth` stream bits, most recent in bit 0.
    pub fn context_bits(&self) -> u128 {
        self.context
    }

    /// Number of learning updates applied so far.
    pub fn learned_bits(&self) -> u64 {
        self.learned
    }

    fn mask(&self) -> u128 {
        if self.depth == MAX_DEPTH {
            u128::MAX
        } else {
            (1u128 << self.depth) - 1
        }
    }

    #[inline]
    fn logging(&self) -> bool {
        !self.marks.is_empty()
    }

    #[inline]
    fn context_bit(&self, d: usize) -> u8 {
        ((self.context >> d) & 1) as u8
    }

    fn shift_context(&mut self, bit: u8) {
        if self.logging() {
            self.undo.push(Undo::Context(self.context));
        }
        self.context = ((self.context << 1) | bit as u128) & self.mask();
    }

    /// Push one bit. With `learn` the statistics along the context path are
    /// updated first; the bit always enters the context window.
    pub fn update(&mut self, bit: u8, learn: bool) {
        debug_assert!(bit <= 1);
        if learn {
            self.learn(bit);
        }
        self.shift_context(bit);
    }

    fn learn(&mut self, bit: u8) {
        let logging = self.logging();
        let mut path = [0u32; MAX_DEPTH + 1];
        let mut idx = 0usize;
        for d in 0..self.depth {
            let side = self.context_bit(d);
            let mut child = self.nodes[idx].children[side as usize];
            if child == 0 {
                child = self.nodes.len() as u32;
                self.nodes.push(CtwNode::FRESH);
                self.nodes[idx].children[side as usize] = child;
                if logging {
                    self.undo.push(Undo::Created {
                        parent: idx as u32,
                        side,
                    });
                }
            }
            path[d + 1] = child;
            idx = child as usize;
        }

        for d in (0..=self.depth).rev() {
            let i = path[d] as usize;
            let split = if d == self.depth {
                None
            } else {
                let [c0, c1] = self.nodes[i].children;
                Some(self.child_log_weighted(c0) + self.child_log_weighted(c1))
            };
            let node = &mut self.nodes[i];
            if logging {
                self.undo.push(Undo::Stats {
                    index: i as u32,
                    zeros: node.zeros,
                    ones: node.ones,
                    log_kt: node.log_kt,
                    log_weighted: node.log_weighted,
                });
            }
            node.log_kt = node.log_kt_after(bit);
            if bit == 0 {
                node.zeros += 1;
            } else {
                node.ones += 1;
            }
            node.log_weighted = match split {
                None => node.log_kt,
                Some(s) => log_mix(node.log_kt, s),
            };
        }
        self.learned += 1;
    }

    #[inline]
    fn child_log_weighted(&self, child: u32) -> f64 {
        if child == 0 {
            0.0
        } else {
            self.nodes[child as usize].log_weighted
        }
    }

    /// Probability of `bit` given the current context and statistics: the
    /// ratio of root weighted probabilities a learning update would induce.
    /// Does not mutate the tree.
    pub fn predict(&self, bit: u8) -> f64 {
        (self.log_weighted_after(bit) - self.nodes[0].log_weighted).exp()
    }

    fn log_weighted_after(&self, bit: u8) -> f64 {
        let mut path = [0u32; MAX_DEPTH + 1];
        // Existing prefix of the path; nodes past it are fresh.
        let mut existing = 1;
        let mut idx = 0usize;
        for d in 0..self.depth {
            let child = self.nodes[idx].children[self.context_bit(d) as usize];
            if child == 0 {
                break;
            }
            path[d + 1] = child;
            existing += 1;
            idx = child as usize;
        }

        let fresh_kt = CtwNode::FRESH.log_kt_after(bit);
        let mut below = 0.0;
        for d in (0..=self.depth).rev() {
            if d >= existing {
                // A fresh node's missing children have weight one.
                below = if d == self.depth {
                    fresh_kt
                } else {
                    log_mix(fresh_kt, below)
                };
                continue;
            }
            let node = &self.nodes[path[d] as usize];
            let kt = node.log_kt_after(bit);
            below = if d == self.depth {
                kt
            } else {
                let other = node.children[1 - self.context_bit(d) as usize];
                log_mix(kt, below + self.child_log_weighted(other))
            };
        }
        below
    }

    pub fn checkpoint(&mut self) -> Checkpoint {
        let serial = self.next_serial;
        self.next_serial += 1;
        self.marks.push(Mark {
            serial,
            undo_len: self.undo.len(),
            learned: self.learned,
        });
        Checkpoint {
            tree: self.id,
            serial,
        }
    }

    fn find_mark(&self, token: Checkpoint) -> Result<usize, CtwError> {
        if token.tree != self.id {
            return Err(CtwError::ForeignCheckpoint);
        }
        self.marks
            .iter()
            .rposition(|m| m.serial == token.serial)
            .ok_or(CtwError::StaleCheckpoint)
    }

    /// Undo everything since `token` was taken. Checkpoints taken after it
    /// are discarded as well.
    pub fn revert(&mut self, token: Checkpoint) -> Result<(), CtwError> {
        let pos = self.find_mark(token)?;
        let mark = self.marks[pos];
        while self.undo.len() > mark.undo_len {
            match self.undo.pop().expect("length checked") {
                Undo::Stats {
                    index,
                    zeros,
                    ones,
                    log_kt,
                    log_weighted,
                } => {
                    let n = &mut self.nodes[index as usize];
                    n.zeros = zeros;
                    n.ones = ones;
                    n.log_kt = log_kt;
                    n.log_weighted = log_weighted;
                }
                Undo::Created { parent, side } => {
                    self.nodes[parent as usize].children[side as usize] = 0;
                    self.nodes.pop();
                }
                Undo::Context(c) => self.context = c,
            }
        }
        self.learned = mark.learned;
        self.marks.truncate(pos);
        Ok(())
    }

    /// Keep everything since `token`, dropping it (and any later
    /// checkpoints). Changes stay revertible by enclosing checkpoints.
    pub fn commit(&mut self, token: Checkpoint) -> Result<(), CtwError> {
        let pos = self.find_mark(token)?;
        self.marks.truncate(pos);
        if self.marks.is_empty() {
            self.undo.clear();
        }
        Ok(())
    }

    pub fn open_checkpoints(&self) -> usize {
        self.marks.len()
    }

    /// Exact distribution over fixed-width `codes`, renormalized over the
    /// given codes only. Each code's joint probability is the chain of
    /// conditionals with learning updates between its bits; the tree is
    /// returned to its entry state.
    ///
    /// Codes sharing a prefix share the work for that prefix.
    pub fn block_distribution(&mut self, codes: &[u64], width: u32) -> Vec<f64> {
        assert!(!codes.is_empty(), "block distribution over no codes");
        assert!(
            width == 64 || codes.iter().all(|&c| c < 1u64 << width),
            "code wider than {width} bits"
        );
        let mut items: Vec<(u64, usize)> = codes.iter().copied().zip(0..).collect();
        items.sort_unstable();
        let mut out = vec![0.0; codes.len()];
        self.block_rec(&items, width, 1.0, &mut out);
        let total: f64 = out.iter().sum();
        for p in &mut out {
            *p /= total;
        }
        out
    }

    fn block_rec(&mut self, items: &[(u64, usize)], remaining: u32, acc: f64, out: &mut [f64]) {
        if remaining == 0 {
            for &(_, i) in items {
                out[i] = acc;
            }
            return;
        }
        let shift = remaining - 1;
        let split = items.partition_point(|&(c, _)| (c >> shift) & 1 == 0);
        for (bit, group) in [(0u8, &items[..split]), (1u8, &items[split..])] {
            if group.is_empty() {
                continue;
            }
            if remaining == 1 {
                let p = acc * self.predict(bit);
                for &(_, i) in group {
                    out[i] = p;
                }
            } else {
                let before = self.nodes[0].log_weighted;
                let token = self.checkpoint();
                self.update(bit, true);
                let p = (self.nodes[0].log_weighted - before).exp();
                self.block_rec(group, remaining - 1, acc * p, out);
                self.revert(token).expect("own checkpoint");
            }
        }
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.put_bytes(&MAGIC);
        w.put_u16(VERSION);
        w.put_u16(self.depth as u16);
        w.put_u128(self.context);
        w.put_u64(self.learned);
        w.put_u32(self.nodes.len() as u32);
        for n in &self.nodes {
            w.put_u32(n.zeros);
            w.put_u32(n.ones);
            w.put_f64(n.log_kt);
            w.put_f64(n.log_weighted);
            w.put_u32(n.children[0]);
            w.put_u32(n.children[1]);
        }
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self, CtwError> {
        r.expect_magic(MAGIC)?;
        r.expect_version(VERSION)?;
        let depth = r.get_u16()? as usize;
        let mut tree = Self::new(depth)?;
        tree.context = r.get_u128()?;
        if tree.context & !tree.mask() != 0 {
            return Err(WireError::Corrupt("context wider than depth".into()).into());
        }
        tree.learned = r.get_u64()?;
        let count = r.get_u32()? as usize;
        if count == 0 {
            return Err(WireError::Corrupt("tree without root".into()).into());
        }
        tree.nodes.clear();
        tree.nodes.reserve(count);
        for _ in 0..count {
            let node = CtwNode {
                zeros: r.get_u32()?,
                ones: r.get_u32()?,
                log_kt: r.get_f64()?,
                log_weighted: r.get_f64()?,
                children: [r.get_u32()?, r.get_u32()?],
            };
            if node.children.iter().any(|&c| c as usize >= count) {
                return Err(WireError::Corrupt("child index out of range".into()).into());
            }
            tree.nodes.push(node);
        }
        Ok(tree)
    }

    /// Snapshot in the documented binary format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CtwError> {
        let mut r = ByteReader::new(bytes);
        let tree = Self::read(&mut r)?;
        if !r.is_at_end() {
            return Err(WireError::Corrupt("trailing bytes".into()).into());
        }
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn kt_closed_form() {
        assert_eq!(kt_probability(0, 0, 1), 0.5);
        assert_eq!(kt_probability(1, 0, 1), 0.25);
        assert!(close(kt_probability(3, 1, 0), 0.7));
    }

    #[test]
    fn fresh_tree_predicts_a_half() {
        for depth in [0, 1, 5, 32] {
            let mut t = ContextTree::new(depth).unwrap();
            assert!(close(t.predict(0), 0.5));
            assert!(close(t.predict(1), 0.5));
            t.update(1, false);
            t.update(0, false);
            assert!(close(t.predict(1), 0.5));
        }
    }

    #[test]
    fn context_only_updates_leave_statistics_alone() {
        let mut t = ContextTree::new(3).unwrap();
        for b in [1, 0, 1, 1] {
            t.update(b, true);
        }
        let nodes = t.nodes.clone();
        let ctx = t.context_bits();
        t.update(1, false);
        assert_eq!(t.nodes, nodes);
        assert_eq!(t.context_bits(), ((ctx << 1) | 1) & 0b111);
    }

    #[test]
    fn depth_zero_first_symbol() {
        let mut t = ContextTree::new(0).unwrap();
        t.update(0, true);
        assert_eq!(t.root().zeros, 1);
        assert!(close(t.log_block_probability().exp(), 0.5));
    }

    #[test]
    fn predictions_normalize() {
        let mut t = ContextTree::new(8).unwrap();
        for i in 0..500u32 {
            let b = ((i * 7 + i / 3) % 3 == 0) as u8;
            t.update(b, i % 4 != 0);
            assert!((t.predict(0) + t.predict(1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_run_of_ones_concentrates() {
        let mut t = ContextTree::new(0).unwrap();
        for _ in 0..20 {
            t.update(1, true);
        }
        assert!(close(t.predict(1), 20.5 / 21.0));
        let mut deep = ContextTree::new(16).unwrap();
        for _ in 0..200 {
            deep.update(1, true);
        }
        assert!(deep.predict(1) > 0.9);
    }

    #[test]
    fn block_distribution_examples() {
        // KT adapts inside a block, so even a fresh tree is not uniform:
        // at depth 0, P(00) = ½·¾ and P(01) = ½·¼.
        let mut t0 = ContextTree::new(0).unwrap();
        let p = t0.block_distribution(&[0, 1, 2, 3], 2);
        for (got, want) in p.iter().zip([3.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0, 3.0 / 8.0]) {
            assert!(close(*got, want));
        }
        let mut t = ContextTree::new(4).unwrap();
        let all: Vec<u64> = (0..16).collect();
        let p = t.block_distribution(&all, 4);
        assert!(close(p.iter().sum::<f64>(), 1.0));
        let nine: Vec<u64> = (0..9).collect();
        let q = t.block_distribution(&nine, 4);
        let mass: f64 = p[..9].iter().sum();
        for c in 0..9 {
            assert!(close(q[c], p[c] / mass));
        }

        let mut d0 = ContextTree::new(0).unwrap();
        d0.update(0, true);
        d0.update(0, true);
        let before = d0.to_bytes();
        let p = d0.block_distribution(&[0, 1], 1);
        assert!(close(p[0], 2.5 / 3.0));
        assert!(close(p[1], 0.5 / 3.0));
        assert_eq!(d0.to_bytes(), before);
    }

    #[test]
    fn block_distribution_matches_chained_predictions() {
        let mut t = ContextTree::new(6).unwrap();
        for i in 0..300u32 {
            t.update(((i * 13) % 5 < 2) as u8, true);
        }
        let codes: Vec<u64> = vec![5, 0, 3, 7, 6];
        let dist = t.block_distribution(&codes, 3);
        let mut joint = Vec::new();
        for &c in &codes {
            let tok = t.checkpoint();
            let mut p = 1.0;
            for b in crate::codec::bits_msb_first(c, 3) {
                p *= t.predict(b);
                t.update(b, true);
            }
            t.revert(tok).unwrap();
            joint.push(p);
        }
        let z: f64 = joint.iter().sum();
        for (d, j) in dist.iter().zip(&joint) {
            assert!((d - j / z).abs() < 1e-12);
        }
    }

    #[test]
    fn revert_restores_bytes() {
        let mut t = ContextTree::new(12).unwrap();
        for i in 0..50u32 {
            t.update((i % 3 == 1) as u8, i % 2 == 0);
        }
        let before = t.to_bytes();
        let tok = t.checkpoint();
        for i in 0..100u32 {
            t.update(((i * 31) % 7 < 3) as u8, true);
        }
        assert_ne!(t.to_bytes(), before);
        t.revert(tok).unwrap();
        assert_eq!(t.to_bytes(), before);
    }

    #[test]
    fn nested_checkpoints_are_lifo() {
        let mut t = ContextTree::new(4).unwrap();
        let s0 = t.to_bytes();
        let outer = t.checkpoint();
        t.update(1, true);
        let s1 = t.to_bytes();
        let inner = t.checkpoint();
        t.update(0, true);
        t.revert(inner).unwrap();
        assert_eq!(t.to_bytes(), s1);
        t.revert(outer).unwrap();
        assert_eq!(t.to_bytes(), s0);
        assert_eq!(t.revert(inner), Err(CtwError::StaleCheckpoint));
    }

    #[test]
    fn reverting_an_outer_checkpoint_discards_inner_ones() {
        let mut t = ContextTree::new(4).unwrap();
        let s0 = t.to_bytes();
        let outer = t.checkpoint();
        t.update(1, true);
        let inner = t.checkpoint();
        t.update(1, true);
        t.revert(outer).unwrap();
        assert_eq!(t.to_bytes(), s0);
        assert_eq!(t.revert(inner), Err(CtwError::StaleCheckpoint));
    }

    #[test]
    fn revert_errors() {
        let mut a = ContextTree::new(2).unwrap();
        let mut b = ContextTree::new(2).unwrap();
        let tok = a.checkpoint();
        assert_eq!(b.revert(tok), Err(CtwError::ForeignCheckpoint));
        a.revert(tok).unwrap();
        assert_eq!(a.revert(tok), Err(CtwError::StaleCheckpoint));
    }

    #[test]
    fn commit_keeps_changes_and_stops_logging() {
        let mut t = ContextTree::new(3).unwrap();
        let tok = t.checkpoint();
        t.update(1, true);
        let after = t.to_bytes();
        t.commit(tok).unwrap();
        assert_eq!(t.to_bytes(), after);
        assert!(t.undo.is_empty());
        assert_eq!(t.revert(tok), Err(CtwError::StaleCheckpoint));
    }

    #[test]
    fn commit_inside_outer_checkpoint_is_still_revertible() {
        let mut t = ContextTree::new(3).unwrap();
        let s0 = t.to_bytes();
        let outer = t.checkpoint();
        let inner = t.checkpoint();
        t.update(1, true);
        t.commit(inner).unwrap();
        t.revert(outer).unwrap();
        assert_eq!(t.to_bytes(), s0);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut t = ContextTree::new(20).unwrap();
        for i in 0..200u32 {
            t.update(((i * 17) % 11 < 4) as u8, i % 3 != 0);
        }
        let bytes = t.to_bytes();
        let back = ContextTree::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.predict(1), t.predict(1));
        assert!(ContextTree::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            ContextTree::from_bytes(&bad),
            Err(CtwError::Wire(WireError::Version { .. }))
        ));
    }

    #[test]
    fn rejects_excessive_depth() {
        assert!(ContextTree::new(MAX_DEPTH).is_ok());
        assert_eq!(
            ContextTree::new(MAX_DEPTH + 1).err(),
            Some(CtwError::DepthTooLarge(MAX_DEPTH + 1))
        );
    }

    #[test]
    fn weighted_log_probabilities_stay_nonpositive() {
        let mut t = ContextTree::new(5).unwrap();
        for i in 0..400u32 {
            t.update((i.count_ones() % 2) as u8, true);
        }
        assert!(t.nodes.iter().all(|n| n.log_kt <= 0.0 && n.log_weighted <= 0.0));
    }
}
