//! Two-dimensional parity error correction over the public channel,
//! disclosure accounting, and the one-time pad the finished key feeds.
//!
//! Each pass lays the key row-major into rows x cols blocks under a
//! fresh seeded shuffle and compares row and column parities. A single
//! error in a block sits at the intersection of one bad row and one bad
//! column and is flipped directly; a lone bad row (column) with several
//! bad columns (rows) pins every error in it; the symmetric two-bad-row
//! two-bad-column pattern has two possible diagonals and is resolved by
//! one extra three-cell parity. Denser patterns get one round of row
//! probes: each bad row's candidate cells are paired with a clean
//! anchor cell in the same row, so every probe is still a two-cell
//! parity. Whatever survives waits for the next pass's shuffle to
//! scatter it.
//!
//! Every disclosed parity hands the eavesdropper at most one bit, so
//! one key bit per parity is discarded from the end of the corrected
//! key. No message in the exchange ever carries a subset of fewer than
//! two cells, which is what keeps bit values off the channel.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::protocol::ClassicalMessage;
use crate::rng;

/// Number of random subset parities compared after the last pass.
pub const FINAL_CHECKS: u32 = 50;

/// Block geometry and schedule for [`reconcile_2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParityBlockConfig {
    pub rows: usize,
    pub cols: usize,
    pub passes: u32,
    /// Seed of the per-pass shuffles and the final verification draws.
    /// Both parties must share it; it is public information.
    pub shuffle_seed: u64,
}

impl Default for ParityBlockConfig {
    /// 8x8 blocks put the expected errors per block near one at the
    /// percent-level error rates raw keys come in with.
    fn default() -> Self {
        ParityBlockConfig { rows: 8, cols: 8, passes: 2, shuffle_seed: 17 }
    }
}

impl ParityBlockConfig {
    pub fn validate(&self, key_len: usize) -> Result<(), ReconcileError> {
        if self.rows < 2 || self.cols < 2 {
            return Err(ReconcileError::BadDimensions { rows: self.rows, cols: self.cols });
        }
        if self.passes == 0 {
            return Err(ReconcileError::NoPasses);
        }
        if self.rows * self.cols > key_len {
            return Err(ReconcileError::BlockTooLarge {
                block: self.rows * self.cols,
                key: key_len,
            });
        }
        Ok(())
    }
}

/// Outcome of one reconciliation conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationResult {
    /// Bob's corrected key with the disclosure budget removed from the
    /// end; this is the distilled key both sides keep.
    pub corrected_key: Vec<bool>,
    /// Absolute key positions flipped, in flip order.
    pub corrections: Vec<usize>,
    /// Parities revealed on the channel, final checks included; the
    /// same number of bits is discarded from the key.
    pub disclosed_bit_equivalents: usize,
    /// Upper bound on the probability an error survived verification;
    /// 1.0 when verification failed or could not run.
    pub residual_error_estimate: f64,
    /// True only when every final subset parity agreed.
    pub converged: bool,
}

/// Ways a reconciliation call can be malformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconcileError {
    LengthMismatch { alice: usize, bob: usize },
    EmptyKey,
    /// Parity of zero bits is undefined.
    EmptyParity,
    BadDimensions { rows: usize, cols: usize },
    BlockTooLarge { block: usize, key: usize },
    NoPasses,
}

impl fmt::Display for ReconcileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReconcileError::LengthMismatch { alice, bob } => {
                write!(f, "keys differ in length: {alice} vs {bob}")
            }
            ReconcileError::EmptyKey => write!(f, "cannot reconcile empty keys"),
            ReconcileError::EmptyParity => write!(f, "parity of an empty sequence is undefined"),
            ReconcileError::BadDimensions { rows, cols } => {
                write!(f, "blocks need at least 2 rows and 2 columns, got {rows}x{cols}")
            }
            ReconcileError::BlockTooLarge { block, key } => {
                write!(f, "block of {block} cells exceeds key length {key}")
            }
            ReconcileError::NoPasses => write!(f, "at least one pass is required"),
        }
    }
}

impl core::error::Error for ReconcileError {}

/// XOR fold of a bit sequence.
pub fn parity(bits: &[bool]) -> Result<bool, ReconcileError> {
    if bits.is_empty() {
        return Err(ReconcileError::EmptyParity);
    }
    Ok(bits.iter().fold(false, |acc, &b| acc ^ b))
}

fn subset_parity(key: &[bool], cells: &[u32]) -> bool {
    cells.iter().fold(false, |acc, &i| acc ^ key[i as usize])
}

/// Fisher-Yates permutation of 0..n for one pass, keyed by the shared
/// shuffle seed with the pass index as the stream id.
fn shuffled_indices(n: usize, shuffle_seed: u64, pass: u64) -> Vec<u32> {
    let mut v: Vec<u32> = (0..n as u32).collect();
    let mut rng = rng::stream(shuffle_seed, pass);
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
    v
}

/// One pass's arrangement: full blocks with row and column parities,
/// then leftover cells grouped into rows only.
struct PassLayout {
    /// Every parity subset of the pass, in message order: per block the
    /// row subsets then the column subsets, then the tail rows.
    subsets: Vec<Vec<u32>>,
    /// Per full block, its rows x cols cell grid of key indices.
    grids: Vec<Vec<u32>>,
}

fn build_layout(perm: &[u32], rows: usize, cols: usize) -> PassLayout {
    let rc = rows * cols;
    let nblocks = perm.len() / rc;
    let mut subsets = Vec::with_capacity(nblocks * (rows + cols) + 2);
    let mut grids = Vec::with_capacity(nblocks);
    for b in 0..nblocks {
        let grid = perm[b * rc..(b + 1) * rc].to_vec();
        for i in 0..rows {
            subsets.push(grid[i * cols..(i + 1) * cols].to_vec());
        }
        for j in 0..cols {
            subsets.push((0..rows).map(|i| grid[i * cols + j]).collect());
        }
        grids.push(grid);
    }
    // The tail has no column structure; its rows give detection but no
    // localization, and a pass's shuffle will fold the cells into full
    // blocks next time. A singleton row would disclose a bare bit, so
    // it is merged into its neighbor, and a 1-cell tail goes unprotected
    // for the pass.
    let tail = &perm[nblocks * rc..];
    if tail.len() >= 2 {
        let mut tail_rows: Vec<Vec<u32>> = tail.chunks(cols).map(|c| c.to_vec()).collect();
        if tail_rows.len() >= 2 && tail_rows.last().map(Vec::len) == Some(1) {
            let last = tail_rows.pop().unwrap();
            tail_rows.last_mut().unwrap().extend(last);
        }
        subsets.extend(tail_rows);
    }
    PassLayout { subsets, grids }
}

/// Corrects Bob's key against Alice's through a simulated public
/// conversation; `transcript` receives every message either side would
/// send. Returns the distilled key and its accounting.
///
/// Alice's key is the reference. Both keys stay in their original
/// order; the shuffles only permute which cells share a parity.
pub fn reconcile_2d(
    alice_key: &[bool],
    bob_key: &[bool],
    config: &ParityBlockConfig,
    transcript: &mut Vec<ClassicalMessage>,
) -> Result<ReconciliationResult, ReconcileError> {
    if alice_key.len() != bob_key.len() {
        return Err(ReconcileError::LengthMismatch {
            alice: alice_key.len(),
            bob: bob_key.len(),
        });
    }
    if alice_key.is_empty() {
        return Err(ReconcileError::EmptyKey);
    }
    config.validate(alice_key.len())?;

    let n = alice_key.len();
    let (rows, cols) = (config.rows, config.cols);
    let mut work = bob_key.to_vec();
    let mut corrections: Vec<usize> = Vec::new();
    let mut disclosed = 0usize;

    transcript.push(ClassicalMessage::SessionControl {
        shuffle_seed: config.shuffle_seed,
        passes: config.passes,
        final_checks: FINAL_CHECKS,
    });

    for pass in 0..config.passes {
        let perm = shuffled_indices(n, config.shuffle_seed, pass as u64);
        let layout = build_layout(&perm, rows, cols);
        debug_assert!(layout.subsets.iter().all(|s| s.len() >= 2));

        let alice_par: Vec<bool> =
            layout.subsets.iter().map(|s| subset_parity(alice_key, s)).collect();
        transcript.push(ClassicalMessage::ParityRequest { subsets: layout.subsets.clone() });
        transcript.push(ClassicalMessage::ParityReply { parities: alice_par.clone() });
        disclosed += layout.subsets.len();

        // Against the static disclosed parities, flip until nothing
        // changes. Applying one block's rule can leave it dirty when
        // the true error pattern was not the hypothesized one, so the
        // iteration count is capped and each block gets at most one
        // tie-break and one probe round per pass.
        let mut tie_broken = vec![false; layout.grids.len()];
        let mut probed = vec![false; layout.grids.len()];
        for _ in 0..(rows + cols) {
            let mut changed = false;
            let mut ties: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
            let mut probe_blocks: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();

            for (b, grid) in layout.grids.iter().enumerate() {
                let base = b * (rows + cols);
                let bad_rows: Vec<usize> = (0..rows)
                    .filter(|&i| {
                        subset_parity(&work, &layout.subsets[base + i]) != alice_par[base + i]
                    })
                    .collect();
                let bad_cols: Vec<usize> = (0..cols)
                    .filter(|&j| {
                        subset_parity(&work, &layout.subsets[base + rows + j])
                            != alice_par[base + rows + j]
                    })
                    .collect();

                match (bad_rows.len(), bad_cols.len()) {
                    // Nothing bad, or errors visible on one axis only:
                    // parity pairs inside the silent axis cancel, so
                    // there is nothing to localize this pass.
                    (0, _) | (_, 0) => {}
                    (1, _) => {
                        let r = bad_rows[0];
                        for &c in &bad_cols {
                            flip(&mut work, &mut corrections, grid[r * cols + c]);
                        }
                        changed = true;
                    }
                    (_, 1) => {
                        let c = bad_cols[0];
                        for &r in &bad_rows {
                            flip(&mut work, &mut corrections, grid[r * cols + c]);
                        }
                        changed = true;
                    }
                    (2, 2) if !tie_broken[b] => {
                        ties.push((b, bad_rows[0], bad_rows[1], bad_cols[0], bad_cols[1]));
                    }
                    _ if !probed[b] => {
                        probe_blocks.push((b, bad_rows, bad_cols));
                    }
                    _ => {}
                }
            }

            if !ties.is_empty() {
                // Two bad rows crossing two bad columns fit exactly two
                // error diagonals. A parity over three of the four
                // intersections meets the diagonals with opposite
                // parity, so one more disclosed bit picks the right one.
                let subsets: Vec<Vec<u32>> = ties
                    .iter()
                    .map(|&(b, r1, _r2, c1, c2)| {
                        let g = &layout.grids[b];
                        vec![g[r1 * cols + c1], g[r1 * cols + c2], g[_r2 * cols + c1]]
                    })
                    .collect();
                let replies: Vec<bool> =
                    subsets.iter().map(|s| subset_parity(alice_key, s)).collect();
                transcript.push(ClassicalMessage::ParityRequest { subsets: subsets.clone() });
                transcript.push(ClassicalMessage::ParityReply { parities: replies.clone() });
                disclosed += ties.len();

                for ((&(b, r1, r2, c1, c2), subset), &alice_p) in
                    ties.iter().zip(&subsets).zip(&replies)
                {
                    let g = &layout.grids[b];
                    if subset_parity(&work, subset) != alice_p {
                        flip(&mut work, &mut corrections, g[r1 * cols + c1]);
                        flip(&mut work, &mut corrections, g[r2 * cols + c2]);
                    } else {
                        flip(&mut work, &mut corrections, g[r1 * cols + c2]);
                        flip(&mut work, &mut corrections, g[r2 * cols + c1]);
                    }
                    tie_broken[b] = true;
                }
                changed = true;
            }

            if !probe_blocks.is_empty() {
                // Denser patterns: pair each candidate cell of a bad
                // row with a believed-clean anchor cell from the same
                // row. Anchor and candidate agree on one side exactly
                // when the probe parities agree, which reads the
                // candidate off without ever sending a lone cell. No
                // clean column means no anchor; such rows wait for the
                // reshuffle.
                let mut subsets: Vec<Vec<u32>> = Vec::new();
                let mut actions: Vec<u32> = Vec::new();
                for (b, bad_rows, bad_cols) in &probe_blocks {
                    let grid = &layout.grids[*b];
                    let anchor = (0..cols).find(|c| !bad_cols.contains(c));
                    let Some(a) = anchor else { continue };
                    for &r in bad_rows {
                        for &c in bad_cols {
                            subsets.push(vec![grid[r * cols + c], grid[r * cols + a]]);
                            actions.push(grid[r * cols + c]);
                        }
                    }
                    probed[*b] = true;
                }
                if !subsets.is_empty() {
                    let replies: Vec<bool> =
                        subsets.iter().map(|s| subset_parity(alice_key, s)).collect();
                    transcript.push(ClassicalMessage::ParityRequest { subsets: subsets.clone() });
                    transcript.push(ClassicalMessage::ParityReply { parities: replies.clone() });
                    disclosed += subsets.len();
                    for ((subset, &alice_p), &cell) in
                        subsets.iter().zip(&replies).zip(&actions)
                    {
                        if subset_parity(&work, subset) != alice_p {
                            flip(&mut work, &mut corrections, cell);
                        }
                    }
                    changed = true;
                }
            }

            if !changed {
                break;
            }
        }
    }

    // Final verification: both sides compare parities of random subsets
    // of the bits they are about to keep. The retained prefix already
    // excludes the verification budget, so the checks disclose nothing
    // about surviving key material beyond the counted parities.
    let provisional = n.saturating_sub(disclosed + FINAL_CHECKS as usize);
    let (retained, converged, residual) = if provisional >= 2 {
        disclosed += FINAL_CHECKS as usize;
        let mut check_rng = rng::stream(config.shuffle_seed, config.passes as u64);
        let mut subsets = Vec::with_capacity(FINAL_CHECKS as usize);
        for _ in 0..FINAL_CHECKS {
            loop {
                let subset: Vec<u32> = (0..provisional as u32)
                    .filter(|_| check_rng.random_bool(0.5))
                    .collect();
                if subset.len() >= 2 {
                    subsets.push(subset);
                    break;
                }
            }
        }
        let replies: Vec<bool> = subsets.iter().map(|s| subset_parity(alice_key, s)).collect();
        let clean = subsets
            .iter()
            .zip(&replies)
            .all(|(s, &p)| subset_parity(&work, s) == p);
        transcript.push(ClassicalMessage::ParityRequest { subsets });
        transcript.push(ClassicalMessage::ParityReply { parities: replies });
        let residual = if clean { libm::pow(0.5, FINAL_CHECKS as f64) } else { 1.0 };
        (provisional, clean, residual)
    } else {
        // Too little key left to verify without spelling bits out.
        (n.saturating_sub(disclosed), false, 1.0)
    };

    work.truncate(retained);
    Ok(ReconciliationResult {
        corrected_key: work,
        corrections,
        disclosed_bit_equivalents: disclosed,
        residual_error_estimate: residual,
        converged,
    })
}

fn flip(work: &mut [bool], corrections: &mut Vec<usize>, cell: u32) {
    work[cell as usize] = !work[cell as usize];
    corrections.push(cell as usize);
}

/// A key buffer that can be spent exactly once.
///
/// XOR is linear: two ciphertexts under the same key bits XOR to the
/// XOR of their plaintexts, so any reuse leaks message structure. The
/// cursor makes reuse a type-level impossibility rather than a policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneTimePad {
    key: Vec<bool>,
    consumed: usize,
}

/// Misuse of the pad's one-shot contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadError {
    /// Not enough unspent key for the request.
    Exhausted { requested: usize, remaining: usize },
    /// An attempt to move the cursor backwards over spent key.
    Reuse { offset: usize, consumed: usize },
}

impl fmt::Display for PadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PadError::Exhausted { requested, remaining } => {
                write!(f, "pad exhausted: {requested} bits requested, {remaining} remain")
            }
            PadError::Reuse { offset, consumed } => {
                write!(f, "refusing to reuse pad bits: offset {offset} behind cursor {consumed}")
            }
        }
    }
}

impl core::error::Error for PadError {}

impl OneTimePad {
    pub fn new(key: Vec<bool>) -> Self {
        OneTimePad { key, consumed: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.key.len() - self.consumed
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Moves the cursor forward to `offset`, skipping (and wasting) the
    /// bits in between. Moving backwards would reuse spent key and is
    /// refused.
    pub fn skip_to(&mut self, offset: usize) -> Result<(), PadError> {
        if offset < self.consumed {
            return Err(PadError::Reuse { offset, consumed: self.consumed });
        }
        if offset > self.key.len() {
            return Err(PadError::Exhausted {
                requested: offset - self.consumed,
                remaining: self.remaining(),
            });
        }
        self.consumed = offset;
        Ok(())
    }

    fn xor_advance(&mut self, data: &[bool]) -> Result<Vec<bool>, PadError> {
        if data.len() > self.remaining() {
            return Err(PadError::Exhausted {
                requested: data.len(),
                remaining: self.remaining(),
            });
        }
        let out = data
            .iter()
            .zip(&self.key[self.consumed..])
            .map(|(&d, &k)| d ^ k)
            .collect();
        self.consumed += data.len();
        Ok(out)
    }

    /// XORs the message with the next unspent key bits and advances the
    /// cursor past them.
    pub fn vernam_encrypt(&mut self, message: &[bool]) -> Result<Vec<bool>, PadError> {
        self.xor_advance(message)
    }

    /// The inverse; the receiving pad's cursor must sit where the
    /// sender's did, which both sides get for free by consuming their
    /// identical keys in the same order.
    pub fn vernam_decrypt(&mut self, ciphertext: &[bool]) -> Result<Vec<bool>, PadError> {
        self.xor_advance(ciphertext)
    }
}
