//! Composite Hilbert-space bookkeeping.
//!
//! Subsystem ordering convention: qubits first (ascending index), then bosonic
//! modes (ascending index). Subsystem 0 is the leftmost, most significant
//! tensor factor, i.e. a basis index decomposes big-endian in mixed radix.
//! `operators::tests::ordering_convention` pins this down.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Layout of a composite space: a qubit register followed by truncated
/// bosonic modes.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HilbertLayout {
    qubit_count: usize,
    fock_dims: Vec<usize>,
}

impl HilbertLayout {
    pub fn new(qubit_count: usize, fock_dims: impl Into<Vec<usize>>) -> Result<Self> {
        let fock_dims = fock_dims.into();
        for &d in &fock_dims {
            if d < 2 {
                return Err(Error::InvalidDimension { dim: d });
            }
        }
        Ok(Self { qubit_count, fock_dims })
    }

    /// Single bosonic mode, no qubits.
    pub fn mode(dim: usize) -> Result<Self> {
        Self::new(0, [dim])
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn mode_count(&self) -> usize {
        self.fock_dims.len()
    }

    pub fn fock_dims(&self) -> &[usize] {
        &self.fock_dims
    }

    pub fn subsystem_count(&self) -> usize {
        self.qubit_count + self.fock_dims.len()
    }

    /// Local dimension of a subsystem slot (qubits first, then modes).
    pub fn subsystem_dim(&self, slot: usize) -> Result<usize> {
        if slot < self.qubit_count {
            Ok(2)
        } else if slot < self.subsystem_count() {
            Ok(self.fock_dims[slot - self.qubit_count])
        } else {
            Err(Error::SlotOutOfRange { slot, count: self.subsystem_count() })
        }
    }

    /// Slot index of bosonic mode `mode`.
    pub fn mode_slot(&self, mode: usize) -> Result<usize> {
        if mode < self.fock_dims.len() {
            Ok(self.qubit_count + mode)
        } else {
            Err(Error::SlotOutOfRange {
                slot: self.qubit_count + mode,
                count: self.subsystem_count(),
            })
        }
    }

    pub fn total_dim(&self) -> usize {
        let mut d = 1usize << self.qubit_count;
        for &f in &self.fock_dims {
            d *= f;
        }
        d
    }

    /// Stride of a slot in the big-endian mixed-radix index.
    pub fn stride(&self, slot: usize) -> Result<usize> {
        self.subsystem_dim(slot)?;
        let mut s = 1usize;
        for k in (slot + 1)..self.subsystem_count() {
            s *= self.subsystem_dim(k).unwrap();
        }
        Ok(s)
    }

    /// Decompose a global basis index into per-subsystem digits.
    pub fn digits(&self, index: usize) -> Vec<usize> {
        let n = self.subsystem_count();
        let mut out = Vec::with_capacity(n);
        let mut rem = index;
        for slot in 0..n {
            let stride = self.stride(slot).unwrap();
            out.push(rem / stride);
            rem %= stride;
        }
        out
    }

    /// Compose a global basis index from per-subsystem digits.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.subsystem_count());
        let mut idx = 0usize;
        for (slot, &d) in digits.iter().enumerate() {
            idx += d * self.stride(slot).unwrap();
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_strides() {
        let l = HilbertLayout::new(2, [5]).unwrap();
        assert_eq!(l.total_dim(), 20);
        assert_eq!(l.subsystem_count(), 3);
        assert_eq!(l.subsystem_dim(0).unwrap(), 2);
        assert_eq!(l.subsystem_dim(2).unwrap(), 5);
        // qubit 0 most significant
        assert_eq!(l.stride(0).unwrap(), 10);
        assert_eq!(l.stride(1).unwrap(), 5);
        assert_eq!(l.stride(2).unwrap(), 1);
    }

    #[test]
    fn digit_round_trip() {
        let l = HilbertLayout::new(1, [3, 4]).unwrap();
        for idx in 0..l.total_dim() {
            let d = l.digits(idx);
            assert_eq!(l.index_of(&d), idx);
        }
    }

    #[test]
    fn rejects_tiny_fock() {
        assert!(matches!(
            HilbertLayout::new(0, [1]),
            Err(Error::InvalidDimension { dim: 1 })
        ));
    }
}
