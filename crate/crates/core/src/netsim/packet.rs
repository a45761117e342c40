use crate::protocol::{AccessClass, Message};
use crate::{Micros, NodeId};

/// Fixed-size set of node ids.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NodeSet([u64; 4]);

impl NodeSet {
    pub fn single(node: NodeId) -> Self {
        let mut s = Self::default();
        s.insert(node);
        s
    }

    pub fn insert(&mut self, node: NodeId) {
        self.0[node.index() / 64] |= 1 << (node.index() % 64);
    }

    pub fn remove(&mut self, node: NodeId) {
        self.0[node.index() / 64] &= !(1 << (node.index() % 64));
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.0[node.index() / 64] & (1 << (node.index() % 64)) != 0
    }

    pub fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..=255u8).map(NodeId).filter(move |n| self.contains(*n))
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        let mut s = Self::default();
        for n in iter {
            s.insert(n);
        }
        s
    }
}

/// One fragment of a message on one hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub msg: Message,
    pub frag_index: u16,
    pub frag_count: u16,
    /// Header plus this fragment's payload bytes.
    pub wire_bytes: u32,
    pub class: AccessClass,
    /// WiMAX service flow the packet is mapped to.
    pub service_flow: u32,
    pub hop_src: NodeId,
    pub receivers: NodeSet,
    /// When the packet entered the current hop.
    pub hop_start: Micros,
}

impl Packet {
    pub fn is_last_fragment(&self) -> bool {
        self.frag_index + 1 == self.frag_count
    }
}
