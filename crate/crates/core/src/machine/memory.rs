use std::collections::BTreeMap;

use crate::syntax::*;

/// Global machine state shared by both languages: heap, register file and
/// stack, plus the counter behind fresh heap labels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    pub heap: BTreeMap<Name, HeapValue>,
    pub regs: BTreeMap<Reg, Word>,
    /// Stack words, top at the end.
    stack: Vec<Word>,
    next_label: u64,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Allocate `h` under a label derived from `base` that is not yet in use.
    pub fn alloc(&mut self, base: &str, h: HeapValue) -> Name {
        let label = self.fresh_label(base);
        self.heap.insert(label.clone(), h);
        label
    }

    pub fn fresh_label(&mut self, base: &str) -> Name {
        let stem = base.split('#').next().unwrap_or(base);
        loop {
            let l = format!("{stem}#{}", self.next_label);
            self.next_label += 1;
            if !self.heap.contains_key(&l) {
                return l;
            }
        }
    }

    pub fn reg(&self, r: Reg) -> Option<&Word> {
        self.regs.get(&r)
    }

    pub fn set_reg(&mut self, r: Reg, w: Word) {
        self.regs.insert(r, w);
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    /// Slot `i`, counting from the top.
    pub fn slot(&self, i: usize) -> Option<&Word> {
        self.stack.len().checked_sub(i + 1).map(|j| &self.stack[j])
    }

    pub fn set_slot(&mut self, i: usize, w: Word) -> bool {
        match self.stack.len().checked_sub(i + 1) {
            Some(j) => {
                self.stack[j] = w;
                true
            }
            None => false,
        }
    }

    pub fn push(&mut self, w: Word) {
        self.stack.push(w);
    }

    pub fn pop(&mut self) -> Option<Word> {
        self.stack.pop()
    }

    /// Stack words listed from the top.
    pub fn stack_words(&self) -> impl Iterator<Item = &Word> {
        self.stack.iter().rev()
    }

    pub fn heap_value(&self, l: &str) -> Option<&HeapValue> {
        self.heap.get(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_count_from_the_top() {
        let mut m = Memory::new();
        m.push(Word::int(1));
        m.push(Word::int(2));
        assert_eq!(m.slot(0), Some(&Word::int(2)));
        assert_eq!(m.slot(1), Some(&Word::int(1)));
        assert_eq!(m.slot(2), None);
        assert!(m.set_slot(1, Word::Unit));
        assert!(!m.set_slot(5, Word::Unit));
        assert_eq!(m.stack_words().cloned().collect::<Vec<_>>(), vec![Word::int(2), Word::Unit]);
    }

    #[test]
    fn fresh_labels_keep_the_stem() {
        let mut m = Memory::new();
        let a = m.alloc("l", HeapValue::Tuple(Mutability::Box, vec![]));
        let b = m.fresh_label("l#0");
        assert_eq!(a, "l#0");
        assert_eq!(b, "l#1");
    }
}
