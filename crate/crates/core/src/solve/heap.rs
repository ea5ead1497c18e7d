/// Max-heap of variable indices ordered by an external activity table.
#[derive(Debug, Clone, Default)]
pub(crate) struct VarHeap {
    heap: Vec<u32>,
    // position of each variable in `heap`, or -1
    index: Vec<i32>,
}

impl VarHeap {
    pub fn grow(&mut self, num_vars: usize) {
        self.index.resize(num_vars, -1);
    }

    pub fn contains(&self, v: usize) -> bool {
        self.index[v] >= 0
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.index[v] = self.heap.len() as i32;
        self.heap.push(v as u32);
        self.sift_up(self.heap.len() - 1, act);
    }

    /// Restores order after `act[v]` increased.
    pub fn bumped(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            self.sift_up(self.index[v] as usize, act);
        }
    }

    pub fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()? as usize;
        let last = self.heap.pop().unwrap();
        self.index[top] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.index[last as usize] = 0;
            self.sift_down(0, act);
        }
        Some(top)
    }

    /// Rebuilds from scratch over `vars`.
    pub fn rebuild(&mut self, vars: impl Iterator<Item = usize>, act: &[f64]) {
        for &v in &self.heap {
            self.index[v as usize] = -1;
        }
        self.heap.clear();
        for v in vars {
            self.index[v] = self.heap.len() as i32;
            self.heap.push(v as u32);
        }
        for i in (0..self.heap.len() / 2).rev() {
            self.sift_down(i, act);
        }
    }

    // Ties are broken toward the lower variable index so the order is a
    // pure function of the activity table.
    fn above(a: u32, b: u32, act: &[f64]) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if !Self::above(v, p, act) {
                break;
            }
            self.heap[i] = p;
            self.index[p as usize] = i as i32;
            i = parent;
        }
        self.heap[i] = v;
        self.index[v as usize] = i as i32;
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n && Self::above(self.heap[right], self.heap[left], act) {
                right
            } else {
                left
            };
            let c = self.heap[child];
            if !Self::above(c, v, act) {
                break;
            }
            self.heap[i] = c;
            self.index[c as usize] = i as i32;
            i = child;
        }
        self.heap[i] = v;
        self.index[v as usize] = i as i32;
    }
}
