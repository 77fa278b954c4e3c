use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding concurrent work.
pub struct Semaphore {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(limit: usize) -> Self {
        Self {
            count: Mutex::new(0),
            freed: Condvar::new(),
            limit: limit.max(1),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.count.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}
