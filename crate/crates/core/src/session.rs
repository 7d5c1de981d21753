//! Per-session serialization in initiation order.
//!
//! Each session owns a ticket queue. A caller takes a ticket when a turn is
//! initiated and waits until that ticket is served, so turns on one session
//! run in the order they were started even when they execute on different
//! threads. Distinct sessions never contend.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Condvar, Mutex};

use crate::types::SessionId;

#[derive(Debug, Default)]
struct QueueState {
    next: u64,
    serving: u64,
    abandoned: BTreeSet<u64>,
}

impl QueueState {
    fn advance(&mut self) {
        self.serving += 1;
        while self.abandoned.remove(&self.serving) {
            self.serving += 1;
        }
    }

    fn idle(&self) -> bool {
        self.serving == self.next
    }
}

#[derive(Debug, Default)]
struct Queue {
    state: Mutex<QueueState>,
    turn: Condvar,
}

type QueueMap = Mutex<HashMap<SessionId, Arc<Queue>>>;

#[derive(Debug, Clone, Default)]
pub struct SessionLocks {
    queues: Arc<QueueMap>,
}

impl SessionLocks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves the next slot for `session` without blocking.
    pub fn ticket(&self, session: &SessionId) -> Ticket {
        let mut map = self.queues.lock().unwrap();
        let queue = map.entry(session.clone()).or_default().clone();
        let number = {
            let mut state = queue.state.lock().unwrap();
            let n = state.next;
            state.next += 1;
            n
        };
        Ticket {
            slot: Some(Slot {
                queues: self.queues.clone(),
                session: session.clone(),
                queue,
                number,
            }),
        }
    }

    /// Blocks until `session` is free and holds it until the guard drops.
    pub fn lock(&self, session: &SessionId) -> SessionGuard {
        self.ticket(session).wait()
    }

    /// Sessions with a held or pending slot.
    pub fn active_sessions(&self) -> usize {
        self.queues.lock().unwrap().len()
    }
}

#[derive(Debug)]
struct Slot {
    queues: Arc<QueueMap>,
    session: SessionId,
    queue: Arc<Queue>,
    number: u64,
}

impl Slot {
    /// Gives the slot back, dropping the queue once nobody else holds a ticket.
    fn release(self, served: bool) {
        let mut map = self.queues.lock().unwrap();
        let mut state = self.queue.state.lock().unwrap();
        if served || state.serving == self.number {
            state.advance();
        } else {
            state.abandoned.insert(self.number);
        }
        if state.idle() {
            map.remove(&self.session);
        }
        drop(state);
        self.queue.turn.notify_all();
    }
}

/// A reserved position in a session's queue. Dropping it unredeemed gives
/// the position up without blocking.
#[derive(Debug)]
pub struct Ticket {
    slot: Option<Slot>,
}

impl Ticket {
    pub fn wait(mut self) -> SessionGuard {
        let slot = self.slot.take().expect("ticket redeemed once");
        {
            let mut state = slot.queue.state.lock().unwrap();
            while state.serving != slot.number {
                state = slot.queue.turn.wait(state).unwrap();
            }
        }
        SessionGuard { slot: Some(slot) }
    }
}

impl Drop for Ticket {
    fn drop(&mut self) {
        if let Some(slot) = self.slot.take() {
            slot.release(false);
        }
    }
}

/// Exclusive hold on one session.
#[derive(Debug)]
pub struct SessionGuard {
    slot: Option<Slot>,
}

impl Drop for SessionGuard {
    fn drop(&mut self) {
        if let Some(slot) = self.slot.take() {
            slot.release(true);
        }
    }
}
