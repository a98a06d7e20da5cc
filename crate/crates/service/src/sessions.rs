use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use flightstat::dialog::DialogSession;
use tokio::sync::{Mutex as TurnLock, OwnedMutexGuard};

pub const SESSION_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug)]
struct Entry {
    session: Arc<TurnLock<DialogSession>>,
    last_used: Instant,
}

#[derive(Debug)]
pub enum Checkout {
    Ready(OwnedMutexGuard<DialogSession>),
    /// Another turn for this session is still running.
    Busy,
    Missing,
}

/// In-memory dialog sessions with idle expiry. Each session admits one
/// turn at a time.
#[derive(Debug)]
pub struct SessionManager {
    entries: Mutex<HashMap<String, Entry>>,
    ttl: Duration,
}

impl SessionManager {
    pub fn new(ttl: Duration) -> Self {
        SessionManager {
            entries: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    pub fn insert(&self, session: DialogSession) {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        entries.retain(|_, e| now.duration_since(e.last_used) < self.ttl);
        entries.insert(
            session.id.clone(),
            Entry {
                session: Arc::new(TurnLock::new(session)),
                last_used: now,
            },
        );
    }

    /// Takes the session's turn lock without waiting.
    pub fn checkout(&self, id: &str) -> Checkout {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let Some(entry) = entries.get_mut(id) else {
            return Checkout::Missing;
        };
        if now.duration_since(entry.last_used) >= self.ttl {
            entries.remove(id);
            return Checkout::Missing;
        }
        match entry.session.clone().try_lock_owned() {
            Ok(guard) => {
                entry.last_used = now;
                Checkout::Ready(guard)
            }
            Err(_) => Checkout::Busy,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
