use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// `sqrt(gamma0) sigma^-`.
    OffChipJump,
    /// `sqrt(gamma') sigma^+ sigma^-`.
    DephasingJump,
    /// `sqrt(gamma_L) sigma^-`; only present without feedback.
    LoopLossJump,
    /// Photon found in the output bin.
    OutputDetection,
}

impl EventKind {
    pub fn is_emitter_jump(self) -> bool {
        !matches!(self, EventKind::OutputDetection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    pub kind: EventKind,
}

/// Ordered log of stochastic events of one trajectory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    events: Vec<Event>,
}

impl EventRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an event; steps must be non-decreasing and each step holds at
    /// most one emitter jump and one detection.
    pub fn push(&mut self, step: u64, kind: EventKind) {
        if let Some(last) = self.events.last() {
            assert!(step >= last.step, "event steps must be non-decreasing");
            if step == last.step {
                let clash = self
                    .events
                    .iter()
                    .rev()
                    .take_while(|e| e.step == step)
                    .any(|e| {
                        e.kind == kind || (e.kind.is_emitter_jump() && kind.is_emitter_jump())
                    });
                assert!(!clash, "duplicate event class at step {step}");
            }
        }
        self.events.push(Event { step, kind });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Steps at which a photon left through the output bin.
    pub fn detection_steps(&self) -> impl Iterator<Item = u64> + '_ {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::OutputDetection)
            .map(|e| e.step)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}
