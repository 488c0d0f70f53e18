//! WebSocket message types. Every message is one JSON object with a `type`
//! field; timestamps are integer ms since session start.

use haptikit_core::controller::Condition;
use haptikit_core::harness::Task;
use haptikit_core::stats::QuestionnaireKind;
use serde::{Deserialize, Serialize};

/// Bit 0 of `buttons`: the start key.
pub const START_KEY: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deflection {
    pub value: f64,
    /// "mm" of trigger travel (handheld) or "rad" (knob).
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMessage {
    pub t_ms: u64,
    pub deflection: Deflection,
    pub buttons: u8,
}

impl SampleMessage {
    pub fn new(t_ms: u64, value: f64, condition: Condition, key: bool) -> Self {
        Self {
            t_ms,
            deflection: Deflection {
                value,
                unit: condition.deflection_unit().to_string(),
            },
            buttons: if key { START_KEY } else { 0 },
        }
    }

    pub fn key(&self) -> bool {
        self.buttons & START_KEY != 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ControlMessage {
    /// Begins the next block of trials.
    StartTrial,
    /// Ends the current trial as incomplete.
    Abort,
    QuestionnaireSubmit { kind: QuestionnaireKind, items: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Waiting for `start_trial`.
    Ready,
    /// Trial open, waiting for the start key.
    Idle,
    Moving,
    Dwell,
    Tracking,
    InterTrial,
    Questionnaire,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum View {
    Target {
        /// px
        center: f64,
        /// px
        width: f64,
        /// 0–1
        dwell_progress: f64,
    },
    Tracking {
        /// px
        ref_px: f64,
    },
    Questionnaire {
        questionnaire: QuestionnaireKind,
        task: Task,
        condition: Condition,
    },
    Blank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayMessage {
    pub t_ms: u64,
    pub cursor_px: f64,
    pub view: View,
    pub trial_id: Option<u64>,
    pub phase: Phase,
    /// Set on the frame that answers a rejected control message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

/// UI to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Sample(SampleMessage),
    Control(ControlMessage),
}

/// Server to UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Display(DisplayMessage),
}
