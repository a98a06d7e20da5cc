//! Slot-filling conversation engine.
//!
//! Each session walks a small state machine: a greeting leads to the menu,
//! the menu routes by keyword to an intent, and the intent's slots are asked
//! for one question per turn in a fixed order. Mutating intents are
//! confirmed before [`DialogSession::fulfill`] runs them against the store.

use std::fmt;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::ingest::ClockTime;
use crate::predictor::Prediction;
use crate::store::{
    EventLog, FlightCriteria, FlightStore, NewFlight, PredictionEvent, RequestSummary, UserFlight,
};
use crate::{Error, Result, DELAY_THRESHOLD_MINUTES};

pub const MENU_OPTIONS: [&str; 4] = [
    "List existing flights",
    "Check a flight from the existing list",
    "Add or remove flights from the list",
    "Get flight delay information",
];

pub const GREETING: &str = "Hi, welcome to FlightStat!";
pub const CLOSING: &str = "Thanks for using FlightStat.";
pub const FAREWELL: &str = "Goodbye, and have a safe flight!";
const MENU_QUESTION: &str = "What would you like to do?";
const CHECK_QUESTION: &str =
    "Would you like to check your next flight, a flight by its origin city, or a flight by date and time?";
const RETRY: &str = "Sorry, I didn't catch that.";

/// Consecutive unparseable answers before the session falls back to the menu.
pub const REPROMPT_LIMIT: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Origin,
    Destination,
    Airline,
    Date,
    Time,
}

impl Slot {
    pub const ORDER: [Slot; 5] = [
        Slot::Origin,
        Slot::Destination,
        Slot::Airline,
        Slot::Date,
        Slot::Time,
    ];

    pub fn prompt(self) -> &'static str {
        match self {
            Slot::Origin => "Where are you flying from?",
            Slot::Destination => "Where are you flying to?",
            Slot::Airline => "What airline?",
            Slot::Date => "When are you flying?",
            Slot::Time => "What time is your flight?",
        }
    }
}

/// The five slot questions in asking order.
pub const SLOT_PROMPTS: [&str; 5] = [
    "Where are you flying from?",
    "Where are you flying to?",
    "What airline?",
    "When are you flying?",
    "What time is your flight?",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckVariant {
    Next,
    ByOrigin,
    ByDatetime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "variant")]
pub enum Intent {
    ListFlights,
    AddFlight,
    RemoveFlight,
    /// The variant is unknown until the user picks one.
    CheckFlight(Option<CheckVariant>),
    GetDelay,
}

impl Intent {
    /// Slots this intent needs, in asking order.
    pub fn required_slots(self) -> &'static [Slot] {
        match self {
            Intent::ListFlights
            | Intent::CheckFlight(None)
            | Intent::CheckFlight(Some(CheckVariant::Next)) => &[],
            Intent::AddFlight | Intent::RemoveFlight | Intent::GetDelay => &Slot::ORDER,
            Intent::CheckFlight(Some(CheckVariant::ByOrigin)) => &[Slot::Origin],
            Intent::CheckFlight(Some(CheckVariant::ByDatetime)) => &[Slot::Date, Slot::Time],
        }
    }

    fn needs_confirmation(self) -> bool {
        matches!(self, Intent::AddFlight | Intent::RemoveFlight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum DialogState {
    Greeting,
    Menu,
    ChoosingCheck,
    Collecting {
        next_slot: Slot,
    },
    /// `ready` is set once the intent may be fulfilled.
    Confirming {
        ready: bool,
    },
    Closed,
}

impl DialogState {
    pub fn name(&self) -> &'static str {
        match self {
            DialogState::Greeting => "greeting",
            DialogState::Menu => "menu",
            DialogState::ChoosingCheck => "choosing_check",
            DialogState::Collecting { .. } => "collecting",
            DialogState::Confirming { .. } => "confirming",
            DialogState::Closed => "closed",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slots {
    pub origin: Option<String>,
    pub destination: Option<String>,
    pub airline: Option<String>,
    pub date: Option<NaiveDate>,
    #[serde(with = "optional_colon_time")]
    pub time: Option<ClockTime>,
}

impl Slots {
    pub fn is_filled(&self, slot: Slot) -> bool {
        match slot {
            Slot::Origin => self.origin.is_some(),
            Slot::Destination => self.destination.is_some(),
            Slot::Airline => self.airline.is_some(),
            Slot::Date => self.date.is_some(),
            Slot::Time => self.time.is_some(),
        }
    }
}

/// A fully specified flight, as handed to the prediction function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlightRequest {
    pub origin: String,
    pub destination: String,
    pub airline: String,
    pub date: NaiveDate,
    pub time: ClockTime,
}

impl FlightRequest {
    fn from_slots(s: &Slots) -> Option<Self> {
        Some(FlightRequest {
            origin: s.origin.clone()?,
            destination: s.destination.clone()?,
            airline: s.airline.clone()?,
            date: s.date?,
            time: s.time?,
        })
    }

    fn from_flight(f: &UserFlight) -> Self {
        FlightRequest {
            origin: f.origin.clone(),
            destination: f.destination.clone(),
            airline: f.airline.clone(),
            date: f.date,
            time: f.time,
        }
    }

    pub fn summary(&self) -> RequestSummary {
        RequestSummary {
            origin: self.origin.clone(),
            destination: self.destination.clone(),
            airline: self.airline.clone(),
            date: self.date.to_string(),
            time: self.time.to_colon_string(),
        }
    }

    fn describe(&self) -> String {
        format!(
            "from {} to {} with {} on {} at {}",
            self.origin,
            self.destination,
            self.airline,
            self.date,
            self.time.to_colon_string()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub speaker: Speaker,
    pub text: String,
}

/// What a raw utterance yields before the session's context is applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Utterance {
    pub raw: String,
    pub intent: Option<Intent>,
    pub date: Option<NaiveDate>,
    pub time: Option<ClockTime>,
}

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == ':' || c == '-'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Keyword table, first match wins.
const INTENT_KEYWORDS: [(&[&str], Intent); 5] = [
    (&["add", "adding"], Intent::AddFlight),
    (
        &["remove", "removing", "delete", "deleting"],
        Intent::RemoveFlight,
    ),
    (&["list", "show"], Intent::ListFlights),
    (&["check", "status"], Intent::CheckFlight(None)),
    (&["delay", "delays", "delayed"], Intent::GetDelay),
];

const CLOSE_WORDS: [&str; 4] = ["bye", "goodbye", "quit", "exit"];
const CANCEL_WORDS: [&str; 2] = ["cancel", "stop"];
const YES_WORDS: [&str; 7] = ["yes", "yeah", "yep", "sure", "correct", "ok", "okay"];
const NO_WORDS: [&str; 3] = ["no", "nope", "nah"];

pub fn parse_intent(text: &str) -> Option<Intent> {
    let w = words(text);
    INTENT_KEYWORDS
        .iter()
        .find(|(keys, _)| keys.iter().any(|k| w.iter().any(|t| t == k)))
        .map(|(_, intent)| *intent)
}

fn has_any(text: &str, keys: &[&str]) -> bool {
    words(text).iter().any(|w| keys.contains(&w.as_str()))
}

/// ISO dates plus "today" and "tomorrow".
pub fn parse_date(text: &str, today: NaiveDate) -> Option<NaiveDate> {
    let w = words(text);
    if w.iter().any(|t| t == "today") {
        return Some(today);
    }
    if w.iter().any(|t| t == "tomorrow") {
        return Some(today + Duration::days(1));
    }
    w.iter()
        .find_map(|t| NaiveDate::parse_from_str(t, "%Y-%m-%d").ok())
}

/// `HH:MM` (24 hour) and `N am` / `N:MM pm`, with or without the space.
pub fn parse_time(text: &str) -> Option<ClockTime> {
    let w = words(text);
    for (i, t) in w.iter().enumerate() {
        let (num, suffix) = match t.strip_suffix("am").or_else(|| t.strip_suffix("pm")) {
            Some(n) if !n.is_empty() => (n, Some(&t[t.len() - 2..])),
            _ => match w.get(i + 1).map(String::as_str) {
                Some(s @ ("am" | "pm")) => (t.as_str(), Some(s)),
                _ => (t.as_str(), None),
            },
        };
        let (h, m) = match num.split_once(':') {
            Some((h, m)) if m.len() == 2 => (h.parse::<u32>().ok(), m.parse::<u32>().ok()),
            Some(_) => continue,
            None if suffix.is_some() => (num.parse::<u32>().ok(), Some(0)),
            None => continue,
        };
        let (Some(mut h), Some(m)) = (h, m) else {
            continue;
        };
        if let Some(s) = suffix {
            if !(1..=12).contains(&h) {
                continue;
            }
            h = match (s, h) {
                ("am", 12) => 0,
                ("pm", 12) => 12,
                ("pm", h) => h + 12,
                (_, h) => h,
            };
        }
        if let Ok(t) = ClockTime::from_hm(h, m) {
            return Some(t);
        }
    }
    None
}

const FILLER: [&str; 16] = [
    "please", "thanks", "thank", "you", "um", "uh", "i'm", "im", "i", "am", "flying", "from", "to",
    "with", "it's", "its",
];

/// The utterance with filler words removed, as typed otherwise.
pub fn text_slot_value(text: &str) -> Option<String> {
    let kept: Vec<&str> = text
        .split_whitespace()
        .filter(|w| {
            let bare = w
                .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                .to_lowercase();
            !bare.is_empty() && !FILLER.contains(&bare.as_str())
        })
        .map(|w| w.trim_matches(|c: char| matches!(c, ',' | '.' | '!' | '?')))
        .filter(|w| !w.is_empty())
        .collect();
    (!kept.is_empty()).then(|| kept.join(" "))
}

impl Utterance {
    /// Never fails; anything unrecognized is simply absent.
    pub fn parse(text: &str, today: NaiveDate) -> Self {
        Utterance {
            raw: text.to_string(),
            intent: parse_intent(text),
            date: parse_date(text, today),
            time: parse_time(text),
        }
    }
}

/// Maps a reply onto a check variant. "from X" also yields the origin.
pub fn resolve_check_variant(text: &str) -> Option<(CheckVariant, Option<String>)> {
    let w = words(text);
    if w.iter().any(|t| t == "next" || t == "upcoming") {
        return Some((CheckVariant::Next, None));
    }
    if w.iter().any(|t| t == "from") {
        let rest: Vec<&str> = text
            .split_whitespace()
            .skip_while(|t| !t.eq_ignore_ascii_case("from"))
            .skip(1)
            .filter(|t| {
                !matches!(
                    t.to_lowercase()
                        .trim_matches(|c: char| !c.is_alphanumeric()),
                    "one" | "flight" | "please"
                )
            })
            .collect();
        let origin = text_slot_value(&rest.join(" "));
        return Some((CheckVariant::ByOrigin, origin));
    }
    if w.iter().any(|t| t == "origin" || t == "city") {
        return Some((CheckVariant::ByOrigin, None));
    }
    if w.iter()
        .any(|t| matches!(t.as_str(), "date" | "time" | "when" | "today" | "tomorrow"))
        || parse_time(text).is_some()
        || parse_date(text, NaiveDate::MIN).is_some()
    {
        return Some((CheckVariant::ByDatetime, None));
    }
    None
}

/// Result of one user turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnReply {
    pub text: String,
    /// The intent is complete and [`DialogSession::fulfill`] should run.
    pub ready: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fulfillment {
    pub text: String,
    pub event: Option<PredictionEvent>,
    /// Set when the store or predictor failed; the session stays usable.
    pub error: Option<String>,
}

/// Store and prediction access for [`DialogSession::fulfill`].
pub struct DialogContext<'a> {
    pub flights: &'a FlightStore,
    pub events: Option<&'a EventLog>,
    pub predict: &'a dyn Fn(&FlightRequest) -> Result<Prediction>,
    /// "Now" for next-flight lookups.
    pub now: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogSession {
    pub id: String,
    pub state: DialogState,
    pub intent: Option<Intent>,
    pub slots: Slots,
    pub transcript: Vec<TranscriptTurn>,
    /// Reference date for "today" and "tomorrow".
    pub today: NaiveDate,
    failures: u32,
}

fn menu_text() -> String {
    let mut text = String::from("You can:\n");
    for (i, option) in MENU_OPTIONS.iter().enumerate() {
        text.push_str(&format!("{}. {}\n", i + 1, option));
    }
    text.push_str(MENU_QUESTION);
    text
}

impl DialogSession {
    /// A new session in the menu state, with the greeting as its first turn.
    pub fn start(id: impl Into<String>, today: NaiveDate) -> (Self, String) {
        let mut session = DialogSession {
            id: id.into(),
            state: DialogState::Greeting,
            intent: None,
            slots: Slots::default(),
            transcript: Vec::new(),
            today,
            failures: 0,
        };
        let text = format!("{GREETING} {}", menu_text());
        session.state = DialogState::Menu;
        session.say(&text);
        (session, text)
    }

    pub fn is_closed(&self) -> bool {
        self.state == DialogState::Closed
    }

    /// The slot that will be asked next, if the session is collecting.
    pub fn next_slot(&self) -> Option<Slot> {
        let intent = self.intent?;
        intent
            .required_slots()
            .iter()
            .copied()
            .find(|s| !self.slots.is_filled(*s))
    }

    fn say(&mut self, text: &str) {
        self.transcript.push(TranscriptTurn {
            speaker: Speaker::System,
            text: text.to_string(),
        });
    }

    fn back_to_menu(&mut self, lead: &str) -> TurnReply {
        self.state = DialogState::Menu;
        self.intent = None;
        self.slots = Slots::default();
        self.failures = 0;
        let text = if lead.is_empty() {
            menu_text()
        } else {
            format!("{lead} {}", menu_text())
        };
        TurnReply { text, ready: false }
    }

    /// Moves to the first unfilled slot, or to confirmation when none is left.
    fn advance(&mut self) -> TurnReply {
        let intent = self.intent.expect("advance needs an intent");
        if let Some(slot) = self.next_slot() {
            self.state = DialogState::Collecting { next_slot: slot };
            return TurnReply {
                text: slot.prompt().to_string(),
                ready: false,
            };
        }
        if intent.needs_confirmation() {
            let request = FlightRequest::from_slots(&self.slots).expect("all slots filled");
            let verb = if intent == Intent::AddFlight {
                "add"
            } else {
                "remove"
            };
            self.state = DialogState::Confirming { ready: false };
            TurnReply {
                text: format!("Your flight is {}. Shall I {verb} it?", request.describe()),
                ready: false,
            }
        } else {
            self.state = DialogState::Confirming { ready: true };
            TurnReply {
                text: "One moment.".into(),
                ready: true,
            }
        }
    }

    fn failed(&mut self, again: &str) -> TurnReply {
        self.failures += 1;
        if self.failures >= REPROMPT_LIMIT {
            return self.back_to_menu("Let's start over.");
        }
        TurnReply {
            text: format!("{RETRY} {again}"),
            ready: false,
        }
    }

    fn fill(&mut self, slot: Slot, text: &str) -> bool {
        match slot {
            Slot::Origin => self.slots.origin = text_slot_value(text),
            Slot::Destination => self.slots.destination = text_slot_value(text),
            Slot::Airline => self.slots.airline = text_slot_value(text),
            Slot::Date => self.slots.date = parse_date(text, self.today),
            Slot::Time => self.slots.time = parse_time(text),
        }
        self.slots.is_filled(slot)
    }

    fn choose_check(&mut self, text: &str) -> Option<TurnReply> {
        let (variant, origin) = resolve_check_variant(text)?;
        self.intent = Some(Intent::CheckFlight(Some(variant)));
        self.failures = 0;
        if let Some(o) = origin {
            self.slots.origin = Some(o);
        }
        Some(self.advance())
    }

    /// Applies one user utterance. Deterministic given the session state.
    pub fn handle_utterance(&mut self, text: &str) -> Result<TurnReply> {
        if self.is_closed() {
            return Err(Error::SessionClosed);
        }
        self.transcript.push(TranscriptTurn {
            speaker: Speaker::User,
            text: text.to_string(),
        });
        let reply = self.transition(text);
        self.say(&reply.text);
        Ok(reply)
    }

    fn transition(&mut self, text: &str) -> TurnReply {
        if has_any(text, &CLOSE_WORDS) {
            self.state = DialogState::Closed;
            self.intent = None;
            return TurnReply {
                text: format!("{CLOSING} {FAREWELL}"),
                ready: false,
            };
        }
        match self.state {
            DialogState::Greeting | DialogState::Menu | DialogState::Closed => {
                match parse_intent(text) {
                    None => TurnReply {
                        text: format!("{RETRY} {}", menu_text()),
                        ready: false,
                    },
                    Some(Intent::CheckFlight(_)) => {
                        self.intent = Some(Intent::CheckFlight(None));
                        self.slots = Slots::default();
                        self.failures = 0;
                        self.choose_check(text).unwrap_or_else(|| {
                            self.state = DialogState::ChoosingCheck;
                            TurnReply {
                                text: CHECK_QUESTION.into(),
                                ready: false,
                            }
                        })
                    }
                    Some(intent) => {
                        self.intent = Some(intent);
                        self.slots = Slots::default();
                        self.failures = 0;
                        self.advance()
                    }
                }
            }
            _ if has_any(text, &CANCEL_WORDS) => self.back_to_menu("Okay, cancelled."),
            DialogState::ChoosingCheck => self
                .choose_check(text)
                .unwrap_or_else(|| self.failed(CHECK_QUESTION)),
            DialogState::Collecting { next_slot } => {
                if self.fill(next_slot, text) {
                    self.failures = 0;
                    self.advance()
                } else {
                    self.failed(next_slot.prompt())
                }
            }
            DialogState::Confirming { ready: true } => TurnReply {
                text: "One moment.".into(),
                ready: true,
            },
            DialogState::Confirming { ready: false } => {
                if has_any(text, &YES_WORDS) {
                    self.state = DialogState::Confirming { ready: true };
                    TurnReply {
                        text: "Okay.".into(),
                        ready: true,
                    }
                } else if has_any(text, &NO_WORDS) {
                    self.back_to_menu("Okay, I won't change anything.")
                } else {
                    let verb = if self.intent == Some(Intent::AddFlight) {
                        "add"
                    } else {
                        "remove"
                    };
                    self.failed(&format!("Shall I {verb} it?"))
                }
            }
        }
    }

    /// Runs a ready intent against the store (and the predictor for delay
    /// questions), then returns to the menu.
    pub fn fulfill(&mut self, ctx: &DialogContext<'_>) -> Result<Fulfillment> {
        if self.is_closed() {
            return Err(Error::SessionClosed);
        }
        if self.state != (DialogState::Confirming { ready: true }) {
            return Err(Error::arg(format!(
                "session is {}, not ready to fulfill",
                self.state.name()
            )));
        }
        let intent = self.intent.expect("ready session has an intent");
        let outcome = self.execute(intent, ctx);
        let (lead, event, error) = match outcome {
            Ok((lead, event)) => (lead, event, None),
            Err(e) => (
                format!("Sorry, I couldn't complete that: {e}."),
                None,
                Some(e.to_string()),
            ),
        };
        let reply = self.back_to_menu(&format!("{lead} {CLOSING}"));
        // the closing replaces the reply to the confirming turn
        if let Some(last) = self.transcript.last_mut() {
            if last.speaker == Speaker::System
                && matches!(last.text.as_str(), "Okay." | "One moment.")
            {
                self.transcript.pop();
            }
        }
        self.say(&reply.text);
        Ok(Fulfillment {
            text: reply.text,
            event,
            error,
        })
    }

    fn predict(
        &self,
        request: &FlightRequest,
        ctx: &DialogContext<'_>,
    ) -> Result<(String, Option<PredictionEvent>)> {
        let prediction = (ctx.predict)(request)?;
        let event = match ctx.events {
            Some(log) => Some(log.append(request.summary(), &prediction)?),
            None => None,
        };
        Ok((
            format!(
                "Your flight {} {}.",
                request.describe(),
                phrase_delay(prediction.minutes)
            ),
            event,
        ))
    }

    fn execute(
        &self,
        intent: Intent,
        ctx: &DialogContext<'_>,
    ) -> Result<(String, Option<PredictionEvent>)> {
        match intent {
            Intent::ListFlights => {
                let flights = ctx.flights.list();
                if flights.is_empty() {
                    return Ok(("You have no flights on your list.".into(), None));
                }
                let lines: Vec<String> = flights
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        format!("{}. {}", i + 1, FlightRequest::from_flight(f).describe())
                    })
                    .collect();
                Ok((format!("Your flights:\n{}\n", lines.join("\n")), None))
            }
            Intent::AddFlight => {
                let r = FlightRequest::from_slots(&self.slots).expect("slots filled");
                ctx.flights.add(NewFlight {
                    origin: r.origin.clone(),
                    destination: r.destination.clone(),
                    airline: r.airline.clone(),
                    date: r.date,
                    time: r.time,
                })?;
                Ok((format!("I added your flight {}.", r.describe()), None))
            }
            Intent::RemoveFlight => {
                let r = FlightRequest::from_slots(&self.slots).expect("slots filled");
                let found = ctx.flights.list().into_iter().find(|f| {
                    f.origin.eq_ignore_ascii_case(&r.origin)
                        && f.destination.eq_ignore_ascii_case(&r.destination)
                        && f.airline.eq_ignore_ascii_case(&r.airline)
                        && f.date == r.date
                        && f.time == r.time
                });
                match found {
                    Some(f) => {
                        ctx.flights.remove(&f.id)?;
                        Ok((format!("I removed your flight {}.", r.describe()), None))
                    }
                    None => Ok(("I couldn't find that flight on your list.".into(), None)),
                }
            }
            Intent::GetDelay => {
                let r = FlightRequest::from_slots(&self.slots).expect("slots filled");
                self.predict(&r, ctx)
            }
            Intent::CheckFlight(variant) => {
                if ctx.flights.list().is_empty() {
                    return Ok(("You have no flights on your list.".into(), None));
                }
                let criteria = match variant {
                    Some(CheckVariant::Next) | None => FlightCriteria {
                        next_after: Some(ctx.now),
                        ..FlightCriteria::default()
                    },
                    Some(CheckVariant::ByOrigin) => FlightCriteria {
                        origin: self.slots.origin.clone(),
                        ..FlightCriteria::default()
                    },
                    Some(CheckVariant::ByDatetime) => FlightCriteria {
                        date: self.slots.date,
                        time: self.slots.time,
                        ..FlightCriteria::default()
                    },
                };
                match ctx.flights.find(&criteria).first() {
                    Some(f) => self.predict(&FlightRequest::from_flight(f), ctx),
                    None if variant == Some(CheckVariant::Next) => {
                        Ok(("You have no upcoming flights on your list.".into(), None))
                    }
                    None => Ok((
                        "I couldn't find a matching flight on your list.".into(),
                        None,
                    )),
                }
            }
        }
    }

    /// Handles an utterance and, when the intent becomes ready, fulfills it
    /// in the same turn. Returns the system text shown to the user.
    pub fn respond(
        &mut self,
        text: &str,
        ctx: &DialogContext<'_>,
    ) -> Result<(String, Option<Fulfillment>)> {
        let reply = self.handle_utterance(text)?;
        if reply.ready {
            let done = self.fulfill(ctx)?;
            return Ok((done.text.clone(), Some(done)));
        }
        Ok((reply.text, None))
    }
}

/// "delayed about N minutes" past the threshold, "on time" otherwise.
pub fn phrase_delay(minutes: f64) -> String {
    if minutes > DELAY_THRESHOLD_MINUTES {
        format!(
            "is likely to be delayed about {} minutes",
            minutes.round() as i64
        )
    } else {
        "is expected to be on time".to_string()
    }
}

/// Number of slot questions in a system text.
pub fn count_slot_prompts(text: &str) -> usize {
    SLOT_PROMPTS.iter().map(|p| text.matches(p).count()).sum()
}

impl fmt::Display for DialogState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

mod optional_colon_time {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::ingest::ClockTime;

    pub fn serialize<S: Serializer>(t: &Option<ClockTime>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_some(&t.to_colon_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ClockTime>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| t.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{ModelKind, Provenance};
    use proptest::prelude::*;

    fn today() -> NaiveDate {
        NaiveDate::from_ymd_opt(2026, 10, 16).unwrap()
    }

    fn fixed_prediction(minutes: f64) -> impl Fn(&FlightRequest) -> Result<Prediction> {
        move |_| {
            Ok(Prediction {
                model: ModelKind::Mlp,
                minutes,
                delayed: minutes > 15.0,
                provenance: Provenance::default(),
            })
        }
    }

    struct Fixture {
        _dir: tempfile::TempDir,
        flights: FlightStore,
        events: EventLog,
    }

    fn fixture() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        Fixture {
            flights: FlightStore::open(dir.path().join("flights.json")).unwrap(),
            events: EventLog::open(dir.path().join("events.ndjson")).unwrap(),
            _dir: dir,
        }
    }

    fn ctx<'a>(
        f: &'a Fixture,
        predict: &'a dyn Fn(&FlightRequest) -> Result<Prediction>,
    ) -> DialogContext<'a> {
        DialogContext {
            flights: &f.flights,
            events: Some(&f.events),
            predict,
            now: today().and_hms_opt(9, 0, 0).unwrap(),
        }
    }

    const ADD_SCRIPT: [&str; 7] = [
        "add a flight",
        "Boston",
        "Seattle",
        "Delta",
        "2026-11-02",
        "8:15 am",
        "yes",
    ];

    #[test]
    fn start_greets_with_four_options() {
        let (s, text) = DialogSession::start("a", today());
        assert!(text.starts_with(GREETING));
        let options = text
            .lines()
            .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
            .count();
        assert_eq!(options, 4);
        for o in MENU_OPTIONS {
            assert!(text.contains(o));
        }
        assert_eq!(s.transcript.len(), 1);
        assert_eq!(s.state, DialogState::Menu);
        let (other, _) = DialogSession::start("b", today());
        assert_ne!(s.id, other.id);
    }

    #[test]
    fn add_flight_asks_slots_in_order() {
        let (mut s, _) = DialogSession::start("a", today());
        let r = s.handle_utterance("add a flight").unwrap();
        assert_eq!(r.text, "Where are you flying from?");
        assert_eq!(
            s.state,
            DialogState::Collecting {
                next_slot: Slot::Origin
            }
        );
        let r = s.handle_utterance("Boston").unwrap();
        assert_eq!(s.slots.origin.as_deref(), Some("Boston"));
        assert_eq!(r.text, "Where are you flying to?");
    }

    #[test]
    fn gibberish_in_menu_reprompts() {
        let (mut s, _) = DialogSession::start("a", today());
        let before = s.state;
        let r = s.handle_utterance("blorp zzz").unwrap();
        assert_eq!(s.state, before);
        assert_eq!(
            r.text
                .lines()
                .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
                .count(),
            4
        );
    }

    #[test]
    fn cooperative_add_flight_takes_five_questions() {
        let f = fixture();
        let predict = fixed_prediction(0.0);
        let (mut s, _) = DialogSession::start("a", today());
        let mut asked = Vec::new();
        let mut last = String::new();
        for line in ADD_SCRIPT {
            let (text, _) = s.respond(line, &ctx(&f, &predict)).unwrap();
            asked.extend(SLOT_PROMPTS.iter().filter(|p| text.contains(**p)).copied());
            assert!(count_slot_prompts(&text) <= 1);
            last = text;
        }
        assert_eq!(asked, SLOT_PROMPTS);
        assert_eq!(s.state, DialogState::Menu);
        for part in ["Boston", "Seattle", "Delta", "2026-11-02", "08:15"] {
            assert!(last.contains(part), "{last}");
        }
        let stored = f.flights.list();
        assert_eq!(stored.len(), 1);
        assert_eq!(stored[0].time.hhmm(), 815);
        assert!(f.events.is_empty());
    }

    #[test]
    fn confirmation_summarizes_and_can_be_declined() {
        let f = fixture();
        let predict = fixed_prediction(0.0);
        let (mut s, _) = DialogSession::start("a", today());
        let mut text = String::new();
        for line in &ADD_SCRIPT[..6] {
            text = s.respond(line, &ctx(&f, &predict)).unwrap().0;
        }
        assert_eq!(s.state, DialogState::Confirming { ready: false });
        assert!(text.contains("Boston") && text.contains("Shall I add it?"));
        let (text, _) = s.respond("no", &ctx(&f, &predict)).unwrap();
        assert!(text.contains(MENU_OPTIONS[0]));
        assert!(f.flights.list().is_empty());
    }

    #[test]
    fn get_delay_reports_delay_and_logs() {
        let f = fixture();
        let predict = fixed_prediction(32.0);
        let (mut s, _) = DialogSession::start("a", today());
        let script = [
            "what's the delay",
            "from Chicago",
            "to Denver",
            "United",
            "tomorrow",
            "17:30",
        ];
        let mut out = None;
        for line in script {
            out = s.respond(line, &ctx(&f, &predict)).unwrap().1;
        }
        let done = out.expect("fulfilled on the last slot");
        assert!(
            done.text.contains("delayed about 32 minutes"),
            "{}",
            done.text
        );
        assert!(done.text.contains("2026-10-17"));
        assert_eq!(done.event.unwrap().seq, 1);
        assert_eq!(s.state, DialogState::Menu);
    }

    #[test]
    fn short_delay_is_on_time() {
        assert_eq!(phrase_delay(15.0), "is expected to be on time");
        assert!(phrase_delay(15.4).contains("delayed about 15 minutes"));
    }

    #[test]
    fn check_next_with_empty_list() {
        let f = fixture();
        let predict = fixed_prediction(40.0);
        let (mut s, _) = DialogSession::start("a", today());
        let (text, done) = s
            .respond("check my next flight", &ctx(&f, &predict))
            .unwrap();
        assert!(text.contains("no flights"), "{text}");
        assert!(done.unwrap().event.is_none());
        assert!(f.events.is_empty());
    }

    #[test]
    fn check_variants() {
        assert_eq!(
            resolve_check_variant("my next flight"),
            Some((CheckVariant::Next, None))
        );
        assert_eq!(
            resolve_check_variant("the one from Chicago"),
            Some((CheckVariant::ByOrigin, Some("Chicago".into())))
        );
        assert_eq!(
            resolve_check_variant("the 5pm one tomorrow"),
            Some((CheckVariant::ByDatetime, None))
        );
        assert_eq!(resolve_check_variant("hmm"), None);
    }

    #[test]
    fn check_by_datetime_asks_date_first() {
        let (mut s, _) = DialogSession::start("a", today());
        let r = s.handle_utterance("check a flight").unwrap();
        assert_eq!(r.text, CHECK_QUESTION);
        let r = s.handle_utterance("the 5pm one tomorrow").unwrap();
        assert_eq!(r.text, "When are you flying?");
        let r = s.handle_utterance("tomorrow").unwrap();
        assert_eq!(r.text, "What time is your flight?");
    }

    #[test]
    fn check_by_origin_finds_stored_flight() {
        let f = fixture();
        f.flights
            .add(NewFlight {
                origin: "Chicago".into(),
                destination: "Austin".into(),
                airline: "United".into(),
                date: today(),
                time: "18:00".parse().unwrap(),
            })
            .unwrap();
        let predict = fixed_prediction(5.0);
        let (mut s, _) = DialogSession::start("a", today());
        s.respond("check a flight", &ctx(&f, &predict)).unwrap();
        let (text, done) = s
            .respond("the one from chicago", &ctx(&f, &predict))
            .unwrap();
        assert!(
            text.contains("on time") && text.contains("Austin"),
            "{text}"
        );
        assert_eq!(done.unwrap().event.unwrap().request.origin, "Chicago");
    }

    #[test]
    fn list_and_remove() {
        let f = fixture();
        let predict = fixed_prediction(0.0);
        let (mut s, _) = DialogSession::start("a", today());
        for line in ADD_SCRIPT {
            s.respond(line, &ctx(&f, &predict)).unwrap();
        }
        let (text, _) = s.respond("list my flights", &ctx(&f, &predict)).unwrap();
        assert!(text.contains("1. from Boston to Seattle"), "{text}");
        let script = [
            "remove a flight",
            "boston",
            "seattle",
            "delta",
            "2026-11-02",
            "08:15",
            "yes",
        ];
        let mut text = String::new();
        for line in script {
            text = s.respond(line, &ctx(&f, &predict)).unwrap().0;
        }
        assert!(text.contains("I removed"), "{text}");
        assert!(f.flights.list().is_empty());
    }

    #[test]
    fn reprompt_limit_returns_to_menu() {
        let (mut s, _) = DialogSession::start("a", today());
        s.handle_utterance("get delay info").unwrap();
        s.handle_utterance("Boston").unwrap();
        s.handle_utterance("Denver").unwrap();
        s.handle_utterance("Alaska").unwrap();
        for i in 1..REPROMPT_LIMIT {
            let r = s.handle_utterance("someday").unwrap();
            assert_eq!(
                r.text,
                format!("{RETRY} When are you flying?"),
                "attempt {i}"
            );
        }
        let r = s.handle_utterance("someday").unwrap();
        assert_eq!(s.state, DialogState::Menu);
        assert!(r.text.contains(MENU_OPTIONS[3]));
    }

    #[test]
    fn closing_and_closed_errors() {
        let (mut s, _) = DialogSession::start("a", today());
        let r = s.handle_utterance("bye").unwrap();
        assert!(r.text.contains(FAREWELL));
        assert!(s.is_closed());
        assert!(matches!(
            s.handle_utterance("add"),
            Err(Error::SessionClosed)
        ));
    }

    #[test]
    fn time_and_date_parsing() {
        let t = |s: &str| parse_time(s).map(|t| t.hhmm());
        assert_eq!(t("5pm"), Some(1700));
        assert_eq!(t("5 pm"), Some(1700));
        assert_eq!(t("12 am"), Some(0));
        assert_eq!(t("12pm"), Some(1200));
        assert_eq!(t("at 7:45 pm please"), Some(1945));
        assert_eq!(t("17:30"), Some(1730));
        assert_eq!(t("13 pm"), None);
        assert_eq!(t("later"), None);
        assert_eq!(
            parse_date("2026-12-24", today()),
            NaiveDate::from_ymd_opt(2026, 12, 24)
        );
        assert_eq!(parse_date("today", today()), Some(today()));
        assert_eq!(parse_date("next week", today()), None);
    }

    #[test]
    fn text_slots_strip_filler() {
        assert_eq!(
            text_slot_value("I'm flying from Boston, please").as_deref(),
            Some("Boston")
        );
        assert_eq!(
            text_slot_value("San Francisco").as_deref(),
            Some("San Francisco")
        );
        assert_eq!(text_slot_value("um please"), None);
    }

    #[test]
    fn intent_table_first_match_wins() {
        assert_eq!(parse_intent("add or remove"), Some(Intent::AddFlight));
        assert_eq!(parse_intent("delete it"), Some(Intent::RemoveFlight));
        assert_eq!(
            parse_intent("check the delay"),
            Some(Intent::CheckFlight(None))
        );
        assert_eq!(parse_intent("address"), None);
        let u = Utterance::parse("add a flight tomorrow at 5pm", today());
        assert_eq!(u.intent, Some(Intent::AddFlight));
        assert_eq!(u.time.unwrap().hhmm(), 1700);
        assert!(u.date.is_some());
    }

    #[test]
    fn identical_scripts_give_identical_transcripts() {
        let run = || {
            let f = fixture();
            let predict = fixed_prediction(20.0);
            let (mut s, _) = DialogSession::start("a", today());
            for line in ADD_SCRIPT
                .iter()
                .chain(["check next", "list", "bye"].iter())
            {
                s.respond(line, &ctx(&f, &predict)).unwrap();
            }
            s.transcript
        };
        assert_eq!(run(), run());
    }

    const VOCAB: [&str; 24] = [
        "add a flight",
        "remove a flight",
        "list",
        "check a flight",
        "get delay",
        "Boston",
        "Chicago",
        "Delta",
        "United",
        "tomorrow",
        "2026-11-02",
        "today",
        "5pm",
        "08:15",
        "yes",
        "no",
        "my next flight",
        "the one from Denver",
        "by date and time",
        "asdf",
        "",
        "cancel",
        "please",
        "what?",
    ];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn one_question_per_turn_and_no_skipped_slot(
            script in proptest::collection::vec(0..VOCAB.len(), 1..30),
            bye_at in proptest::option::of(0usize..30),
        ) {
            let f = fixture();
            let predict = fixed_prediction(25.0);
            let (mut s, _) = DialogSession::start("p", today());
            for (i, &w) in script.iter().enumerate() {
                let line = if bye_at == Some(i) { "bye" } else { VOCAB[w] };
                let (text, _) = s.respond(line, &ctx(&f, &predict)).unwrap();
                prop_assert!(count_slot_prompts(&text) <= 1, "{text}");
                prop_assert!(text.matches('?').count() <= 1, "{text}");
                if let DialogState::Collecting { next_slot } = s.state {
                    let intent = s.intent.unwrap();
                    let required = intent.required_slots();
                    let pos = required.iter().position(|x| *x == next_slot).unwrap();
                    prop_assert!(required[..pos].iter().all(|x| s.slots.is_filled(*x)));
                    prop_assert!(!s.slots.is_filled(next_slot));
                    prop_assert_eq!(text.contains(next_slot.prompt()), true);
                }
                if s.is_closed() {
                    break;
                }
            }
        }
    }
}
