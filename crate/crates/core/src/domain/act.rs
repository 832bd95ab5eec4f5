use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of dialogue acts in the restaurant catalog.
pub const CATALOG_SIZE: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Food,
    Price,
    Area,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Food, Slot::Price, Slot::Area];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Food => "food",
            Slot::Price => "price",
            Slot::Area => "area",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn bit(self) -> u8 {
        1 << self.index()
    }
}

/// A subset of {food, price, area}; iteration is always in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SlotSet(u8);

impl SlotSet {
    pub const EMPTY: SlotSet = SlotSet(0);
    pub const FULL: SlotSet = SlotSet(0b111);

    /// The seven non-empty subsets in catalog order.
    pub const COMBINATIONS: [SlotSet; 7] = [
        SlotSet(0b001),
        SlotSet(0b010),
        SlotSet(0b100),
        SlotSet(0b011),
        SlotSet(0b101),
        SlotSet(0b110),
        SlotSet(0b111),
    ];

    pub fn single(slot: Slot) -> Self {
        SlotSet(slot.bit())
    }

    pub fn contains(self, slot: Slot) -> bool {
        self.0 & slot.bit() != 0
    }

    pub fn insert(&mut self, slot: Slot) {
        self.0 |= slot.bit();
    }

    pub fn remove(&mut self, slot: Slot) {
        self.0 &= !slot.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: SlotSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Slot> {
        Slot::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    fn combination_index(self) -> usize {
        Self::COMBINATIONS
            .iter()
            .position(|c| *c == self)
            .expect("non-empty slot set")
    }
}

impl FromIterator<Slot> for SlotSet {
    fn from_iter<T: IntoIterator<Item = Slot>>(iter: T) -> Self {
        let mut set = SlotSet::EMPTY;
        for s in iter {
            set.insert(s);
        }
        set
    }
}

impl Serialize for SlotSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActType {
    Salutation,
    Request,
    AskFor,
    Apology,
    ExpConfirm,
    ImpConfirm,
    Retrieve,
    Provide,
}

/// A system dialogue act. Slot arguments are kept in canonical
/// (food, price, area) order, so `Request(price,food)` and
/// `Request(food,price)` are the same act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DialogueAct {
    Greeting,
    RequestHmihy,
    Request(SlotSet),
    AskForMore,
    Apology(SlotSet),
    ExpConfirm(SlotSet),
    ImpConfirm(SlotSet),
    RetrieveInfo,
    ProvideUnknown,
    ProvideKnown,
    Closing,
}

const fn build_catalog() -> [DialogueAct; CATALOG_SIZE] {
    let mut acts = [DialogueAct::Greeting; CATALOG_SIZE];
    acts[1] = DialogueAct::RequestHmihy;
    let mut i = 0;
    while i < 7 {
        let set = SlotSet::COMBINATIONS[i];
        acts[2 + i] = DialogueAct::Request(set);
        acts[10 + i] = DialogueAct::Apology(set);
        acts[17 + i] = DialogueAct::ExpConfirm(set);
        acts[24 + i] = DialogueAct::ImpConfirm(set);
        i += 1;
    }
    acts[9] = DialogueAct::AskForMore;
    acts[31] = DialogueAct::RetrieveInfo;
    acts[32] = DialogueAct::ProvideUnknown;
    acts[33] = DialogueAct::ProvideKnown;
    acts[34] = DialogueAct::Closing;
    acts
}

/// The full action alphabet, indexed by action number.
pub static CATALOG: [DialogueAct; CATALOG_SIZE] = build_catalog();

impl DialogueAct {
    pub fn from_index(index: usize) -> Option<DialogueAct> {
        CATALOG.get(index).copied()
    }

    pub fn index(self) -> usize {
        match self {
            DialogueAct::Greeting => 0,
            DialogueAct::RequestHmihy => 1,
            DialogueAct::Request(s) => 2 + s.combination_index(),
            DialogueAct::AskForMore => 9,
            DialogueAct::Apology(s) => 10 + s.combination_index(),
            DialogueAct::ExpConfirm(s) => 17 + s.combination_index(),
            DialogueAct::ImpConfirm(s) => 24 + s.combination_index(),
            DialogueAct::RetrieveInfo => 31,
            DialogueAct::ProvideUnknown => 32,
            DialogueAct::ProvideKnown => 33,
            DialogueAct::Closing => 34,
        }
    }

    pub fn act_type(self) -> ActType {
        match self {
            DialogueAct::Greeting | DialogueAct::Closing => ActType::Salutation,
            DialogueAct::RequestHmihy | DialogueAct::Request(_) => ActType::Request,
            DialogueAct::AskForMore => ActType::AskFor,
            DialogueAct::Apology(_) => ActType::Apology,
            DialogueAct::ExpConfirm(_) => ActType::ExpConfirm,
            DialogueAct::ImpConfirm(_) => ActType::ImpConfirm,
            DialogueAct::RetrieveInfo => ActType::Retrieve,
            DialogueAct::ProvideUnknown | DialogueAct::ProvideKnown => ActType::Provide,
        }
    }

    /// Slots the act is about; empty for acts without slot arguments.
    pub fn slots(self) -> SlotSet {
        match self {
            DialogueAct::Request(s)
            | DialogueAct::Apology(s)
            | DialogueAct::ExpConfirm(s)
            | DialogueAct::ImpConfirm(s) => s,
            _ => SlotSet::EMPTY,
        }
    }

    /// Whether a human (or simulated) user is expected to answer this act.
    pub fn expects_user_reply(self) -> bool {
        matches!(
            self.act_type(),
            ActType::Request | ActType::Apology | ActType::ExpConfirm | ActType::AskFor
        )
    }
}

impl fmt::Display for ActType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActType::Salutation => "Salutation",
            ActType::Request => "Request",
            ActType::AskFor => "AskFor",
            ActType::Apology => "Apology",
            ActType::ExpConfirm => "ExpConfirm",
            ActType::ImpConfirm => "ImpConfirm",
            ActType::Retrieve => "Retrieve",
            ActType::Provide => "Provide",
        };
        f.write_str(s)
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arg = match self {
            DialogueAct::Greeting => "greeting".to_string(),
            DialogueAct::Closing => "closing".to_string(),
            DialogueAct::RequestHmihy => "hmihy".to_string(),
            DialogueAct::AskForMore => "more".to_string(),
            DialogueAct::RetrieveInfo => "info".to_string(),
            DialogueAct::ProvideUnknown => "unknown".to_string(),
            DialogueAct::ProvideKnown => "known".to_string(),
            other => other
                .slots()
                .iter()
                .map(Slot::name)
                .collect::<Vec<_>>()
                .join(","),
        };
        write!(f, "{}({})", self.act_type(), arg)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown dialogue act {0:?}")]
pub struct ParseActError(pub String);

impl FromStr for DialogueAct {
    type Err = ParseActError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || ParseActError(text.to_string());
        let trimmed = text.trim();
        let open = trimmed.find('(').ok_or_else(err)?;
        let inner = trimmed[open + 1..].strip_suffix(')').ok_or_else(err)?;
        let head = trimmed[..open].trim();
        let args: Vec<&str> = inner.split(',').map(str::trim).collect();
        let single = |name: &str| args.len() == 1 && args[0] == name;
        let slots = || -> Result<SlotSet, ParseActError> {
            let mut set = SlotSet::EMPTY;
            for a in &args {
                let slot = match *a {
                    "food" => Slot::Food,
                    "price" => Slot::Price,
                    "area" => Slot::Area,
                    _ => return Err(err()),
                };
                if set.contains(slot) {
                    return Err(err());
                }
                set.insert(slot);
            }
            Ok(set)
        };
        let act = match head {
            "Salutation" if single("greeting") => DialogueAct::Greeting,
            "Salutation" if single("closing") => DialogueAct::Closing,
            "Request" if single("hmihy") => DialogueAct::RequestHmihy,
            "Request" => DialogueAct::Request(slots()?),
            "AskFor" if single("more") => DialogueAct::AskForMore,
            "Apology" => DialogueAct::Apology(slots()?),
            "ExpConfirm" => DialogueAct::ExpConfirm(slots()?),
            "ImpConfirm" => DialogueAct::ImpConfirm(slots()?),
            "Retrieve" if single("info") => DialogueAct::RetrieveInfo,
            "Provide" if single("unknown") => DialogueAct::ProvideUnknown,
            "Provide" if single("known") => DialogueAct::ProvideKnown,
            _ => return Err(err()),
        };
        Ok(act)
    }
}

impl Serialize for DialogueAct {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DialogueAct {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Act strings of the whole catalog, in index order.
pub fn catalog_strings() -> Vec<String> {
    CATALOG.iter().map(ToString::to_string).collect()
}
