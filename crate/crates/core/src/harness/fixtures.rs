//! Deterministic, template-based dialogue records with planted gaps.
//!
//! Each template is a fixed dialogue skeleton with `{name}` placeholders. The
//! seed picks names, places, items and dates; turn structure, gold queries
//! and gold resolutions are fixed per template.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Backstory, DatasetRecord, GoldPayload, GoldQuery, SnapshotPair};
use crate::error::{ConcordError, Result};
use crate::model::{
    CalendarEvent, GeoPoint, LogRecord, MobileContextSnapshot, ResolutionRecord, Role, Turn, RESOLVE_MISSING_ENTITY,
};
use crate::resolver::{format_date, format_datetime};

pub const TEMPLATES: [&str; 3] = ["doctor_patient", "housemates", "colleagues"];

type Vars = BTreeMap<&'static str, String>;

fn fill(template: &str, vars: &Vars) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    debug_assert!(!out.contains('{'), "unfilled placeholder in `{out}`");
    out
}

/// A gold query: trigger turn, quality, slot, urgency, quoted phrase, reason.
struct GoldRow(u32, bool, &'static str, &'static str, &'static str, &'static str);

/// A gold resolution: trigger turn, phrase, entity, source.
struct ResolutionRow(u32, &'static str, &'static str, &'static str);

struct Template {
    relationship: &'static str,
    summary: &'static str,
    /// Alternating turns, User A first.
    turns: &'static [&'static str],
    queries: &'static [GoldRow],
    resolutions: &'static [ResolutionRow],
}

struct Place {
    name: &'static str,
    address: &'static str,
    lat: f64,
    lon: f64,
}

const fn place(name: &'static str, address: &'static str, lat: f64, lon: f64) -> Place {
    Place { name, address, lat, lon }
}

const FIRST_NAMES: &[&str] = &["Maya", "Jordan", "Priya", "Leo", "Hana", "Marcus", "Elena", "Omar", "Tess", "Ravi"];
const SURNAMES: &[&str] = &["Okafor", "Lindqvist", "Moreno", "Chen", "Patel", "Novak", "Haddad", "Brennan"];

fn at(date: NaiveDate, h: u32, m: u32) -> NaiveDateTime {
    date.and_hms_opt(h, m, 0).expect("valid time")
}

fn event(title: String, start: NaiveDateTime, minutes: i64, location: String) -> CalendarEvent {
    CalendarEvent { title, start, end: start + Duration::minutes(minutes), location: Some(location) }
}

fn log(entries: &[(&str, String)]) -> Vec<LogRecord> {
    entries.iter().map(|(k, v)| LogRecord { key: k.to_string(), value: v.clone() }).collect()
}

fn snapshot(p: &Place, wifi: String, calendar: Vec<CalendarEvent>, logs: Vec<(&str, Vec<LogRecord>)>) -> MobileContextSnapshot {
    let mut s = MobileContextSnapshot::new(format!("{}, {}", p.name, p.address));
    s.gps_coords = GeoPoint::new(p.lat, p.lon).ok();
    s.wifi_ssid = Some(wifi);
    s.calendar = calendar;
    s.aux_logs = logs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    s
}

fn two_names(rng: &mut ChaCha8Rng) -> (String, String) {
    let picked: Vec<&&str> = FIRST_NAMES.choose_multiple(rng, 2).collect();
    (picked[0].to_string(), picked[1].to_string())
}

fn base_date(rng: &mut ChaCha8Rng) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, rng.random_range(3..=9), rng.random_range(3..=24)).expect("valid date")
}

fn time_label(t: NaiveDateTime) -> String {
    t.format("%-I:%M %p").to_string()
}

const HOUSEMATES: Template = Template {
    relationship: "Housemate",
    summary: "{a} and {b} share a flat. {b} is out shopping while {a} is at home; they sort out groceries, a landlord visit, a bill and a get-together with friends.",
    turns: &[
        "Hey {b}, are you still out?",
        "Yeah, I'm at {store} right now. Do we need anything for tonight?",
        "Great. Grab some {item} while you're there, we're out.",
        "Sure. Did you move my {object}? I can't find it anywhere.",
        "I put it in the hall closet yesterday.",
        "Thanks. Also, the landlord is coming by at {visit} tomorrow.",
        "Okay, I'll be home then. Should we clean the kitchen before that?",
        "Yes please. I'll do the bathroom when I get back.",
        "Deal. Did you pay the {bill} bill yet?",
        "Not yet, I'll do it tonight. How much was it again?",
        "It was {amount}, same as last month.",
        "Got it. Are {friend} and the others still coming over on {party_day}?",
        "I think so. I told them to bring {dish}.",
        "Perfect. Our fridge is packed though, we'll need space for it.",
        "I'll clear out the top shelf. Where did you leave the spare key?",
        "Under the blue pot by the back door.",
        "Got it, I'll leave it there for them.",
        "Cool. Heading back now, see you soon.",
        "See you, haha, don't forget the {item} this time.",
        "Ha, I won't. Enjoy the sunshine while it lasts.",
    ],
    queries: &[
        GoldRow(2, true, "LOCATION_DESTINATION", "ROUTINE", "there", "{a} asks {b} to shop 'there' without knowing which store {b} is in."),
        GoldRow(5, true, "LOCATION_DESTINATION", "ROUTINE", "it", "{b} thanks {a} for moving the {object} but never hears where it went."),
        GoldRow(6, true, "APPOINTMENT_TIME", "IMMEDIATE", "then", "{a} agrees to be home 'then' without hearing the visit time."),
        GoldRow(10, true, "GENERAL_ATTRIBUTE", "ROUTINE", "it", "{b} asks for the bill amount that only {a} knows."),
        GoldRow(13, true, "PERSON_GROUP_LIST", "ROUTINE", "them", "{b} cannot tell who 'them' refers to beyond {friend}."),
        GoldRow(16, true, "LOCATION_DESTINATION", "ROUTINE", "there", "{a} will leave the key 'there' without hearing where it is."),
        GoldRow(19, false, "CASUAL_JOKE", "NONE", "this time", "Banter, nothing to recover."),
        GoldRow(20, false, "CASUAL_OBSERVATION", "NONE", "the sunshine", "Small talk about the weather."),
    ],
    resolutions: &[
        ResolutionRow(3, "there", "{store}, {store_address}", "User B GPS"),
        ResolutionRow(4, "my {object}", "{object_entry}", "User B Object Log"),
        ResolutionRow(5, "yesterday", "{yesterday}", "User A Clock"),
        ResolutionRow(6, "tomorrow", "{tomorrow}", "User B Clock"),
        ResolutionRow(7, "then", "{visit_at}", "User B Calendar"),
        ResolutionRow(9, "the {bill} bill", "{bill_entry}", "User A Bills"),
        ResolutionRow(12, "{party_day}", "{party_date}", "User B Calendar"),
        ResolutionRow(13, "them", "{friend}, {friend2} and {friend3}", "User A Contacts Log"),
        ResolutionRow(17, "there", "Under the blue pot by the back door", "User B Object Log"),
    ],
};

const STORES: &[Place] = &[
    place("Greenway Market", "Elm Street, Portland", 45.5231, -122.6765),
    place("Corner Grocer", "5th Avenue, Seattle", 47.6062, -122.3321),
    place("Fresh Fields", "Main Street, Denver", 39.7392, -104.9903),
];
const HOMES: &[Place] = &[
    place("Home", "Birch Lane, Portland", 45.5152, -122.6784),
    place("Home", "Pine Street, Seattle", 47.6101, -122.3420),
    place("Home", "Oak Row, Denver", 39.7420, -104.9850),
];

fn housemates(rng: &mut ChaCha8Rng) -> (Template, Vars, SnapshotPair) {
    let (a, b) = two_names(rng);
    let k = rng.random_range(0..STORES.len());
    let (store, home) = (&STORES[k], &HOMES[k]);
    let day = base_date(rng);
    let item = *["oat milk", "coffee beans", "eggs", "rice"].choose(rng).unwrap();
    let object = *["charger", "headphones", "umbrella", "yoga mat"].choose(rng).unwrap();
    let (bill, amount) = *[("internet", "$60"), ("electric", "$85"), ("water", "$40")].choose(rng).unwrap();
    let dish = *["dessert", "chips and salsa", "a salad"].choose(rng).unwrap();
    let friends: Vec<&&str> = FIRST_NAMES.iter().filter(|n| **n != a && **n != b).collect::<Vec<_>>().choose_multiple(rng, 3).copied().collect();
    let visit = at(day + Duration::days(1), rng.random_range(9..=16), 0);
    let party = at(day + Duration::days(rng.random_range(2..=4)), 19, 0);

    let mut v = Vars::new();
    v.insert("a", a.clone());
    v.insert("b", b.clone());
    v.insert("store", store.name.into());
    v.insert("store_address", store.address.into());
    v.insert("item", item.into());
    v.insert("object", object.into());
    v.insert("object_entry", format!("{b}'s {object}, moved to the hall closet"));
    v.insert("bill", bill.into());
    v.insert("amount", amount.into());
    v.insert("bill_entry", format!("{} bill, {amount}, paid monthly", capitalize(bill)));
    v.insert("dish", dish.into());
    v.insert("friend", friends[0].to_string());
    v.insert("friend2", friends[1].to_string());
    v.insert("friend3", friends[2].to_string());
    v.insert("visit", time_label(visit));
    v.insert("visit_at", format_datetime(visit));
    v.insert("yesterday", format_date(day - Duration::days(1)));
    v.insert("tomorrow", format_date(day + Duration::days(1)));
    v.insert("party_day", party.format("%A").to_string());
    v.insert("party_date", format_date(party.date()));

    let home_loc = format!("{}, {}", home.name, home.address);
    let user_a = snapshot(
        home,
        format!("{}_{}_Home", a, b),
        vec![
            event("Evening in".into(), at(day, 18, 0), 240, home_loc.clone()),
            event(format!("Get-together with {}", friends[0]), party, 180, home_loc.clone()),
        ],
        vec![
            ("Object Log", log(&[("hall closet", format!("{b}'s {object}, moved to the hall closet"))])),
            ("Bills", log(&[(bill, fill("{bill_entry}", &v))])),
            ("Contacts Log", log(&[("friends", format!("{}, {} and {}", friends[0], friends[1], friends[2]))])),
        ],
    );
    let user_b = snapshot(
        store,
        "Guest_WiFi".into(),
        vec![
            event("Grocery run".into(), at(day, 18, 0), 45, format!("{}, {}", store.name, store.address)),
            event("Landlord visit".into(), visit, 60, home_loc.clone()),
            event("Friends over".into(), party, 180, home_loc),
        ],
        vec![("Object Log", log(&[("spare key", "Under the blue pot by the back door".into()), (object, format!("{b}'s {object}"))]))],
    );
    (HOUSEMATES, v, SnapshotPair { user_a, user_b })
}

const COLLEAGUES: Template = Template {
    relationship: "Colleague",
    summary: "{a} and {b} work on the same team at {company}. They prepare a client presentation and agree on who brings what.",
    turns: &[
        "Morning {b}, do you have a minute about the {client} pitch?",
        "Sure, I'm in {room} until ten. What's up?",
        "Great. Can you send me the latest version of the deck before then?",
        "Yes, I'll share it after this call. Did {lead} sign off on the budget slide?",
        "Not yet, she wanted the numbers from last quarter first.",
        "Okay. I have those in my report, I'll add them to that slide.",
        "Perfect. When is the dry run again?",
        "It's on {dry_day} at {dry_time}, same room as the kickoff.",
        "Got it. Should I bring the demo laptop there?",
        "Yes, and the adapter too, the projector is old.",
        "Will do. Who else from the team is joining?",
        "{peer} and the design group, I think.",
        "Okay, I'll ping them about the mockups.",
        "Thanks. Oh, and the client asked about the pricing document.",
        "I'll attach it to the follow-up email tonight.",
        "Great, that should help. Nice weather for a Friday, by the way.",
        "Ha, finally. See you at the dry run.",
        "See you then.",
    ],
    queries: &[
        GoldRow(2, true, "LOCATION_DESTINATION", "ROUTINE", "then", "{a} hears 'before then' without knowing where or until when {b} is busy."),
        GoldRow(5, true, "GENERAL_ATTRIBUTE", "ROUTINE", "those", "{b} does not hear which numbers {a} means."),
        GoldRow(8, true, "APPOINTMENT_TIME", "IMMEDIATE", "It", "{a} asks for the dry-run time that only {b}'s calendar holds."),
        GoldRow(9, true, "LOCATION_DESTINATION", "ROUTINE", "there", "{b} hears 'there' but the room was named in {a}'s masked turn."),
        GoldRow(12, true, "PERSON_GROUP_LIST", "ROUTINE", "the design group", "{a} needs the members of the design group."),
        GoldRow(14, true, "OBJECT_DOCUMENT", "ROUTINE", "the pricing document", "{b} must know which pricing document the client means."),
        GoldRow(16, false, "CASUAL_OBSERVATION", "NONE", "Nice weather", "Small talk."),
    ],
    resolutions: &[
        ResolutionRow(2, "{room}", "{room}, {office}", "User B Calendar"),
        ResolutionRow(3, "the deck", "{deck_entry}", "User B Object Log"),
        ResolutionRow(6, "my report", "{report_entry}", "User A Object Log"),
        ResolutionRow(8, "{dry_day}", "{dry_date}", "User B Calendar"),
        ResolutionRow(9, "there", "{room}, {office}", "A2A:UserB"),
        ResolutionRow(12, "the design group", "{designers}", "User B Contacts Log"),
        ResolutionRow(14, "the pricing document", "{pricing_entry}", "User A Object Log"),
    ],
};

const OFFICES: &[Place] = &[
    place("Northwind Labs", "Harbor Road, Boston", 42.3601, -71.0589),
    place("Bluefin Systems", "Market Street, San Francisco", 37.7749, -122.4194),
    place("Cedar Analytics", "Lake Shore Drive, Chicago", 41.8781, -87.6298),
];

fn colleagues(rng: &mut ChaCha8Rng) -> (Template, Vars, SnapshotPair) {
    let (a, b) = two_names(rng);
    let office = OFFICES.choose(rng).unwrap();
    let day = base_date(rng);
    let room = *["Meeting Room 4B", "the Atlas room", "Conference Room 2"].choose(rng).unwrap();
    let client = *["Harlow", "Meridian", "Quayside"].choose(rng).unwrap();
    let lead = format!("{} {}", FIRST_NAMES.choose(rng).unwrap(), SURNAMES.choose(rng).unwrap());
    let peer = FIRST_NAMES.iter().filter(|n| **n != a && **n != b).collect::<Vec<_>>().choose(rng).unwrap().to_string();
    let designers: Vec<String> = FIRST_NAMES
        .iter()
        .filter(|n| **n != a && **n != b && **n != peer)
        .collect::<Vec<_>>()
        .choose_multiple(rng, 2)
        .map(|n| n.to_string())
        .collect();
    let dry = at(day + Duration::days(rng.random_range(1..=3)), rng.random_range(13..=16), 30);

    let mut v = Vars::new();
    v.insert("a", a.clone());
    v.insert("b", b.clone());
    v.insert("company", office.name.into());
    v.insert("office", format!("{}, {}", office.name, office.address));
    v.insert("room", room.into());
    v.insert("client", client.into());
    v.insert("lead", lead);
    v.insert("peer", peer);
    v.insert("dry_day", dry.format("%A").to_string());
    v.insert("dry_time", time_label(dry));
    v.insert("dry_date", format_date(dry.date()));
    v.insert("deck_entry", format!("{client} pitch deck v7, shared drive"));
    v.insert("report_entry", format!("Q2 revenue report, {client} account"));
    v.insert("pricing_entry", format!("{client} pricing sheet 2024, PDF"));
    v.insert("designers", designers.join(" and "));

    let office_loc = format!("{}, {}", office.name, office.address);
    let room_loc = format!("{room}, {office_loc}");
    let user_a = snapshot(
        office,
        format!("{}_Corp", office.name.split(' ').next().unwrap_or("Office")),
        vec![event("Desk time".into(), at(day, 9, 0), 120, office_loc.clone())],
        vec![("Object Log", log(&[("report", fill("{report_entry}", &v)), ("pricing document", fill("{pricing_entry}", &v))]))],
    );
    let user_b = snapshot(
        office,
        format!("{}_Corp", office.name.split(' ').next().unwrap_or("Office")),
        vec![
            event(format!("{client} sync"), at(day, 9, 0), 60, room_loc.clone()),
            event(format!("{client} pitch dry run"), dry, 60, room_loc),
        ],
        vec![
            ("Object Log", log(&[("deck", fill("{deck_entry}", &v))])),
            ("Contacts Log", log(&[("design group", designers.join(" and "))])),
        ],
    );
    (COLLEAGUES, v, SnapshotPair { user_a, user_b })
}

const DOCTOR_PATIENT: Template = Template {
    relationship: "Doctor",
    summary: "{a} visits {doctor} about a persistent cough. They review when it started, a follow-up test and the pharmacy for a prescription.",
    turns: &[
        "Good morning, {doctor}. Thanks for seeing me today.",
        "Good morning, {a}. What brings you in?",
        "I've had a cough for about two weeks, and it gets worse at night.",
        "I see. Did it start after your trip?",
        "Yes, right after I got back from {trip}.",
        "Okay. I'd like you to get a chest X-ray at the imaging lab downstairs.",
        "Sure. Do I need to book it, or can I walk in?",
        "Walk-ins are fine before {lab_close}. Bring the referral form.",
        "Got it. Should I keep taking the syrup I bought?",
        "You can, but I'm also prescribing an inhaler. Which pharmacy do you use?",
        "The one near my office on {street}.",
        "Good, I'll send it there electronically.",
        "Thank you. When should I come back?",
        "Let's see you again in ten days, my assistant will set the slot.",
        "Okay, that works. Have a nice day, doctor.",
        "You too. Take care of that cough.",
    ],
    queries: &[
        GoldRow(4, true, "GENERAL_ATTRIBUTE", "ROUTINE", "your trip", "{doctor} does not know where {a} travelled."),
        GoldRow(6, true, "LOCATION_DESTINATION", "IMMEDIATE", "the imaging lab downstairs", "{a} needs the exact lab location."),
        GoldRow(8, true, "APPOINTMENT_TIME", "IMMEDIATE", "{lab_close}", "{a} hears a cut-off time only {doctor} states."),
        GoldRow(11, true, "LOCATION_DESTINATION", "ROUTINE", "The one near my office", "{doctor} needs the pharmacy's name and address."),
        GoldRow(12, true, "LOCATION_DESTINATION", "ROUTINE", "there", "{a} hears that the prescription goes 'there' but not which pharmacy."),
        GoldRow(14, true, "APPOINTMENT_TIME", "IMMEDIATE", "the slot", "{a} needs the date of the follow-up."),
        GoldRow(15, false, "CASUAL_COMMENT", "NONE", "Have a nice day", "Pleasantry."),
        GoldRow(16, false, "CASUAL_COMMENT", "NONE", "Take care", "Pleasantry."),
    ],
    resolutions: &[
        ResolutionRow(1, "today", "{today}", "User A Clock"),
        ResolutionRow(5, "{trip}", "{trip_entry}", "User A Calendar"),
        ResolutionRow(6, "the imaging lab downstairs", "{lab}", "User B Care Plan"),
        ResolutionRow(11, "The one near my office", "{pharmacy}", "User A Object Log"),
        ResolutionRow(12, "there", "{pharmacy}", "A2A:UserA"),
        ResolutionRow(14, "the slot", "{follow_up}", "User B Calendar"),
    ],
};

const CLINICS: &[Place] = &[
    place("Riverside Family Clinic", "Bridge Street, Minneapolis", 44.9778, -93.2650),
    place("Hillcrest Medical Group", "Summit Avenue, Nashville", 36.1627, -86.7816),
    place("Bayview Health Center", "Ocean Drive, San Diego", 32.7157, -117.1611),
];

fn doctor_patient(rng: &mut ChaCha8Rng) -> (Template, Vars, SnapshotPair) {
    let a = FIRST_NAMES.choose(rng).unwrap().to_string();
    let doctor = format!("Dr. {}", SURNAMES.choose(rng).unwrap());
    let clinic = CLINICS.choose(rng).unwrap();
    let day = base_date(rng);
    let trip = *["Lisbon", "Montreal", "Mexico City", "Osaka"].choose(rng).unwrap();
    let street = *["Grand Avenue", "Cherry Street", "Lakeview Road"].choose(rng).unwrap();
    let close_hour = rng.random_range(15..=17);
    let follow_up = at(day + Duration::days(10), rng.random_range(9..=15), 0);

    let mut v = Vars::new();
    v.insert("a", a.clone());
    v.insert("doctor", doctor.clone());
    v.insert("trip", trip.into());
    v.insert("street", street.into());
    v.insert("lab_close", time_label(at(day, close_hour, 0)));
    v.insert("today", format_date(day));
    v.insert("trip_entry", format!("Trip to {trip}, returned {}", format_date(day - Duration::days(15))));
    v.insert("lab", format!("Imaging Lab, Floor B1, {}, {}", clinic.name, clinic.address));
    v.insert("pharmacy", format!("CityCare Pharmacy, {street}"));
    v.insert("follow_up", format_datetime(follow_up));

    let clinic_loc = format!("{}, {}", clinic.name, clinic.address);
    let user_a = snapshot(
        clinic,
        "Clinic_Guest".into(),
        vec![
            event(format!("Flight home from {trip}"), at(day - Duration::days(15), 14, 0), 300, format!("{trip} Airport")),
            event(format!("Appointment with {doctor}"), at(day, 9, 30), 30, clinic_loc.clone()),
        ],
        vec![("Object Log", log(&[("pharmacy", fill("{pharmacy}", &v)), ("syrup", "Honey cough syrup, 200 ml".into())]))],
    );
    let user_b = snapshot(
        clinic,
        "Clinic_Staff".into(),
        vec![
            event(format!("Patient visit: {a}"), at(day, 9, 30), 30, clinic_loc.clone()),
            event(format!("Follow-up: {a}"), follow_up, 20, clinic_loc),
        ],
        vec![("Care Plan", log(&[("imaging lab", fill("{lab}", &v)), ("inhaler", "Albuterol inhaler, 90 mcg".into())]))],
    );
    (DOCTOR_PATIENT, v, SnapshotPair { user_a, user_b })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// Builds a record from `template_id`. The same `(template_id, seed)` always
/// yields the same record.
pub fn generate_fixture(template_id: &str, seed: u64) -> Result<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (template, vars, snapshots) = match template_id {
        "doctor_patient" => doctor_patient(&mut rng),
        "housemates" => housemates(&mut rng),
        "colleagues" => colleagues(&mut rng),
        other => return Err(ConcordError::UnknownTemplate(other.to_string())),
    };
    let turns = template
        .turns
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let speaker = if i % 2 == 0 { Role::UserA } else { Role::UserB };
            Turn::new(i as u32 + 1, speaker, fill(t, &vars))
        })
        .collect();
    let queries = template
        .queries
        .iter()
        .map(|GoldRow(turn, high, slot, urgency, phrase, reason)| GoldQuery {
            trigger_turn_id: *turn,
            query_quality_check: if *high { "HIGH_VALUE" } else { "LOW_VALUE" }.into(),
            reason: Some(fill(reason, &vars)),
            protocol_payload: GoldPayload {
                intent: RESOLVE_MISSING_ENTITY.into(),
                target_slot: slot.to_string(),
                urgency: urgency.to_string(),
                context_ref: Some(format!("Turn {turn}")),
            },
            natural_language_fallback: crate::gaps::fallback_text(slot, &fill(phrase, &vars), *turn),
        })
        .collect();
    let resolutions = template
        .resolutions
        .iter()
        .map(|ResolutionRow(turn, phrase, entity, source)| ResolutionRecord {
            trigger_turn_id: *turn,
            ambiguous_phrase: fill(phrase, &vars),
            resolved_entity: fill(entity, &vars),
            resolution_source: source.to_string(),
        })
        .collect();
    Ok(DatasetRecord {
        dataset_id: format!("scenario_protocol_{template_id}_{seed}"),
        backstory: Backstory { summary: fill(template.summary, &vars), relationship: template.relationship.into() },
        mobile_context_snapshot: snapshots,
        conversation_transcript: turns,
        ground_truth_resolutions: resolutions,
        required_protocol_queries: queries,
    })
}
