//! Flight-record ingestion, pre-tactical feature extraction, turnaround
//! labeling, train/test splitting and the synthetic fixture generator.

mod fixture;
mod labels;
mod record;
mod split;

pub use fixture::{synthesize_fixture, AircraftProfile, AirportProfile, CarrierProfile, FixtureProfile};
pub use labels::{
    compute_delays, extract_features, label_records, match_turnarounds, read_labeled, write_labeled, LabelOutcome,
    LabeledExample, PreTacticalFeatures, Target, TurnaroundPair, FEATURE_COUNT, LABELED_COLUMNS,
    MAX_TURNAROUND_MINUTES,
};
pub use record::{
    format_timestamp, minutes_between, parse_flight_records, parse_timestamp, write_flight_records, ColumnMapping,
    FlightRecord, ParseOutcome, Rejection, Timestamp, CANONICAL_HEADER, TIMESTAMP_FORMAT,
};
pub use split::{split_train_test, DataSplit};
