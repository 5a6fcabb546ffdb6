//! Private threshold edit distance between one query sequence and a
//! database of sequences, using OT-based secure character comparison.
//!
//! The client holds the query, the server holds the database. The client
//! runs the banded DP locally and obtains each equality bit it needs through
//! a 1-out-of-n oblivious transfer; the server learns only sequence lengths
//! and how many DP rows were evaluated.

pub mod alphabet;
pub mod baseot;
pub mod editdist;
pub mod escot;
pub mod otext;
pub mod protocol;
pub mod wire;

pub use alphabet::{Alphabet, AlphabetError, DatabaseFormat, EncodedSequence, SequenceDatabase};
pub use baseot::{BaseOtBatch, BaseOtError, GroupParams, KeyDerivation, SymmetricKey};
pub use editdist::{
    ukkonen_banded, ukkonen_cleartext, wagner_fischer, Band, Batching, EditDistanceResult,
    EqualityComparator, Threshold,
};
pub use escot::{build_messages, EscotError, OtMessageVector};
pub use otext::{build_codebook, CodeBook, ExtensionReceiver, ExtensionSender, OtExtError};
pub use protocol::{
    client_session, run_client, run_server, server_session, MatchResult, ProtocolError,
    run_loopback, ServerOptions, ServerReport, SessionConfig, SessionMetrics,
};
pub use wire::{ChannelStats, CountingChannel, FrameType, WireError};
