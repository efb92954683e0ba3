//! Inputs shared by the pipeline benchmarks.

use semfence::subword::Convention;
use semfence::{SchemaDb, SubwordVocabulary};

pub const QUERIES: &[&str] = &[
    "select avg ( flight.price ) where flight.origin = 'New York'",
    "select T2.name from concert as T1 join stadium as T2 on T1.stadium_id = T2.stadium_id \
     group by T1.stadium_id order by count(*) desc limit 1",
    "select country from singer where age > 40 intersect select country from singer where age < 30",
    "select name from singer where singer_id not in (select singer_id from concert where year = 2014)",
];

pub fn schema() -> SchemaDb {
    SchemaDb::from_names(
        "concert_singer",
        &[
            ("singer", &["singer_id", "name", "country", "age"]),
            ("stadium", &["stadium_id", "name", "location", "capacity"]),
            ("concert", &["concert_id", "concert_name", "stadium_id", "singer_id", "year"]),
            ("flight", &["origin", "price"]),
        ],
    )
}

/// A small vocabulary with boundary-crossing merges.
pub fn vocab() -> SubwordVocabulary {
    let words = [
        "select", "from", "where", "group", "order", "by", "limit", "join", "on", "as", "count", "name", "_id",
        "stadium_", "singer_", "concert", "country", "age", "flight.", "price", "origin", "average", "desc", "T1.",
        "T2.", "year", "not", "in", "intersect", "New", "York",
    ];
    SubwordVocabulary::new(words, Convention::None)
}
