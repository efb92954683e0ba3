//! Fixtures shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::path::Path;

use rusqlite::Connection;
use semfence::corpus::{apply_annotations, ColumnType, Fragments, RawAnnotation, RawComponent};
use semfence::{ColumnRef, ParallelExample, SchemaDb};

fn typed(mut db: SchemaDb, numeric: &[(&str, &str)]) -> SchemaDb {
    for (t, c) in numeric {
        let ti = db.table_index(t).unwrap();
        let ci = db.column_index(ti, c).unwrap();
        db.tables[ti].columns[ci].ty = ColumnType::Number;
    }
    db
}

pub fn concert_schema() -> SchemaDb {
    let db = SchemaDb::from_names(
        "concert_singer",
        &[
            ("singer", &["singer_id", "name", "country", "age"]),
            ("stadium", &["stadium_id", "name", "location", "capacity"]),
            ("concert", &["concert_id", "concert_name", "stadium_id", "singer_id", "year"]),
        ],
    );
    typed(
        db,
        &[
            ("singer", "singer_id"),
            ("singer", "age"),
            ("stadium", "stadium_id"),
            ("stadium", "capacity"),
            ("concert", "concert_id"),
            ("concert", "stadium_id"),
            ("concert", "singer_id"),
            ("concert", "year"),
        ],
    )
}

pub fn flight_schema() -> SchemaDb {
    SchemaDb::from_names(
        "flight_1",
        &[
            ("flight", &["flno", "origin", "destination", "price", "aid"]),
            ("aircraft", &["aid", "name", "distance"]),
            ("employee", &["eid", "name", "salary"]),
        ],
    )
}

pub fn department_schema() -> SchemaDb {
    SchemaDb::from_names(
        "department_management",
        &[
            ("department", &["department_id", "name", "budget_in_billions", "num_employees"]),
            ("head", &["head_id", "name", "born_state", "age"]),
            ("management", &["department_id", "head_id", "temporary_acting"]),
        ],
    )
}

/// Write the concert fixture database: 6 singers, 3 stadiums, 7 concerts.
pub fn build_concert_db(path: &Path) {
    let conn = Connection::open(path).unwrap();
    conn.execute_batch(
        "CREATE TABLE singer (singer_id INTEGER PRIMARY KEY, name TEXT, country TEXT, age INTEGER);
         CREATE TABLE stadium (stadium_id INTEGER PRIMARY KEY, name TEXT, location TEXT, capacity INTEGER);
         CREATE TABLE concert (concert_id INTEGER PRIMARY KEY, concert_name TEXT, stadium_id INTEGER,
                               singer_id INTEGER, year INTEGER);
         INSERT INTO singer VALUES
           (1, 'Joe Sharp', 'Netherlands', 52), (2, 'Timbaland', 'United States', 32),
           (3, 'Justin Brown', 'France', 29), (4, 'Rose White', 'France', 41),
           (5, 'John Nizinik', 'France', 43), (6, 'Tribal King', 'United States', 25);
         INSERT INTO stadium VALUES
           (1, 'Stark''s Park', 'Raith Rovers', 10104), (2, 'Balmoor', 'Peterhead', 4000),
           (3, 'Glebe Park', 'Brechin City', 3960);
         INSERT INTO concert VALUES
           (1, 'Auditions', 1, 2, 2014), (2, 'Super bootcamp', 2, 3, 2014),
           (3, 'Home Visits', 2, 2, 2015), (4, 'Week 1', 3, 4, 2014),
           (5, 'Week 1', 1, 5, 2015), (6, 'Week 2', 1, 1, 2015), (7, 'Finale', 3, 2, 2015);",
    )
    .unwrap();
}

/// Concert schema with a content index matching [`build_concert_db`].
pub fn concert_schema_with_contents() -> SchemaDb {
    let mut db = concert_schema();
    let text = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    db.content_index.insert(
        ColumnRef::new(0, 1),
        text(&["Joe Sharp", "John Nizinik", "Justin Brown", "Rose White", "Timbaland", "Tribal King"]),
    );
    db.content_index.insert(ColumnRef::new(0, 2), text(&["France", "Netherlands", "United States"]));
    db.content_index.insert(ColumnRef::new(1, 1), text(&["Balmoor", "Glebe Park", "Stark's Park"]));
    db
}

/// (question, gold SQL, components as (NL fragments, SQL fragments)).
type Case = (&'static str, &'static str, &'static [(&'static [&'static str], &'static [&'static str])]);

const PIPELINE_CASES: &[Case] = &[
    (
        "How many singers are there ?",
        "select count(*) from singer",
        &[(&["How many singers are there ?"], &["select count(*) from singer"])],
    ),
    (
        "How many singers are from France ?",
        "select count(*) from singer where country = 'France'",
        &[
            (&["How many singers"], &["select count(*) from singer"]),
            (&["are from France ?"], &["where country = 'France'"]),
        ],
    ),
    (
        "What is the average age of singers from United States ?",
        "select avg(age) from singer where country = 'United States'",
        &[
            (&["What is the average age of singers"], &["select avg(age) from singer"]),
            (&["from United States ?"], &["where country = 'United States'"]),
        ],
    ),
    (
        "List singer names ordered by age descending .",
        "select name from singer order by age desc",
        &[
            (&["List singer names"], &["select name from singer"]),
            (&["ordered by age descending ."], &["order by age desc"]),
        ],
    ),
    (
        "Show the name and capacity of each stadium .",
        "select name, capacity from stadium",
        &[(&["Show the name and capacity of each stadium ."], &["select name, capacity from stadium"])],
    ),
    (
        "What is the name of the oldest singer ?",
        "select name from singer order by age desc limit 1",
        &[
            (&["What is the name"], &["select name from singer"]),
            (&["of the oldest singer ?"], &["order by age desc limit 1"]),
        ],
    ),
    (
        "How many concerts were held in 2014 ?",
        "select count(*) from concert where year = 2014",
        &[
            (&["How many concerts"], &["select count(*) from concert"]),
            (&["were held in 2014 ?"], &["where year = 2014"]),
        ],
    ),
    (
        "For each country , how many singers are there ?",
        "select country, count(*) from singer group by country",
        &[
            (&["For each country ,"], &["group by country"]),
            (&["how many singers are there ?"], &["select country, count(*) from singer"]),
        ],
    ),
    (
        "Which countries have more than one singer ?",
        "select country from singer group by country having count(*) > 1",
        &[
            (&["Which countries"], &["select country from singer group by country"]),
            (&["have more than one singer ?"], &["having count(*) > 1"]),
        ],
    ),
    (
        "Show the concert names and the stadium names where they were held .",
        "select T1.concert_name, T2.name from concert as T1 join stadium as T2 on T1.stadium_id = T2.stadium_id",
        &[(
            &["Show the concert names and the stadium names where they were held ."],
            &["select T1.concert_name, T2.name from concert as T1 join stadium as T2 on T1.stadium_id = T2.stadium_id"],
        )],
    ),
    (
        "What is the maximum capacity of stadiums located in Peterhead ?",
        "select max(capacity) from stadium where location = 'Peterhead'",
        &[
            (&["What is the maximum capacity of stadiums"], &["select max(capacity) from stadium"]),
            (&["located in Peterhead ?"], &["where location = 'Peterhead'"]),
        ],
    ),
    (
        "Names of singers older than 40 and from France .",
        "select name from singer where age > 40 and country = 'France'",
        &[
            (&["Names of singers"], &["select name from singer"]),
            (&["older than 40"], &["age > 40"]),
            (&["and from France ."], &["country = 'France'"]),
        ],
    ),
    (
        "Which singers have never performed in a concert ?",
        "select name from singer where singer_id not in (select singer_id from concert)",
        &[
            (&["Which singers"], &["select name from singer"]),
            (
                &["have never performed in a concert ?"],
                &["where singer_id not in (select singer_id from concert)"],
            ),
        ],
    ),
    (
        "What is the youngest age and the oldest age of singers ?",
        "select min(age), max(age) from singer",
        &[(&["What is the youngest age and the oldest age of singers ?"], &["select min(age), max(age) from singer"])],
    ),
    (
        "How many distinct countries do singers come from ?",
        "select count(distinct country) from singer",
        &[(&["How many distinct countries do singers come from ?"], &["select count(distinct country) from singer"])],
    ),
    (
        "List stadiums with capacity between 3000 and 5000 .",
        "select name from stadium where capacity between 3000 and 5000",
        &[
            (&["List stadiums"], &["select name from stadium"]),
            (&["with capacity between 3000 and 5000 ."], &["where capacity between 3000 and 5000"]),
        ],
    ),
    (
        "Which stadium hosted the most concerts ?",
        "select T2.name from concert as T1 join stadium as T2 on T1.stadium_id = T2.stadium_id group by T1.stadium_id order by count(*) desc limit 1",
        &[
            (
                &["Which stadium"],
                &["select T2.name from concert as T1 join stadium as T2 on T1.stadium_id = T2.stadium_id"],
            ),
            (&["hosted the most concerts ?"], &["group by T1.stadium_id order by count(*) desc limit 1"]),
        ],
    ),
    (
        "Names of singers whose name contains Park or who are from Netherlands .",
        "select name from singer where name like '%Park%' or country = 'Netherlands'",
        &[
            (&["Names of singers"], &["select name from singer"]),
            (&["whose name contains Park"], &["name like '%Park%'"]),
            (&["or who are from Netherlands ."], &["or country = 'Netherlands'"]),
        ],
    ),
    (
        "Show countries with singers older than 40 and also singers younger than 30 .",
        "select country from singer where age > 40 intersect select country from singer where age < 30",
        &[
            (&["Show countries with singers older than 40"], &["select country from singer where age > 40"]),
            (&["and also singers younger than 30 ."], &["intersect select country from singer where age < 30"]),
        ],
    ),
    (
        "What is the average age of singers who performed in 2015 ?",
        "select avg(T1.age) from singer as T1 join concert as T2 on T1.singer_id = T2.singer_id where T2.year = 2015",
        &[
            (
                &["What is the average age of singers"],
                &["select avg(T1.age) from singer as T1 join concert as T2 on T1.singer_id = T2.singer_id"],
            ),
            (&["who performed in 2015 ?"], &["where T2.year = 2015"]),
        ],
    ),
];

/// Twenty annotated examples over the concert schema.
pub fn pipeline_corpus() -> Vec<ParallelExample> {
    let examples: Vec<ParallelExample> = PIPELINE_CASES
        .iter()
        .map(|(q, sql, _)| ParallelExample::new(q, sql, "concert_singer"))
        .collect();
    let annotations: Vec<RawAnnotation> = PIPELINE_CASES
        .iter()
        .enumerate()
        .map(|(i, (_, _, comps))| RawAnnotation {
            example_index: i,
            components: comps
                .iter()
                .map(|(nl, out)| RawComponent {
                    nl: Fragments::Many(nl.iter().map(|s| s.to_string()).collect()),
                    out: out.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        })
        .collect();
    apply_annotations(&annotations, examples).unwrap().examples
}

pub mod oracle;
pub mod strategies;

/// Hand-built (pred, gold, schema) triples: 0 = concert, 1 = flight,
/// 2 = department.
pub const EM_PAIRS: &[(&str, &str, usize)] = &[
    ("select name from singer", "select name from singer", 0),
    ("SELECT name FROM singer", "select NAME from SINGER", 0),
    ("select name, age from singer", "select age, name from singer", 0),
    ("select name from singer", "select age from singer", 0),
    ("select name, name from singer", "select name from singer", 0),
    ("select distinct country from singer", "select country from singer", 0),
    ("select T1.name from singer as T1", "select singer.name from singer", 0),
    ("select s.name from singer s where s.age > 30", "select name from singer where age > 30", 0),
    ("select name from singer where age > 30", "select name from singer where age > 40", 0),
    ("select name from singer where age > 30", "select name from singer where 30 < age", 0),
    ("select name from singer where age > 30", "select name from singer where age >= 30", 0),
    ("select name from singer where age > 30 and country = 'France'", "select name from singer where country = 'France' and age > 30", 0),
    ("select name from singer where age > 30 or country = 'France'", "select name from singer where country = 'France' or age > 30", 0),
    ("select name from singer where age > 30 or country = 'France'", "select name from singer where age > 30 and country = 'France'", 0),
    ("select name from singer where (age > 30 and age < 50) and country = 'France'", "select name from singer where age > 30 and (age < 50 and country = 'France')", 0),
    ("select name from singer where age > 30 and age > 30", "select name from singer where age > 30", 0),
    ("select country, count(*) from singer group by country", "select count(*), country from singer group by country", 0),
    ("select country from singer group by country, age", "select country from singer group by age, country", 0),
    ("select country from singer group by country having count(*) > 1", "select country from singer group by country having count(*) > 2", 0),
    ("select country from singer group by country having count(*) > 1", "select country from singer group by country", 0),
    ("select name from singer order by age desc", "select name from singer order by age", 0),
    ("select name from singer order by age, name", "select name from singer order by name, age", 0),
    ("select name from singer order by age desc limit 1", "select name from singer order by age desc limit 3", 0),
    ("select name from singer order by age desc limit 1", "select name from singer order by age desc", 0),
    ("select T1.name from singer as T1 join concert as T2 on T1.singer_id = T2.singer_id", "select singer.name from concert join singer on concert.singer_id = singer.singer_id", 0),
    ("select T1.name from singer as T1 join concert as T2 on T1.singer_id = T2.singer_id", "select T1.name from singer as T1 join concert as T2 on T1.singer_id = T2.concert_id", 0),
    ("select name from singer where singer_id in (select singer_id from concert)", "select name from singer where singer_id in (select singer_id from concert where year = 2014)", 0),
    ("select name from singer where singer_id not in (select singer_id from concert)", "select name from singer where singer_id in (select singer_id from concert)", 0),
    ("select country from singer where age > 40 intersect select country from singer where age < 30", "select country from singer where age > 40 intersect select country from singer where age < 30", 0),
    ("select country from singer where age > 40 union select country from singer where age < 30", "select country from singer where age > 40 intersect select country from singer where age < 30", 0),
    ("select name from stadium where capacity between 3000 and 5000", "select name from stadium where capacity between 1 and 2", 0),
    ("select name from stadium where capacity between 3000 and 5000", "select name from stadium where capacity >= 3000 and capacity <= 5000", 0),
    ("select name from singer where name like '%a%'", "select name from singer where name like '%b%'", 0),
    ("select name from singer where name like '%a%'", "select name from singer where name not like '%a%'", 0),
    ("select count(distinct country) from singer", "select count(country) from singer", 0),
    ("select avg(age), max(age) from singer", "select max(age), avg(age) from singer", 0),
    ("select name from singer where country in ('France', 'Netherlands')", "select name from singer where country in ('Netherlands', 'France')", 0),
    ("select origin from flight where price > 300", "select origin from flight where price > 300", 1),
    ("select flno from flight where origin = 'Los Angeles' and destination = 'Honolulu'", "select flno from flight where destination = 'Honolulu' and origin = 'Los Angeles'", 1),
    ("select avg(price) from flight where origin = 'Los Angeles'", "select avg(flight.price) from flight where flight.origin = 'Los Angeles'", 1),
    ("select avg(price) from flight", "select sum(price) from flight", 1),
    ("select T2.name from flight as T1 join aircraft as T2 on T1.aid = T2.aid group by T1.aid order by count(*) desc limit 1", "select aircraft.name from aircraft join flight on aircraft.aid = flight.aid group by flight.aid order by count(*) desc limit 1", 1),
    ("select name from employee where salary > (select avg(salary) from employee)", "select name from employee where salary > (select avg(salary) from employee)", 1),
    ("select name from employee where salary > (select avg(salary) from employee)", "select name from employee where salary > (select max(salary) from employee)", 1),
    ("select name from aircraft where distance + 10 > 100", "select name from aircraft where 10 + distance > 100", 1),
    ("select name from aircraft where distance - 10 > 100", "select name from aircraft where 10 - distance > 100", 1),
    ("select count(*) from flight as f join aircraft as a on f.aid = a.aid where a.distance > 5000", "select count(*) from flight join aircraft on flight.aid = aircraft.aid where aircraft.distance > 5000", 1),
    ("select eid from employee except select aid from aircraft", "select aid from aircraft except select eid from employee", 1),
    ("select name from employee where name is null", "select name from employee where name is not null", 1),
    ("select name from employee where exists (select * from flight where flight.aid = employee.eid)", "select name from employee where not exists (select * from flight where flight.aid = employee.eid)", 1),
    ("select count(*) from head where age > 56", "select count(*) from head where head.age > 56", 2),
    ("select count ( head.* ) where head.age > 56", "select count(*) from head where age > 56", 2),
    ("select name, born_state, age from head order by age", "select name, born_state, age from head order by age", 2),
    ("select name from department", "select num_employees from department", 2),
    ("select max(budget_in_billions), min(budget_in_billions) from department", "select min(budget_in_billions), max(budget_in_billions) from department", 2),
    ("select T1.name from department as T1 join management as T2 on T1.department_id = T2.department_id where T2.temporary_acting = 'Yes'", "select department.name from management join department on department.department_id = management.department_id where management.temporary_acting = 'No'", 2),
    ("select distinct T1.age from management as T2 join head as T1 on T1.head_id = T2.head_id where T2.temporary_acting = 'Yes'", "select distinct head.age from head join management on head.head_id = management.head_id where management.temporary_acting = 'Yes'", 2),
    ("select born_state from head group by born_state having count(*) >= 3", "select born_state from head group by born_state having count(*) > 3", 2),
    ("select name from head where name like '%Ha%'", "select name from head where name like '%Ha%'", 2),
    ("select head_id, name from head where name like '%Ha%'", "select name, head_id from head where name like '%Ha%'", 2),
    ("select x.n from (select count(*) as n from head) as x", "select y.n from (select count(*) as n from head) as y", 2),
    ("select num_employees from department where department_id = 1 or department_id = 1", "select num_employees from department where department_id = 1", 2),
];
