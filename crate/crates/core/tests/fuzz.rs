use alloytest_core::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const COURSES: &str = include_str!("fixtures/courses.als");
const POSITIVE: &str = include_str!("fixtures/positive.als");

const TOKENS: &[&str] = &[
    "sig", "abstract", "extends", "in", "one", "lone", "some", "set", "no", "all", "disj", "run", "for", "but",
    "exactly", "expect", "fact", "pred", "fun", "open", "util/ordering", "[", "]", "{", "}", "(", ")", ":", ",",
    "|", ".", "->", "<:", ":>", "+", "-", "&", "~", "^", "*", "=", "!=", "not", "and", "or", "implies", "iff",
    "else", "none", "univ", "iden", "next", "first", "last", "Person", "Course", "enrolled", "teaches", "x", "0",
    "1", "3", "//", "/*", "*/", "--", "\n", "#", "@", "\"", "é",
];

fn random_bytes(rng: &mut StdRng) -> String {
    let len = rng.gen_range(0..120);
    let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

fn token_soup(rng: &mut StdRng) -> String {
    let len = rng.gen_range(0..60);
    (0..len).map(|_| *TOKENS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn mutate(rng: &mut StdRng, src: &str) -> String {
    let mut chars: Vec<char> = src.chars().collect();
    for _ in 0..rng.gen_range(1..6) {
        if chars.is_empty() {
            break;
        }
        let i = rng.gen_range(0..chars.len());
        match rng.gen_range(0..3) {
            0 => {
                chars.remove(i);
            }
            1 => chars.insert(i, *b"{}()|.->=<:x ".choose(rng).unwrap() as char),
            _ => chars.truncate(i),
        }
    }
    chars.into_iter().collect()
}

#[test]
fn parser_never_panics() {
    let mut rng = StdRng::seed_from_u64(3);
    let courses = parse_model(COURSES).unwrap();
    for i in 0..20_000 {
        let text = match i % 3 {
            0 => random_bytes(&mut rng),
            1 => token_soup(&mut rng),
            _ => mutate(&mut rng, if i % 2 == 0 { COURSES } else { POSITIVE }),
        };
        let _ = parse_model(&text);
        let _ = parse_command(&courses, &text);
        let _ = parse_formula(&courses, &text);
    }
}

#[test]
fn deeply_nested_input_is_rejected() {
    let open = "(".repeat(5000);
    let text = format!("run {{ some {open}Person }}");
    let courses = parse_model(COURSES).unwrap();
    assert!(parse_command(&courses, &text).is_err());
    let nots = "not ".repeat(5000);
    assert!(parse_command(&courses, &format!("run {{ {nots} no Person }}")).is_err());
}
