mod common;

use alloytest_core::render::*;
use alloytest_core::*;
use common::randmodel::{random_command, random_model, random_valuation};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

const COURSES: &str = include_str!("fixtures/courses.als");
const POSITIVE: &str = include_str!("fixtures/positive.als");
const NEGATIVE: &str = include_str!("fixtures/negative.als");
const CARS: &str = include_str!("fixtures/cars.als");
const INSTANCE1: &str = include_str!("fixtures/instance1.als");

fn model_round_trip(text: &str) -> Model {
    let m = parse_model(text).unwrap();
    let again = parse_model(&render_model(&m)).unwrap();
    assert_eq!(again, m, "{}", render_model(&m));
    m
}

fn command_round_trip(m: &Model, text: &str) {
    let c = parse_command(m, text).unwrap();
    let rendered = render_command_in(m, &c);
    let again = parse_command(m, &rendered).unwrap_or_else(|e| panic!("{e}\n{rendered}"));
    assert_eq!(again, c, "{rendered}");
}

#[test]
fn figure_sources_round_trip() {
    let courses = model_round_trip(COURSES);
    command_round_trip(&courses, POSITIVE);
    command_round_trip(&courses, NEGATIVE);
    let cars = model_round_trip(CARS);
    command_round_trip(&cars, INSTANCE1);
}

#[test]
fn model_with_commands_round_trips() {
    let text = format!("{COURSES}\npred only_students {{ all p : Person | some p.enrolled implies p in Student }}\n{POSITIVE}\n{NEGATIVE}");
    let m = model_round_trip(&text);
    assert_eq!(m.commands.len(), 2);
}

#[test]
fn rendering_preserves_empty_products_and_disj() {
    let m = parse_model(COURSES).unwrap();
    let c = parse_command(&m, POSITIVE).unwrap();
    let out = render_command_in(&m, &c);
    assert!(out.contains("none->none->none"), "{out}");
    assert!(out.contains("some disj"), "{out}");
    assert!(out.contains("Course <: projects"), "{out}");
    assert!(out.contains("expect 1"), "{out}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn random_models_and_commands_round_trip(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rm = random_model(&mut rng);
        let m = parse_model(&rm.source()).unwrap();
        let again = parse_model(&render_model(&m)).unwrap();
        prop_assert_eq!(&again, &m);
        for text in [random_command(&rm, &mut rng), random_valuation(&rm, &mut rng)] {
            let c = parse_command(&m, &text).unwrap();
            let rendered = render_command_in(&m, &c);
            let back = parse_command(&m, &rendered);
            prop_assert_eq!(back.as_ref(), Ok(&c), "{}", rendered);
        }
    }

    #[test]
    fn random_formulas_round_trip_without_a_model(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rm = random_model(&mut rng);
        let text = common::randmodel::random_formula(&rm, &mut rng, 4, &mut Vec::new());
        let f = parse_formula_syntax(&text).unwrap();
        let rendered = render_formula(&f);
        prop_assert_eq!(parse_formula_syntax(&rendered), Ok(f), "{}", rendered);
    }
}
