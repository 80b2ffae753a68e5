//! Random small models and commands for cross-checking the solver.

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Sig {
    pub name: String,
    /// Parent and whether it is an extension.
    pub parent: Option<(String, bool)>,
    pub is_abstract: bool,
    pub mult: Option<&'static str>,
}

#[derive(Debug, Clone)]
pub struct Field {
    pub name: String,
    pub owner: String,
    pub column: String,
    pub mult: &'static str,
}

#[derive(Debug, Clone)]
pub struct RandomModel {
    pub sigs: Vec<Sig>,
    pub fields: Vec<Field>,
    pub ordered: Option<String>,
    pub fact: Option<String>,
}

impl RandomModel {
    pub fn top_level(&self) -> impl Iterator<Item = &Sig> {
        self.sigs.iter().filter(|s| s.parent.is_none())
    }

    pub fn top_of<'a>(&'a self, s: &'a str) -> &'a str {
        match self.sigs.iter().find(|x| x.name == s).and_then(|x| x.parent.as_ref()) {
            Some((p, _)) => self.top_of(p),
            None => s,
        }
    }

    pub fn source(&self) -> String {
        let mut out = String::new();
        if let Some(o) = &self.ordered {
            out += &format!("open util/ordering[{o}]\n");
        }
        for s in &self.sigs {
            if s.is_abstract {
                out += "abstract ";
            }
            if let Some(m) = s.mult {
                out += m;
                out += " ";
            }
            out += &format!("sig {}", s.name);
            match &s.parent {
                Some((p, true)) => out += &format!(" extends {p}"),
                Some((p, false)) => out += &format!(" in {p}"),
                None => {}
            }
            let fields: Vec<String> = self
                .fields
                .iter()
                .filter(|f| f.owner == s.name)
                .map(|f| format!("{}: {} {}", f.name, f.mult, f.column))
                .collect();
            out += &format!(" {{ {} }}\n", fields.join(", "));
        }
        if let Some(f) = &self.fact {
            out += &format!("fact {{ {f} }}\n");
        }
        out
    }
}

pub fn random_model(rng: &mut impl Rng) -> RandomModel {
    let mut sigs = vec![Sig { name: "A".into(), parent: None, is_abstract: false, mult: None }];
    if rng.gen_bool(0.7) {
        let parent = match rng.gen_range(0..4) {
            0 => Some(("A".to_string(), false)),
            1 => Some(("A".to_string(), true)),
            _ => None,
        };
        sigs.push(Sig { name: "B".into(), parent, is_abstract: false, mult: None });
    }
    if sigs.len() == 2 && matches!(sigs[1].parent, Some((_, true))) && rng.gen_bool(0.3) {
        sigs[0].is_abstract = true;
    }
    if rng.gen_bool(0.15) {
        let i = rng.gen_range(0..sigs.len());
        sigs[i].mult = Some(*["lone", "some", "one"].choose(rng).unwrap());
    }
    let names: Vec<String> = sigs.iter().map(|s| s.name.clone()).collect();
    let mut fields = Vec::new();
    for i in 0..rng.gen_range(0..=2) {
        fields.push(Field {
            name: format!("f{i}"),
            owner: names.choose(rng).unwrap().clone(),
            column: names.choose(rng).unwrap().clone(),
            mult: ["set", "set", "lone", "one", "some"].choose(rng).unwrap(),
        });
    }
    let mut m = RandomModel { sigs, fields, ordered: None, fact: None };
    if rng.gen_bool(0.2) {
        let tops: Vec<String> = m.top_level().map(|s| s.name.clone()).collect();
        m.ordered = Some(tops.choose(rng).unwrap().clone());
    }
    if rng.gen_bool(0.25) {
        m.fact = Some(random_formula(&m, rng, 2, &mut Vec::new()));
    }
    m
}

/// Variables in scope, with the signature bounding each.
type Vars = Vec<(String, String)>;

/// A unary expression whose elements lie in (a subtype of) top-level `ty`,
/// or anywhere when `ty` is `None`.
fn unary(m: &RandomModel, rng: &mut impl Rng, depth: u32, vars: &Vars, ty: Option<&str>) -> String {
    let fits = |s: &str| ty.is_none_or(|t| m.top_of(s) == t);
    let mut options: Vec<String> = m.sigs.iter().filter(|s| fits(&s.name)).map(|s| s.name.clone()).collect();
    options.extend(vars.iter().filter(|(_, s)| fits(s)).map(|(v, _)| v.clone()));
    if depth > 0 {
        for f in &m.fields {
            if fits(&f.column) {
                let src = unary(m, rng, depth - 1, vars, Some(m.top_of(&f.owner)));
                options.push(format!("{src}.{}", f.name));
            }
            if fits(&f.owner) {
                let dst = unary(m, rng, depth - 1, vars, Some(m.top_of(&f.column)));
                options.push(format!("{}.{dst}", f.name));
            }
        }
        if let Some(o) = &m.ordered {
            if fits(o) {
                options.push(format!("{}.next", unary(m, rng, depth - 1, vars, Some(o))));
                options.push("first".into());
            }
        }
        if !options.is_empty() && rng.gen_bool(0.3) {
            let a = options.choose(rng).unwrap().clone();
            let b = options.choose(rng).unwrap().clone();
            let op = ["+", "-", "&"].choose(rng).unwrap();
            options.push(format!("({a} {op} {b})"));
        }
    }
    options.choose(rng).cloned().unwrap_or_else(|| "none".into())
}

fn binary(m: &RandomModel, rng: &mut impl Rng, depth: u32, vars: &Vars) -> String {
    let mut options: Vec<String> = m.fields.iter().map(|f| f.name.clone()).collect();
    let a = unary(m, rng, 0, vars, None);
    let b = unary(m, rng, 0, vars, None);
    options.push(format!("{a}->{b}"));
    if let Some(f) = m.fields.choose(rng) {
        options.push(format!("~{}", f.name));
        if m.top_of(&f.owner) == m.top_of(&f.column) {
            options.push(format!("^{}", f.name));
            options.push(format!("*{}", f.name));
        }
    }
    if let Some(o) = &m.ordered {
        options.push(format!("{o} <: next"));
    }
    if depth > 0 && rng.gen_bool(0.2) {
        let x = binary(m, rng, depth - 1, vars);
        let y = binary(m, rng, depth - 1, vars);
        options.push(format!("({x} + {y})"));
    }
    options.choose(rng).unwrap().clone()
}

pub fn random_formula(m: &RandomModel, rng: &mut impl Rng, depth: u32, vars: &mut Vars) -> String {
    let choice = if depth == 0 { rng.gen_range(0..4) } else { rng.gen_range(0..9) };
    match choice {
        0 | 1 => {
            let test = ["some", "no", "lone", "one"].choose(rng).unwrap();
            let e = if rng.gen_bool(0.7) { unary(m, rng, 1, vars, None) } else { binary(m, rng, 1, vars) };
            format!("{test} {e}")
        }
        2 => {
            let ty = m.top_level().map(|s| s.name.clone()).collect::<Vec<_>>().choose(rng).unwrap().clone();
            let l = unary(m, rng, 1, vars, Some(&ty));
            let r = unary(m, rng, 1, vars, Some(&ty));
            let op = ["in", "=", "!=", "not in"].choose(rng).unwrap();
            format!("{l} {op} {r}")
        }
        3 => {
            let l = binary(m, rng, 1, vars);
            let r = binary(m, rng, 1, vars);
            let op = ["in", "="].choose(rng).unwrap();
            format!("{l} {op} {r}")
        }
        4 => format!("not ({})", random_formula(m, rng, depth - 1, vars)),
        5 | 6 => {
            let op = ["and", "or", "implies", "iff"].choose(rng).unwrap();
            let a = random_formula(m, rng, depth - 1, vars);
            let b = random_formula(m, rng, depth - 1, vars);
            format!("({a}) {op} ({b})")
        }
        _ => {
            let q = ["all", "some", "no", "lone", "one"].choose(rng).unwrap();
            let sig = m.sigs.choose(rng).unwrap().name.clone();
            let n = vars.len();
            let count = rng.gen_range(1..=2);
            let names: Vec<String> = (0..count).map(|k| format!("v{}", n + k)).collect();
            let disj = if count == 2 && rng.gen_bool(0.5) { "disj " } else { "" };
            for v in &names {
                vars.push((v.clone(), sig.clone()));
            }
            let body = random_formula(m, rng, depth - 1, vars);
            vars.truncate(n);
            format!("{q} {disj}{}: {sig} | {body}", names.join(", "))
        }
    }
}

/// A `run` command with a random body and scopes of at most 2.
pub fn random_command(m: &RandomModel, rng: &mut impl Rng) -> String {
    let body = random_formula(m, rng, 3, &mut Vec::new());
    format!("run {{ {body} }} for {}", scopes(m, rng))
}

fn scopes(m: &RandomModel, rng: &mut impl Rng) -> String {
    let parts: Vec<String> = m
        .top_level()
        .map(|s| {
            let exactly = if rng.gen_bool(0.2) { "exactly " } else { "" };
            format!("{exactly}{} {}", rng.gen_range(0..=2), s.name)
        })
        .collect();
    parts.join(", ")
}

/// A `some disj` command assigning random values to every relation.
/// The values need not respect the declarations.
pub fn random_valuation(m: &RandomModel, rng: &mut impl Rng) -> String {
    let mut atoms: Vec<(String, Vec<String>)> = Vec::new();
    let mut decls = Vec::new();
    let mut scope = Vec::new();
    for s in m.top_level() {
        let k = rng.gen_range(0..=2);
        let names: Vec<String> = (0..k).map(|j| format!("{}{j}", s.name.to_lowercase())).collect();
        if !names.is_empty() {
            decls.push(format!("disj {} : {}", names.join(", "), s.name));
        }
        scope.push(format!("{} {}", (k + rng.gen_range(0..=1)).min(2), s.name));
        atoms.push((s.name.clone(), names));
    }
    let of = |s: &str| atoms.iter().find(|(n, _)| n == m.top_of(s)).unwrap().1.clone();
    let set = |xs: &[String]| if xs.is_empty() { "none".to_string() } else { xs.join(" + ") };
    let mut eqs = Vec::new();
    let mut values: Vec<(String, Vec<String>)> = Vec::new();
    for s in &m.sigs {
        let pool = match &s.parent {
            Some((p, _)) if rng.gen_bool(0.9) => values.iter().find(|(n, _)| n == p).unwrap().1.clone(),
            _ => of(&s.name),
        };
        let chosen: Vec<String> = if s.parent.is_none() && rng.gen_bool(0.9) {
            pool
        } else {
            pool.into_iter().filter(|_| rng.gen_bool(0.5)).collect()
        };
        eqs.push(format!("{} = {}", s.name, set(&chosen)));
        values.push((s.name.clone(), chosen));
    }
    for f in &m.fields {
        let mut tuples = Vec::new();
        for a in &of(&f.owner) {
            for b in &of(&f.column) {
                if rng.gen_bool(0.4) {
                    tuples.push(format!("{a}->{b}"));
                }
            }
        }
        let v = if tuples.is_empty() { "none->none".to_string() } else { tuples.join(" + ") };
        eqs.push(format!("{} = {}", f.name, v));
    }
    if let Some(o) = &m.ordered {
        if rng.gen_bool(0.8) {
            let mut xs = of(o);
            xs.shuffle(rng);
            let v = if xs.len() < 2 || rng.gen_bool(0.1) {
                "none->none".to_string()
            } else {
                xs.windows(2).map(|w| format!("{}->{}", w[0], w[1])).collect::<Vec<_>>().join(" + ")
            };
            eqs.push(format!("{o} <: next = {v}"));
        }
    }
    if rng.gen_bool(0.2) {
        let mut vars: Vars = Vec::new();
        for (s, names) in &atoms {
            vars.extend(names.iter().map(|n| (n.clone(), s.clone())));
        }
        eqs.push(random_formula(m, rng, 1, &mut vars));
    }
    let body = if decls.is_empty() {
        format!("{{ {} }}", eqs.join("\n  "))
    } else {
        format!("some {} {{\n  {}\n}}", decls.join(", "), eqs.join("\n  "))
    };
    format!("run {{ {body} }} for {}", scope.join(", "))
}
