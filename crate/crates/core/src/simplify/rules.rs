use egg::{Applier, ConditionalApplier, Id, Pattern, PatternAst, Rewrite, Subst, Symbol, Var};

use super::lang::{EyeDim, MatAnalysis, MatEGraph, MatLang, ZeroDim};

/// Right-hand side of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rhs {
    Pattern(&'static str),
    /// Zero matrix with the matched class's shape.
    ZeroLike,
    /// Identity with the matched class's shape.
    EyeLike,
}

/// Side condition on a pattern variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    None,
    IsEye(&'static str),
    IsZero(&'static str),
    ConstZero(&'static str),
}

/// One rewrite rule in table form. Variable names follow a convention used
/// by the rule tests: `?s`/`?t` scalars, `?k` a zero scalar, `?e` an
/// identity, `?z` a zero matrix, anything else a square matrix.
#[derive(Debug, Clone, Copy)]
pub struct RuleSpec {
    pub name: &'static str,
    pub lhs: &'static str,
    pub rhs: Rhs,
    pub guard: Guard,
    pub both_ways: bool,
}

const fn rule(
    name: &'static str,
    lhs: &'static str,
    rhs: &'static str,
    both_ways: bool,
) -> RuleSpec {
    RuleSpec {
        name,
        lhs,
        rhs: Rhs::Pattern(rhs),
        guard: Guard::None,
        both_ways,
    }
}

const fn guarded(name: &'static str, lhs: &'static str, rhs: Rhs, guard: Guard) -> RuleSpec {
    RuleSpec {
        name,
        lhs,
        rhs,
        guard,
        both_ways: false,
    }
}

pub const RULES: &[RuleSpec] = &[
    rule(
        "mul-assoc",
        "(mul ?a (mul ?b ?c))",
        "(mul (mul ?a ?b) ?c)",
        true,
    ),
    rule(
        "mul-dist-l",
        "(mul ?a (add ?b ?c))",
        "(add (mul ?a ?b) (mul ?a ?c))",
        true,
    ),
    rule(
        "mul-dist-r",
        "(mul (add ?a ?b) ?c)",
        "(add (mul ?a ?c) (mul ?b ?c))",
        true,
    ),
    rule("add-comm", "(add ?a ?b)", "(add ?b ?a)", false),
    rule(
        "add-assoc",
        "(add ?a (add ?b ?c))",
        "(add (add ?a ?b) ?c)",
        true,
    ),
    rule("neg-as-scale", "(neg ?a)", "(scale -1 ?a)", true),
    rule("neg-neg", "(neg (neg ?a))", "?a", false),
    rule("neg-mul-l", "(neg (mul ?a ?b))", "(mul (neg ?a) ?b)", true),
    rule("neg-mul-r", "(neg (mul ?a ?b))", "(mul ?a (neg ?b))", true),
    rule(
        "neg-add",
        "(neg (add ?a ?b))",
        "(add (neg ?a) (neg ?b))",
        true,
    ),
    rule(
        "scale-fuse",
        "(scale ?s (scale ?t ?a))",
        "(scale (smul ?s ?t) ?a)",
        false,
    ),
    rule(
        "scale-mul-l",
        "(scale ?s (mul ?a ?b))",
        "(mul (scale ?s ?a) ?b)",
        true,
    ),
    rule(
        "scale-mul-r",
        "(scale ?s (mul ?a ?b))",
        "(mul ?a (scale ?s ?b))",
        true,
    ),
    rule(
        "scale-add",
        "(scale ?s (add ?a ?b))",
        "(add (scale ?s ?a) (scale ?s ?b))",
        true,
    ),
    rule(
        "like-terms",
        "(add (scale ?s ?a) (scale ?t ?a))",
        "(scale (sadd ?s ?t) ?a)",
        false,
    ),
    rule(
        "like-terms-1",
        "(add ?a (scale ?s ?a))",
        "(scale (sadd 1 ?s) ?a)",
        false,
    ),
    rule("scale-one", "(scale 1 ?a)", "?a", false),
    guarded(
        "scale-zero",
        "(scale ?k ?a)",
        Rhs::ZeroLike,
        Guard::ConstZero("?k"),
    ),
    guarded("add-neg", "(add ?a (neg ?a))", Rhs::ZeroLike, Guard::None),
    guarded("inv-l", "(mul (inv ?a) ?a)", Rhs::EyeLike, Guard::None),
    guarded("inv-r", "(mul ?a (inv ?a))", Rhs::EyeLike, Guard::None),
    rule("inv-inv", "(inv (inv ?a))", "?a", false),
    guarded(
        "eye-l",
        "(mul ?e ?a)",
        Rhs::Pattern("?a"),
        Guard::IsEye("?e"),
    ),
    guarded(
        "eye-r",
        "(mul ?a ?e)",
        Rhs::Pattern("?a"),
        Guard::IsEye("?e"),
    ),
    guarded("eye-t", "(t ?e)", Rhs::Pattern("?e"), Guard::IsEye("?e")),
    guarded(
        "eye-inv",
        "(inv ?e)",
        Rhs::Pattern("?e"),
        Guard::IsEye("?e"),
    ),
    guarded(
        "zero-mul-l",
        "(mul ?z ?a)",
        Rhs::ZeroLike,
        Guard::IsZero("?z"),
    ),
    guarded(
        "zero-mul-r",
        "(mul ?a ?z)",
        Rhs::ZeroLike,
        Guard::IsZero("?z"),
    ),
    guarded(
        "zero-add",
        "(add ?z ?a)",
        Rhs::Pattern("?a"),
        Guard::IsZero("?z"),
    ),
    guarded(
        "zero-neg",
        "(neg ?z)",
        Rhs::Pattern("?z"),
        Guard::IsZero("?z"),
    ),
    guarded("zero-t", "(t ?z)", Rhs::ZeroLike, Guard::IsZero("?z")),
    rule("t-mul", "(t (mul ?a ?b))", "(mul (t ?b) (t ?a))", true),
    rule("t-inv", "(t (inv ?a))", "(inv (t ?a))", true),
    rule("t-t", "(t (t ?a))", "?a", false),
    rule("t-add", "(t (add ?a ?b))", "(add (t ?a) (t ?b))", true),
    rule("t-scale", "(t (scale ?s ?a))", "(scale ?s (t ?a))", true),
    rule("t-neg", "(t (neg ?a))", "(neg (t ?a))", true),
];

struct ShapedConst {
    eye: bool,
}

impl Applier<MatLang, MatAnalysis> for ShapedConst {
    fn apply_one(
        &self,
        egraph: &mut MatEGraph,
        eclass: Id,
        _subst: &Subst,
        _ast: Option<&PatternAst<MatLang>>,
        _rule: Symbol,
    ) -> Vec<Id> {
        let Some((r, c)) = egraph[eclass].data.shape else {
            return vec![];
        };
        let node = if self.eye {
            if r != c {
                return vec![];
            }
            MatLang::Eye(EyeDim(r))
        } else {
            MatLang::Zero(ZeroDim(r, c))
        };
        let id = egraph.add(node);
        if egraph.union(eclass, id) {
            vec![eclass]
        } else {
            vec![]
        }
    }
}

fn var(name: &str) -> Var {
    name.parse().expect("valid pattern variable")
}

fn pattern(s: &str) -> Pattern<MatLang> {
    s.parse().unwrap_or_else(|e| panic!("bad pattern {s}: {e}"))
}

fn check(guard: Guard) -> impl Fn(&mut MatEGraph, Id, &Subst) -> bool {
    move |egraph: &mut MatEGraph, _id: Id, subst: &Subst| match guard {
        Guard::None => true,
        Guard::IsEye(v) => egraph[subst[var(v)]].data.eye,
        Guard::IsZero(v) => egraph[subst[var(v)]].data.zero,
        Guard::ConstZero(v) => egraph[subst[var(v)]].data.konst == Some(0.0),
    }
}

fn build_one(name: String, lhs: &str, rhs: Rhs, guard: Guard) -> Rewrite<MatLang, MatAnalysis> {
    let searcher = pattern(lhs);
    let condition = check(guard);
    let result = match rhs {
        Rhs::Pattern(p) => Rewrite::new(
            name,
            searcher,
            ConditionalApplier {
                condition,
                applier: pattern(p),
            },
        ),
        Rhs::ZeroLike | Rhs::EyeLike => Rewrite::new(
            name,
            searcher,
            ConditionalApplier {
                condition,
                applier: ShapedConst {
                    eye: rhs == Rhs::EyeLike,
                },
            },
        ),
    };
    result.unwrap_or_else(|e| panic!("bad rule: {e}"))
}

/// Egg rewrites for one rule spec (two for bidirectional rules).
pub fn rewrites_for(spec: &RuleSpec) -> Vec<Rewrite<MatLang, MatAnalysis>> {
    let mut out = vec![build_one(
        spec.name.to_string(),
        spec.lhs,
        spec.rhs,
        spec.guard,
    )];
    if spec.both_ways {
        if let Rhs::Pattern(p) = spec.rhs {
            out.push(build_one(
                format!("{}-rev", spec.name),
                p,
                Rhs::Pattern(spec.lhs),
                Guard::None,
            ));
        }
    }
    out
}

/// The full ruleset.
pub fn ruleset() -> Vec<Rewrite<MatLang, MatAnalysis>> {
    RULES.iter().flat_map(rewrites_for).collect()
}
