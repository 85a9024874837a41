use super::*;
use crate::rdf::Ontology;
use crate::validate::Validator;

const PREFIXES: &str = "@prefix : <http://example.org/insurance#> .\n\
@prefix rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#> .\n\
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
@prefix owl: <http://www.w3.org/2002/07/owl#> .\n\
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n";

fn validator(ttl: &str) -> Validator {
    Validator::new(Ontology::from_turtle(&format!("{PREFIXES}{ttl}"), None).unwrap())
}

fn messages(v: &Validator, query: &str) -> Vec<String> {
    v.check_query(query)
        .unwrap()
        .report
        .messages()
        .into_iter()
        .map(String::from)
        .collect()
}

fn rules(v: &Validator, query: &str) -> Vec<RuleId> {
    v.check_query(query)
        .unwrap()
        .report
        .violations
        .iter()
        .map(|v| v.rule)
        .collect()
}

const SOLD_BY: &str = ":soldByAgent rdfs:domain :Policy ; rdfs:range :Agent .";

const CLAIMS: &str =
    ":against a owl:ObjectProperty ; rdfs:domain :Claim ; rdfs:range :PolicyCoverageDetail .\n\
:hasPolicy a owl:ObjectProperty ; rdfs:domain :PolicyCoverageDetail ; rdfs:range :Policy .\n\
:soldByAgent a owl:ObjectProperty ; rdfs:domain :Policy ; rdfs:range :Agent .\n\
:name a owl:DatatypeProperty ; rdfs:domain :Agent ; rdfs:range xsd:string .";

#[test]
fn domain_golden_sentence() {
    let v = validator(SOLD_BY);
    let report = v
        .check_query(
            "SELECT ?agent ?policy WHERE { ?agent :soldByAgent ?policy . ?agent rdf:type :Agent }",
        )
        .unwrap()
        .report;
    let domain: Vec<_> = report
        .violations
        .iter()
        .filter(|x| x.rule == RuleId::Domain)
        .collect();
    assert_eq!(domain.len(), 1);
    assert_eq!(
        domain[0].message,
        "The property :soldByAgent has domain :Policy, but its subject ?agent is a :Agent, which isn't a subclass of :Policy."
    );
    let qq = crate::rdf::DEFAULT_QQ_NAMESPACE;
    assert_eq!(domain[0].bindings["s"], Term::iri(format!("{qq}agent")));
    assert_eq!(
        domain[0].bindings["class"],
        Term::iri("http://example.org/insurance#Agent")
    );
}

#[test]
fn correct_direction_passes() {
    let v = validator(CLAIMS);
    let report = v
        .check_query("SELECT ?name WHERE { ?policy :soldByAgent ?agent . ?policy rdf:type :Policy . ?agent :name ?name }")
        .unwrap()
        .report;
    assert!(report.passed, "{:?}", report.messages());
}

#[test]
fn range_golden_sentence() {
    let v = validator(CLAIMS);
    let msgs = messages(
        &v,
        "SELECT ?n WHERE { ?claim :against ?policy . ?policy rdf:type :Policy . ?claim :name ?n }",
    );
    assert!(msgs.contains(&"The property :against has range :PolicyCoverageDetail, but its object ?policy is a :Policy, which isn't a subclass of :PolicyCoverageDetail.".to_string()), "{msgs:?}");
}

#[test]
fn double_range_golden_sentence() {
    let v = validator(CLAIMS);
    let msgs = messages(
        &v,
        "SELECT ?n WHERE { ?claim :against ?policy . ?policyCoverageDetail :hasPolicy ?policy }",
    );
    assert!(msgs.contains(
        &"The property :against has range :PolicyCoverageDetail, and :hasPolicy has range :Policy, and these are incompatible."
            .to_string()
    ));
    // Both orderings of the pair fire, as in the printed query.
    assert!(msgs.contains(
        &"The property :hasPolicy has range :Policy, and :against has range :PolicyCoverageDetail, and these are incompatible."
            .to_string()
    ));
}

#[test]
fn domain_respects_subclass_chain() {
    let v = validator(&format!(
        "{SOLD_BY}\n:Gold rdfs:subClassOf :Premium . :Premium rdfs:subClassOf :Policy ."
    ));
    let q = "SELECT ?n WHERE { ?x :soldByAgent ?y . ?x a :Gold }";
    assert!(!rules(&v, q).contains(&RuleId::Domain));
    let q = "SELECT ?n WHERE { ?x :soldByAgent ?y . ?x a :Policy }";
    assert!(!rules(&v, q).contains(&RuleId::Domain));
}

#[test]
fn subclass_cycles_terminate() {
    let v = validator(&format!(
        "{SOLD_BY}\n:A rdfs:subClassOf :B . :B rdfs:subClassOf :A ."
    ));
    let r = rules(&v, "SELECT ?n WHERE { ?x :soldByAgent ?y . ?x a :A }");
    assert!(r.contains(&RuleId::Domain));
}

#[test]
fn untyped_object_and_blank_range_do_not_fire() {
    let v = validator(":p rdfs:range [ owl:unionOf ( :A :B ) ] . :q rdfs:range :C .");
    let r = rules(&v, "SELECT ?n WHERE { ?x :p ?y . ?y a :Z . ?x :q ?w }");
    assert!(!r.contains(&RuleId::Range));
}

#[test]
fn double_domain_fires_for_unrelated_domains() {
    let v = validator(CLAIMS);
    let msgs = messages(
        &v,
        "SELECT ?n WHERE { ?x :against ?a . ?x :soldByAgent ?b }",
    );
    assert!(msgs.contains(
        &"The property :against has domain :Claim, and :soldByAgent has domain :Policy, and these are incompatible."
            .to_string()
    ));
    let r = rules(
        &v,
        "SELECT ?n WHERE { ?x :soldByAgent ?a . ?x :soldByAgent ?b }",
    );
    assert!(!r.contains(&RuleId::DoubleDomain));
}

#[test]
fn domain_range_chain() {
    let v = validator(CLAIMS);
    let msgs = messages(
        &v,
        "SELECT ?n WHERE { ?x :against ?y . ?y :soldByAgent ?z }",
    );
    assert!(msgs.contains(
        &"The property :against has range :PolicyCoverageDetail, and :soldByAgent has domain :Policy, and these are incompatible with the query."
            .to_string()
    ));
    let r = rules(
        &v,
        "SELECT ?n WHERE { ?x :hasPolicy ?y . ?y :soldByAgent ?z }",
    );
    assert!(!r.contains(&RuleId::DomainRange));
    let v = validator(&format!(
        "{CLAIMS}\n:PolicyCoverageDetail rdfs:subClassOf :Policy ."
    ));
    let r = rules(
        &v,
        "SELECT ?n WHERE { ?x :against ?y . ?y :soldByAgent ?z }",
    );
    assert!(!r.contains(&RuleId::DomainRange));
}

#[test]
fn incorrect_property() {
    let v = validator(&format!("{CLAIMS}\n:loose rdfs:domain :Claim ."));
    let msgs = messages(&v, "SELECT ?n WHERE { ?x :madeUpProp ?n }");
    assert_eq!(
        msgs,
        vec!["The property :madeUpProp isn't defined in the ontology. Please only use properties from the ontology, or from a standard source like rdf:, rdfs:, owl:, or skos:"]
    );
    assert!(rules(
        &v,
        "SELECT ?n WHERE { ?x rdf:type ?n . ?x rdfs:comment ?n }"
    )
    .is_empty());
    // Mentioned only through rdfs:domain: the printed rule still fires.
    assert_eq!(
        rules(&v, "SELECT ?n WHERE { ?x :loose ?n }"),
        vec![RuleId::IncorrectProperty]
    );
    let lenient =
        validator(&format!("{CLAIMS}\n:loose rdfs:domain :Claim .")).with_config(CheckConfig {
            accept_schema_mentions: true,
            ..CheckConfig::default()
        });
    assert!(rules(&lenient, "SELECT ?n WHERE { ?x :loose ?n }").is_empty());
    // A variable predicate is not a property name.
    assert!(rules(&v, "SELECT ?n WHERE { ?x ?p ?n }").is_empty());
}

#[test]
fn iri_output() {
    let v = validator(CLAIMS);
    assert_eq!(
        messages(&v, "SELECT ?policy WHERE { ?c :against ?policy }"),
        vec!["Your selected variable ?policy is an IRI; your output should be something human readable, an ID or a label."]
    );
    assert!(messages(&v, "SELECT ?n WHERE { ?a :name ?n }").is_empty());
    let strict = validator(CLAIMS).with_config(CheckConfig::paper_strict());
    assert_eq!(
        rules(&strict, "SELECT ?n WHERE { ?a :name ?n }"),
        vec![RuleId::IriOutput]
    );
}

#[test]
fn subject_output() {
    let v = validator(CLAIMS);
    let msgs = messages(&v, "SELECT ?agent WHERE { ?agent :name ?n }");
    assert_eq!(
        msgs,
        vec!["Your selected variable ?agent is an IRI (the subject of a triple is always an IRI). Your output should be something human readable, an ID or a label."]
    );
    assert!(messages(&v, "SELECT ?name WHERE { ?agent :name ?name }").is_empty());
    // Marker triples do not count as subject occurrences.
    assert!(messages(&v, "SELECT ?x WHERE { }").is_empty());
    // Label lookups are excluded unless paper-strict.
    let q = "SELECT ?a ?l WHERE { ?a rdfs:label ?l }";
    assert!(rules(&v, q).is_empty());
    let strict = validator(CLAIMS).with_config(CheckConfig::paper_strict());
    assert_eq!(rules(&strict, q), vec![RuleId::SubjectOutput]);
}

#[test]
fn variable_named_variable_renders_plainly() {
    let v = validator(CLAIMS);
    let msgs = messages(&v, "SELECT ?Variable WHERE { ?Variable :name ?n }");
    assert_eq!(msgs.len(), 1);
    assert!(msgs[0].starts_with("Your selected variable ?Variable is an IRI (the subject"));
}

#[test]
fn multiple_domains_each_checked() {
    let v = validator(":p a owl:ObjectProperty ; rdfs:domain :A , :B .");
    let msgs = messages(&v, "SELECT ?n WHERE { ?x :p ?n . ?x a :A }");
    assert_eq!(
        msgs,
        vec![
            "The property :p has domain :B, but its subject ?x is a :A, which isn't a subclass of :B.",
            // One pattern, two unrelated declared domains.
            "The property :p has domain :A, and :p has domain :B, and these are incompatible.",
            "The property :p has domain :B, and :p has domain :A, and these are incompatible.",
        ]
    );
}

#[test]
fn report_is_sorted_and_deduplicated() {
    let v = validator(CLAIMS);
    let report = v
        .check_query("SELECT ?agent ?p WHERE { ?agent :soldByAgent ?p . ?agent :soldByAgent ?q . ?agent a :Agent . ?p a :Agent }")
        .unwrap()
        .report;
    let ids: Vec<_> = report.violations.iter().map(|v| v.rule).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    let unique: BTreeSet<_> = report
        .violations
        .iter()
        .map(|v| (v.rule, &v.message))
        .collect();
    assert_eq!(unique.len(), report.violations.len());
    assert!(!report.passed);
}

#[test]
fn templates_mention_every_placeholder() {
    for rule in RuleId::ALL {
        for name in rule.placeholders() {
            assert!(
                rule.template().contains(&format!("{{{name}}}")),
                "{rule} {name}"
            );
        }
        assert_eq!(rule.name().parse::<RuleId>(), Ok(rule));
        assert_eq!(rule.label().parse::<RuleId>(), Ok(rule));
    }
}

#[test]
fn report_json_shape() {
    let v = validator(SOLD_BY);
    let report = v
        .check_query("SELECT ?agent WHERE { ?agent :soldByAgent ?policy . ?agent rdf:type :Agent }")
        .unwrap()
        .report;
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["passed"], false);
    assert_eq!(json["violations"][0]["rule"], "Domain");
    assert_eq!(
        json["violations"][0]["bindings"]["dom"],
        "<http://example.org/insurance#Policy>"
    );
}
