use proptest::prelude::*;
use serde_json::json;
use settlesim::network::{
    run_realtime, Behavior, BehaviorState, Component, Network, NetworkError, PortRef, RunResult, StepFunction, Stream,
};
use settlesim::trace::{Direction, ItemKind};
use settlesim::{make_hiaton, TimeTag, TimedItem, TimedStream};

fn behavior_strategy() -> impl Strategy<Value = Behavior> {
    prop_oneof![
        (1usize..3).prop_map(|ports| Behavior::Identity { ports }),
        (1usize..4).prop_map(|in_ports| Behavior::Buffer { in_ports }),
        (1usize..4).prop_map(|out_ports| Behavior::Router {
            out_ports,
            routes: [("q0".to_string(), 0)].into(),
            default_port: out_ports - 1,
        }),
        (1u64..5).prop_map(|period| Behavior::Counter { period }),
    ]
}

/// Where each in-port gets its items from.
#[derive(Clone, Debug)]
enum Feed {
    /// Out-port picked by index into the flat out-port list, with a delay.
    Link(usize, u64),
    /// External stream with the given payload ticks.
    Source(Vec<bool>),
}

#[derive(Clone, Debug)]
struct Plan {
    behaviors: Vec<Behavior>,
    feeds: Vec<Feed>,
    t_end: u64,
}

fn plan_strategy() -> impl Strategy<Value = Plan> {
    (prop::collection::vec(behavior_strategy(), 1..6), 0u64..40).prop_flat_map(|(behaviors, t_end)| {
        let ins: usize = behaviors.iter().map(|b| b.arity().0).sum();
        let outs: usize = behaviors.iter().map(|b| b.arity().1).sum();
        let feed = prop_oneof![
            (0..outs, 1u64..5).prop_map(|(o, d)| Feed::Link(o, d)),
            prop::collection::vec(any::<bool>(), t_end as usize + 1).prop_map(Feed::Source),
        ];
        (Just(behaviors), prop::collection::vec(feed, ins), Just(t_end)).prop_map(|(behaviors, feeds, t_end)| Plan {
            behaviors,
            feeds,
            t_end,
        })
    })
}

fn build(plan: &Plan) -> Network {
    let mut net = Network::new();
    let mut out_ports = Vec::new();
    let mut in_ports = Vec::new();
    for (i, b) in plan.behaviors.iter().enumerate() {
        let id = format!("c{i}");
        let (ins, outs) = b.arity();
        in_ports.extend((0..ins).map(|p| PortRef::new(id.clone(), p)));
        out_ports.extend((0..outs).map(|p| PortRef::new(id.clone(), p)));
        net.add_component(b.clone().component(id).unwrap()).unwrap();
    }
    for (k, (to, feed)) in in_ports.into_iter().zip(&plan.feeds).enumerate() {
        match feed {
            Feed::Link(o, d) => net.connect(out_ports[*o].clone(), to, *d).unwrap(),
            Feed::Source(mask) => {
                let items = mask
                    .iter()
                    .enumerate()
                    .map(|(t, &p)| {
                        if p {
                            let queue = if t % 2 == 0 { "q0" } else { "q1" };
                            TimedItem::payload(t as u64, json!({ "queue": queue, "k": k, "t": t }))
                        } else {
                            make_hiaton(t as u64)
                        }
                    })
                    .collect();
                net.bind_source(to, TimedStream::new(items).unwrap()).unwrap()
            }
        }
    }
    for (i, p) in out_ports.into_iter().enumerate() {
        net.expose_sink(format!("s{i}"), p).unwrap();
    }
    net
}

/// What in-port `port` of `comp` received during the run.
fn received(net: &Network, run: &RunResult, port: &PortRef) -> Stream {
    if let Some(s) = net.sources().iter().find(|s| &s.to == port) {
        return s.stream.clone();
    }
    let ch = net.channels().iter().find(|c| &c.to == port).unwrap();
    run.delivered(ch).unwrap()
}

proptest! {
    #[test]
    fn random_networks_progress_and_conserve(plan in plan_strategy()) {
        let net = build(&plan);
        let t_end = TimeTag(plan.t_end);
        let run = run_realtime(&net, t_end).unwrap();
        let ticks = plan.t_end + 1;

        // Every channel carries exactly one item per tick.
        for ch in net.channels() {
            prop_assert!(run.delivered(ch).unwrap().is_dense(t_end));
        }
        // Every port of every component appears once per tick.
        let ports: u64 = net.components().iter().map(|c| (c.in_ports() + c.out_ports()) as u64).sum();
        prop_assert_eq!(run.trace().len() as u64, ports * ticks);

        // Payloads sent = payloads received + payloads still in flight.
        let events = run.trace().events();
        let count = |p: &PortRef, dir: Direction, from_tick: u64| {
            events
                .iter()
                .filter(|e| {
                    &*e.comp == p.component.as_str()
                        && e.port == p.port
                        && e.dir == dir
                        && e.kind == ItemKind::Payload
                        && e.tick >= from_tick
                })
                .count()
        };
        for ch in net.channels() {
            let sent = count(&ch.from, Direction::Emit, 0);
            let got = count(&ch.to, Direction::Consume, 0);
            let in_flight = count(&ch.from, Direction::Emit, (plan.t_end + 1).saturating_sub(ch.delay));
            prop_assert_eq!(sent, got + in_flight, "channel {}", ch.label());
        }

        // Deterministic.
        let again = run_realtime(&net, t_end).unwrap();
        prop_assert_eq!(again.trace(), run.trace());
    }

    #[test]
    fn components_only_see_their_own_inputs(plan in plan_strategy()) {
        let net = build(&plan);
        let run = run_realtime(&net, TimeTag(plan.t_end)).unwrap();
        for (i, b) in plan.behaviors.iter().enumerate() {
            let id = format!("c{i}");
            let (ins, outs) = b.arity();
            let inputs: Vec<Stream> = (0..ins).map(|p| received(&net, &run, &PortRef::new(id.clone(), p))).collect();
            let mut state = BehaviorState::default();
            let mut emitted: Vec<Vec<TimedItem<serde_json::Value>>> = vec![Vec::new(); outs];
            for t in 0..=plan.t_end {
                let now: Vec<_> = inputs.iter().map(|s| s.items()[t as usize].clone()).collect();
                let (next, out) = b.step(state, TimeTag(t), &now);
                state = next;
                for (p, item) in out.into_iter().enumerate() {
                    emitted[p].push(item);
                }
            }
            prop_assert_eq!(run.state::<BehaviorState>(&id), Some(&state));
            for (p, items) in emitted.iter().enumerate() {
                prop_assert_eq!(run.emitted(&PortRef::new(id.clone(), p)).unwrap().items(), &items[..]);
            }
        }
    }

    #[test]
    fn insertion_order_does_not_matter(plan in plan_strategy()) {
        let net = build(&plan);
        let mut parts: Vec<Component> = net.components().to_vec();
        parts.reverse();
        let shuffled = Network::from_parts(
            parts,
            net.channels().iter().rev().cloned().collect(),
            net.sources().to_vec(),
            net.sinks().to_vec(),
        );
        let a = run_realtime(&net, TimeTag(plan.t_end)).unwrap();
        let b = run_realtime(&shuffled, TimeTag(plan.t_end)).unwrap();
        prop_assert_eq!(a.trace(), b.trace());
    }
}

fn two_cycle() -> Network {
    let mut net = Network::new();
    for id in ["a", "b"] {
        net.add_component(Behavior::Identity { ports: 1 }.component(id).unwrap())
            .unwrap();
    }
    net.connect(PortRef::new("a", 0), PortRef::new("b", 0), 1).unwrap();
    net.connect(PortRef::new("b", 0), PortRef::new("a", 0), 1).unwrap();
    net
}

#[test]
fn two_component_cycle_event_count() {
    let net = two_cycle();
    let run = run_realtime(&net, TimeTag(100)).unwrap();
    // 2 components × (1 in + 1 out) ports × 101 ticks.
    assert_eq!(run.trace().len(), 2 * 2 * 101);
    assert!(run.trace().events().iter().all(|e| e.kind == ItemKind::Hiaton));
}

#[test]
fn horizon_zero_is_one_tick() {
    let run = run_realtime(&two_cycle(), TimeTag(0)).unwrap();
    assert_eq!(run.trace().len(), 4);
}

#[test]
fn step_contract_faults_abort_the_run() {
    for (label, bad) in [
        (
            "silent",
            Component::from_fn("x", 0, 1, (), |s, _t: TimeTag, _i: &[_]| (s, vec![])),
        ),
        (
            "late",
            Component::from_fn("x", 0, 1, (), |s, t: TimeTag, _i: &[_]| (s, vec![make_hiaton(t.0 + 1)])),
        ),
        (
            "chatty",
            Component::from_fn("x", 0, 1, (), |s, t: TimeTag, _i: &[_]| {
                (s, vec![make_hiaton(t), make_hiaton(t)])
            }),
        ),
    ] {
        let mut net = Network::new();
        net.add_component(bad).unwrap();
        match run_realtime(&net, TimeTag(3)) {
            Err(NetworkError::Contract { component, tick, .. }) => {
                assert_eq!(component, "x", "{label}");
                assert_eq!(tick, TimeTag(0), "{label}");
            }
            other => panic!("{label}: unexpected {other:?}"),
        }
    }
}

#[test]
fn fault_in_the_middle_of_a_run_names_the_tick() {
    let mut net = Network::new();
    net.add_component(Component::from_fn("flaky", 0, 1, 0u64, |n, t: TimeTag, _i: &[_]| {
        let out = if n == 5 { vec![] } else { vec![make_hiaton(t)] };
        (n + 1, out)
    }))
    .unwrap();
    match run_realtime(&net, TimeTag(20)) {
        Err(NetworkError::Contract { tick, .. }) => assert_eq!(tick, TimeTag(5)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_networks_are_refused() {
    let mut net = Network::new();
    net.add_component(Behavior::Identity { ports: 1 }.component("a").unwrap())
        .unwrap();
    assert!(matches!(
        net.connect(PortRef::new("a", 0), PortRef::new("a", 0), 0),
        Err(NetworkError::ZeroDelay)
    ));
    assert!(matches!(
        net.connect(PortRef::new("a", 1), PortRef::new("a", 0), 1),
        Err(NetworkError::PortOutOfRange { .. })
    ));
    assert!(matches!(
        net.add_component(Behavior::Identity { ports: 1 }.component("a").unwrap()),
        Err(NetworkError::DuplicateComponent(_))
    ));
    // Unfed in-port.
    let err = run_realtime(&net, TimeTag(1)).unwrap_err();
    assert!(err.to_string().contains("a:0"), "{err}");

    let sparse = TimedStream::new(vec![TimedItem::payload(1, json!(1))]).unwrap();
    net.bind_source(PortRef::new("a", 0), sparse).unwrap();
    assert!(matches!(
        run_realtime(&net, TimeTag(1)),
        Err(NetworkError::SourceNotDense { .. })
    ));
}
