use ftni::faultlab::{flip, Action, Channel, FaultError, FaultProneSystem, FaultSet};
use ftni::gen;
use ftni::machine::*;
use ftni::seccomp::Level;
use proptest::prelude::*;

fn cfg(width: u32, cells: usize) -> MachineConfig {
    MachineConfig::new(width, MachineConfig::default_registers(), vec![Level::L; cells])
}

fn state(c: &MachineConfig) -> MachineState {
    c.initial_state()
}

#[test]
fn label_resolution() {
    let p = assemble("nop\nl1: jmp l1\n").unwrap();
    assert_eq!(p.resolve_label("l1").unwrap(), 1);
    let p = assemble("l0: nop\n").unwrap();
    assert_eq!(p.resolve_label("l0").unwrap(), 0);
    let p = assemble("nop\n").unwrap();
    assert!(matches!(p.resolve_label("lX"), Err(MachineError::UnknownLabel(_))));
    assert!(matches!(assemble("jmp nowhere\n"), Err(MachineError::UnknownLabel(_))));
}

#[test]
fn load_reads_memory() {
    let c = cfg(8, 6);
    let p = assemble("load r0 5").unwrap();
    let mut s = state(&c);
    s.mem[5] = 3;
    let (a, t) = step(&p, &c, &s).unwrap();
    assert_eq!(a, Action::Tau);
    assert_eq!((t.regs[0], t.pc), (3, 1));
}

#[test]
fn jz_taken_and_not_taken() {
    let c = cfg(8, 0);
    let p = assemble("jz l0 r0\nnop\nl0: nop").unwrap();
    let s = state(&c);
    assert_eq!(step(&p, &c, &s).unwrap().1.pc, 2);
    let mut s = state(&c);
    s.regs[0] = 1;
    assert_eq!(step(&p, &c, &s).unwrap().1.pc, 1);
}

#[test]
fn out_emits_register_value_and_touches_nothing() {
    let c = cfg(8, 1);
    let p = assemble("out low r0").unwrap();
    let mut s = state(&c);
    s.regs[0] = 2;
    let (a, t) = step(&p, &c, &s).unwrap();
    assert_eq!(a, Action::Out(Channel::Low, 2));
    assert_eq!((t.regs.clone(), t.mem.clone(), t.pc), (s.regs, s.mem, 1));
}

#[test]
fn every_rule() {
    let c = cfg(8, 2);
    let p = assemble(
        "movek r0 200\n\
         movek r1 100\n\
         add r0 r1\n\
         store 1 r0\n\
         mover r2 r0\n\
         sub r2 r1\n\
         mul r1 r1\n\
         and r0 r1\n\
         jmp end\n\
         movek r3 9\n\
         end: nop",
    )
    .unwrap();
    let (trace, s, halted) = run(&p, &c, state(&c), 100);
    assert!(halted);
    assert!(trace.iter().all(|a| *a == Action::Tau));
    // 200 + 100 wraps to 44; 44 - 100 wraps to 200; 100 * 100 = 10000 = 16 mod 256
    assert_eq!(s.mem[1], 44);
    assert_eq!(s.regs[2], 200);
    assert_eq!(s.regs[1], 16);
    assert_eq!(s.regs[0], 44 & 16);
    assert_eq!(s.regs[3], 0);
    assert_eq!(s.pc, p.len());
    assert!(s.is_stuck(&p));
    assert!(step(&p, &c, &s).is_none());
}

#[test]
fn jlez_reads_twos_complement() {
    assert!(signed_le_zero(0, 8));
    assert!(signed_le_zero(0x80, 8));
    assert!(signed_le_zero(0xff, 8));
    assert!(!signed_le_zero(1, 8));
    assert!(!signed_le_zero(0x7f, 8));
    assert!(signed_le_zero(1, 1));
    let c = cfg(8, 0).with_jlez(true);
    let p = assemble("jlez out r0\nnop\nout: nop").unwrap();
    let mut s = state(&c);
    s.regs[0] = 0xfe;
    assert_eq!(step(&p, &c, &s).unwrap().1.pc, 2);
    s.regs[0] = 5;
    assert_eq!(step(&p, &c, &s).unwrap().1.pc, 1);
}

#[test]
fn config_validation() {
    let p = assemble("jlez x r0\nx: nop").unwrap();
    assert!(cfg(8, 0).validate(&p).is_err());
    assert!(cfg(8, 0).with_jlez(true).validate(&p).is_ok());
    assert!(cfg(8, 0).validate(&assemble("load r9 0").unwrap()).is_err());
    assert!(cfg(8, 2).validate(&assemble("load r0 2").unwrap()).is_err());
    assert!(cfg(2, 0).validate(&assemble("movek r0 4").unwrap()).is_err());
    assert!(cfg(2, 0).validate(&assemble("movek r0 3").unwrap()).is_ok());
    assert!(cfg(0, 0).validate(&Program::empty()).is_err());
}

#[test]
fn encoding_is_lsb_first_with_tolerant_pc() {
    let c = MachineConfig::new(2, vec![Level::L], vec![]);
    let sys = RiscSystem::new(assemble("nop").unwrap(), c.clone()).unwrap();
    let mut s = state(&c);
    s.regs[0] = 2;
    let bits = sys.encode(&s);
    let layout = sys.layout();
    assert!(!bits.get(layout.lookup("r0_0").unwrap()));
    assert!(bits.get(layout.lookup("r0_1").unwrap()));
    let pc = layout.lookup("pc_0").unwrap();
    assert!(!layout.is_faulty(pc));
    assert!(matches!(flip(layout, &bits, &FaultSet::new(vec![pc])), Err(FaultError::TolerantLocation(_))));
    assert_eq!(reg_bit_name(3, 1), "r3_1");
    assert_eq!(mem_bit_name(0, 2), "m0_2");
}

#[test]
fn pc_bits_cover_the_halted_position() {
    let p = assemble("nop\nnop\nnop\nnop").unwrap();
    let sys = RiscSystem::new(p, cfg(1, 0)).unwrap();
    let mut s = state(sys.config());
    s.pc = 4;
    assert_eq!(sys.decode(&sys.encode(&s)), s);
    assert!(sys.step(&sys.encode(&s)).is_none());
}

#[test]
fn encode_decode_exhaustive_small() {
    let c = MachineConfig::new(2, vec![Level::L, Level::H], vec![Level::H]);
    let sys = RiscSystem::new(assemble("nop\nnop").unwrap(), c.clone()).unwrap();
    for pc in 0..=2 {
        for code in 0u64..64 {
            let s = MachineState { pc, regs: vec![code & 3, code >> 2 & 3], mem: vec![code >> 4] };
            assert_eq!(sys.decode(&sys.encode(&s)), s);
        }
    }
}

#[test]
fn risc_system_steps_like_the_machine() {
    let c = cfg(8, 1);
    let p = assemble("movek r0 7\nstore 0 r0\nout low r0").unwrap();
    let sys = RiscSystem::new(p.clone(), c.clone()).unwrap();
    let mut s = state(&c);
    let mut bits = sys.encode(&s);
    while let Some((a, t)) = step(&p, &c, &s) {
        let (b, u) = sys.step(&bits).unwrap();
        assert_eq!((a, sys.decode(&u)), (b, t.clone()));
        s = t;
        bits = u;
    }
    assert!(sys.step(&bits).is_none());
}

#[test]
fn assembler_accepts_labels_comments_and_standalone_labels() {
    let p = assemble("l0: movek r0 1\nout low r0").unwrap();
    assert_eq!(p.len(), 2);
    let p = assemble("# header\nstart:\n  movek r0 1 # set\n  jz start r0\n").unwrap();
    assert_eq!(p.resolve_label("start").unwrap(), 0);
    assert_eq!(p.len(), 2);
}

#[test]
fn assembler_errors() {
    assert!(matches!(assemble("l0: nop\nl0: nop"), Err(MachineError::DuplicateLabel { .. })));
    match assemble("nop\n  frob r0") {
        Err(MachineError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 3)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(assemble("movek r0"), Err(MachineError::Parse { .. })));
    assert!(matches!(assemble("out middle r0"), Err(MachineError::Parse { .. })));
    assert!(assemble("dangling:").is_err());
}

#[test]
fn disassembly_is_canonical() {
    let messy = "a:   movek   r0 1\n\n   out low r0   # comment\nb: jz a r0";
    let p = assemble(messy).unwrap();
    let text = disassemble(&p);
    assert_eq!(assemble(&text).unwrap(), p);
    assert_eq!(disassemble(&assemble(&text).unwrap()), text);
}

fn any_state(c: &MachineConfig, pcs: usize) -> impl Strategy<Value = MachineState> {
    let m = c.mask();
    (0..=pcs, prop::collection::vec(0..=m, c.registers.len()), prop::collection::vec(0..=m, c.memory.len()))
        .prop_map(|(pc, regs, mem)| MachineState { pc, regs, mem })
}

proptest! {
    #[test]
    fn assemble_disassemble_round_trip(seed in any::<u64>(), len in 1usize..12, disciplined in any::<bool>()) {
        let p = gen::random_program(&mut gen::rng(seed), len, disciplined);
        let text = disassemble(&p);
        prop_assert_eq!(assemble(&text).unwrap(), p);
    }

    #[test]
    fn decode_inverts_encode(s in any_state(&MachineConfig::new(5, vec![Level::L, Level::H, Level::H], vec![Level::L, Level::H]), 3)) {
        let c = MachineConfig::new(5, vec![Level::L, Level::H, Level::H], vec![Level::L, Level::H]);
        let sys = RiscSystem::new(assemble("nop\nnop\nnop").unwrap(), c).unwrap();
        prop_assert_eq!(sys.decode(&sys.encode(&s)), s);
    }

    #[test]
    fn arithmetic_stays_in_the_word(a in 0u64..256, b in 0u64..256) {
        for op in [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::And] {
            prop_assert!(op.apply(a, b, 0xff) <= 0xff);
        }
        prop_assert_eq!(BinOp::Sub.apply(BinOp::Add.apply(a, b, 0xff), b, 0xff), a);
    }

    #[test]
    fn only_out_is_visible(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let sys = gen::random_risc_system(&mut rng, false);
        let c = sys.config().clone();
        let p = sys.program().clone();
        let mut s = c.initial_state();
        for _ in 0..10 {
            let before = s.clone();
            let Some(a) = step_in_place(&p, &c, &mut s) else { break };
            let is_out = matches!(p.get(before.pc).unwrap().body, Body::Out(..));
            prop_assert_eq!(a != Action::Tau, is_out);
            if is_out {
                prop_assert_eq!((&before.regs, &before.mem), (&s.regs, &s.mem));
            }
        }
    }
}
