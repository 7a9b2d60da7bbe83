import pytest

from rmcfence import ir
from conftest import CORPUS_NAMES, load_corpus, parse_valid


def test_parse_mp_sender_shape():
    funcs = ir.parse(load_corpus("mp"))
    send = next(f for f in funcs if f.name == "send")
    assert len(send.blocks) == 1
    assert len(send.actions()) == 2
    assert len(send.decls) == 1
    assert send.decls[0].kind == "vo"


def test_parse_degenerate_function():
    (f,) = ir.parse("func f { block e: ret }")
    assert f.entry == "e"
    assert f.blocks["e"].instrs == []
    assert isinstance(f.blocks["e"].term, ir.Ret)


def test_undefined_value_is_rejected():
    with pytest.raises(ir.ParseError, match="undefined value"):
        ir.parse("func f { block e: write @x %v ret }")


def test_undefined_block_is_rejected():
    with pytest.raises(ir.ParseError, match="undefined block"):
        ir.parse("func f { block e: jmp nowhere }")


def test_duplicate_value_definition():
    with pytest.raises(ir.ParseError, match="duplicate definition"):
        ir.parse("func f { block e: %v = read @x %v = read @y ret }")


def test_duplicate_block():
    with pytest.raises(ir.ParseError, match="duplicate block"):
        ir.parse("func f { block e: jmp e block e: ret }")


def test_duplicate_function():
    with pytest.raises(ir.ParseError, match="duplicate function"):
        ir.parse("func f { block e: ret } func f { block e: ret }")


def test_reserved_tags_cannot_label_actions():
    with pytest.raises(ir.ParseError, match="reserved"):
        ir.parse("func f { block e: write @x 1 label pre ret }")


def test_pre_post_misuse():
    with pytest.raises(ir.ParseError, match="'post' may only appear as a destination"):
        ir.parse("func f { edge vo post -> a; block e: write @x 1 label a ret }")
    with pytest.raises(ir.ParseError, match="'pre' may only appear as a source"):
        ir.parse("func f { edge vo a -> pre; block e: write @x 1 label a ret }")
    with pytest.raises(ir.ParseError, match="same declaration"):
        ir.parse("func f { edge vo pre -> post; block e: ret }")
    with pytest.raises(ir.ParseError, match="binding point"):
        ir.parse(
            "func f { edge xo here(b) pre -> a; block e: bind b write @x 1 label a ret }"
        )


def test_noop_requires_label():
    with pytest.raises(ir.ParseError, match="noop requires a label"):
        ir.parse("func f { block e: noop ret }")


def test_missing_terminator():
    with pytest.raises(ir.ParseError, match="missing a terminator"):
        ir.parse("func f { block e: write @x 1 block g: ret }")


def test_comments_both_styles():
    (f,) = ir.parse("func f { # hash comment\n block e: ;; semi comment\n ret }")
    assert f.blocks["e"].instrs == []


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_print_parse_round_trip(name):
    funcs = ir.parse(load_corpus(name))
    for f in funcs:
        text = ir.print_function(f)
        (f2,) = ir.parse(text)
        assert ir.print_function(f2) == text


def test_validate_clean_corpus():
    for name in CORPUS_NAMES:
        parse_valid(load_corpus(name))


def test_validate_phi_arm_mismatch():
    (f,) = ir.parse(
        "func f { block e: br 1 ? a : b block a: jmp c block b: jmp c "
        "block c: %v = phi [a: 1], [e: 2] ret }"
    )
    assert any("do not match" in d.message for d in ir.validate(f))


def test_validate_unlabelled_edge_tag():
    (f,) = ir.parse("func f { edge vo a -> b; block e: write @x 1 label a ret }")
    assert any("labels no action" in d.message for d in ir.validate(f))


def test_validate_use_not_dominated():
    (f,) = ir.parse(
        "func f { block e: br 1 ? a : b block a: %v = read @x jmp c "
        "block b: jmp c block c: write @y %v ret }"
    )
    assert any("not dominated" in d.message for d in ir.validate(f))


def test_validate_entry_with_predecessor():
    (f,) = ir.parse("func f { block e: jmp e }")
    assert any("has predecessors" in d.message for d in ir.validate(f))


def test_validate_unreachable_block():
    (f,) = ir.parse("func f { block e: ret block dead: ret }")
    assert any("unreachable" in d.message for d in ir.validate(f))


# -- normalization ----------------------------------------------------------


def _norm_all():
    for name in CORPUS_NAMES:
        for f in parse_valid(load_corpus(name)):
            yield name, f, ir.normalize(f)


def test_normalize_labeled_actions_isolated():
    for _name, _f, cfg in _norm_all():
        for blk in cfg.blocks.values():
            labeled = [
                i for i in blk.instrs if isinstance(i, ir.Action) and i.labels
            ]
            if labeled:
                assert len(blk.instrs) == 1


def test_normalize_no_critical_edges():
    for _name, _f, cfg in _norm_all():
        succ = cfg.real_succ()
        pred = cfg.real_pred()
        for s, d, pseudo in cfg.edges:
            if not pseudo:
                assert len(succ[s]) == 1 or len(pred[d]) == 1, (s, d)


def test_normalize_pseudo_edges_from_every_return():
    for _name, _f, cfg in _norm_all():
        rets = [b for b, blk in cfg.blocks.items() if isinstance(blk.term, ir.Ret)]
        pseudo = [(s, d) for s, d, p in cfg.edges if p]
        assert sorted(pseudo) == sorted((b, cfg.entry) for b in rets)


def test_normalize_entry_is_label_free():
    for _name, _f, cfg in _norm_all():
        for i in cfg.blocks[cfg.entry].instrs:
            assert not (isinstance(i, ir.Action) and i.labels)


def test_normalize_preserves_actions_and_decls():
    for _name, f, cfg in _norm_all():
        assert set(cfg.actions) == set(f.actions())
        assert cfg.func.decls == f.decls


def test_normalize_stable_when_already_normal():
    (f,) = ir.parse("func f { block e: %v = read @x br %v ? a : b block a: ret block b: ret }")
    cfg = ir.normalize(f)
    assert set(cfg.blocks) == set(f.blocks)


def test_two_labeled_writes_chain():
    (f,) = ir.parse(
        "func f { block e: write @a 1 label x write @b 2 label y ret }"
    )
    cfg = ir.normalize(f)
    # entry stays label-free, each write gets its own block
    assert len([b for b in cfg.blocks if not b.startswith("crit.")]) == 3


def test_dominators_diamond():
    dom = ir.compute_dominators(
        ["e", "a", "b", "j"],
        "e",
        lambda b: {"e": ["a", "b"], "a": ["j"], "b": ["j"], "j": []}[b],
    )
    assert dom["j"] == {"e", "j"}
    assert dom["a"] == {"e", "a"}
