import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flakecause.augment import AugmentationConfig, _declared_names, augment_corpus, augment_test
from flakecause.corpus import Category, corpus_stats
from flakecause.errors import DataError
from flakecause.javatok import TokenKind, segment_statements, tokenize

from test_corpus import make_test


CONFIG = AugmentationConfig(copies_per_test=2, seed=42)


class TestDeclaredNames:
    def test_simple_declaration(self):
        assert _declared_names(tokenize("int count = 5;")) == ["count"]

    def test_declaration_without_init(self):
        assert _declared_names(tokenize("Foo foo; foo = make();")) == ["foo"]

    def test_generic_declaration(self):
        assert _declared_names(tokenize("List<String> names = new ArrayList<>();")) == ["names"]

    def test_array_declaration(self):
        assert _declared_names(tokenize("byte[] buf = read();")) == ["buf"]

    def test_for_init_and_enhanced_for(self):
        names = _declared_names(tokenize("for (int i = 0; i < n; i++) {} for (String s : items) {}"))
        assert names == ["i", "s"]

    def test_catch_param(self):
        assert _declared_names(tokenize("try { x(); } catch (IOException e) { y(); }")) == ["e"]

    def test_lambda_params(self):
        assert _declared_names(tokenize("f((a, b) -> a + b); g(x -> x * 2);")) == ["a", "b", "x"]

    def test_multi_declarator(self):
        assert _declared_names(tokenize("int a = 1, b = 2, c;")) == ["a", "b", "c"]

    def test_comparison_is_not_declaration(self):
        assert _declared_names(tokenize("if (a > b) { use(b); }")) == []

    def test_method_calls_and_fields_excluded(self):
        names = _declared_names(tokenize("obj.field = 5; helper(arg); int real = 1;"))
        assert names == ["real"]

    def test_assignment_without_type_excluded(self):
        assert _declared_names(tokenize("x = 5;")) == []


class TestAugmentTest:
    def test_consistent_rename_and_literal_mutation(self):
        test = make_test("t", code="int count = 5; assertEquals(5, count);")
        aug = augment_test(test, CONFIG, 0)
        assert aug.augmented_from == "t"
        assert aug.category == test.category
        tokens = tokenize(aug.code)
        idents = [t.text for t in tokens if t.kind is TokenKind.IDENTIFIER]
        # both occurrences of `count` renamed to the same fresh word
        assert idents[0] == idents[-1]
        assert idents[0] != "count"
        assert idents[1] == "assertEquals"
        numbers = [t.text for t in tokens if t.kind is TokenKind.NUMBER_LIT]
        assert len(numbers) == 2
        assert all(n.isdigit() for n in numbers)

    def test_token_kind_sequence_preserved(self):
        code = 'boolean ok = true; String s = "abc"; long t = 0x1FL; check(s, ok, t, 3.5f);'
        test = make_test("t", code=code)
        aug = augment_test(test, CONFIG, 1)
        assert [t.kind for t in tokenize(aug.code)] == [t.kind for t in tokenize(code)]

    def test_statement_count_preserved(self):
        code = "int a = 1; if (a > 0) { doIt(a); } for (int i = 0; i < 3; i++) { tick(); }"
        test = make_test("t", code=code)
        aug = augment_test(test, CONFIG, 0)
        assert len(segment_statements(aug.code)) == len(segment_statements(code))

    def test_deterministic(self):
        test = make_test("t", code='int a = 7; log("seven", a);')
        assert augment_test(test, CONFIG, 0) == augment_test(test, CONFIG, 0)
        assert augment_test(test, CONFIG, 0) != augment_test(test, CONFIG, 1)

    def test_rejects_augmented_input(self):
        test = make_test("t2", augmented_from="t")
        with pytest.raises(DataError):
            augment_test(test, CONFIG, 0)

    def test_no_mutable_elements(self):
        test = make_test("t", code="doSomething();")
        aug = augment_test(test, CONFIG, 0)
        assert aug.code == test.code
        assert aug.augmented_from == "t"
        assert aug.id != test.id

    def test_method_names_untouched(self):
        test = make_test("t", code="int x = 1; Thread.sleep(100); assertEquals(1, x);")
        aug = augment_test(test, CONFIG, 0)
        assert "Thread.sleep" in aug.code
        assert "assertEquals" in aug.code

    def test_rename_is_bijection(self):
        code = "int a = 1; int b = 2; int c = a + b; use(a, b, c);"
        test = make_test("t", code=code)
        aug = augment_test(test, CONFIG, 0)
        old_names = _declared_names(tokenize(code))
        new_names = _declared_names(tokenize(aug.code))
        assert len(new_names) == len(old_names) == len(set(new_names))
        assert set(new_names).isdisjoint(old_names)

    @given(st.integers(min_value=0, max_value=50))
    @settings(max_examples=25, deadline=None)
    def test_kind_sequence_invariant_any_copy_index(self, copy_index):
        code = 'List<Long> vals = new ArrayList<>(); vals.add(5L); assertTrue(vals.contains(5L), "msg");'
        test = make_test("t", code=code)
        aug = augment_test(test, AugmentationConfig(seed=7), copy_index)
        assert [t.kind for t in tokenize(aug.code)] == [t.kind for t in tokenize(code)]


class TestAugmentCorpus:
    def test_copies_per_test(self):
        tests = [make_test(f"t{i}", code=f"int v{i} = {i};") for i in range(4)]
        out = augment_corpus(tests, AugmentationConfig(copies_per_test=2, seed=1))
        assert len(out) == 12
        assert sum(1 for t in out if t.is_augmented) == 8
        assert out[:4] == tests

    def test_zero_copies_is_identity(self):
        tests = [make_test("a"), make_test("b")]
        assert augment_corpus(tests, AugmentationConfig(copies_per_test=0, seed=1)) == tests

    def test_same_seed_identical_output(self):
        tests = [make_test(f"t{i}", code=f'String s{i} = "x{i}";') for i in range(3)]
        config = AugmentationConfig(copies_per_test=3, seed=99)
        assert augment_corpus(tests, config) == augment_corpus(tests, config)

    def test_table_like_targets_hit_exactly(self):
        originals = []
        sizes = {
            Category.ASYNC_WAITS: 89,
            Category.UNORDERED_COLLECTIONS: 45,
            Category.CONCURRENCY: 36,
            Category.TIME: 35,
        }
        for cat, n in sizes.items():
            for i in range(n):
                originals.append(make_test(f"{cat.value}_{i}", cat, code=f"int z = {i};"))
        targets = {
            Category.ASYNC_WAITS: 285,
            Category.UNORDERED_COLLECTIONS: 136,
            Category.CONCURRENCY: 113,
            Category.TIME: 105,
        }
        out = augment_corpus(originals, AugmentationConfig(seed=5), targets=targets)
        assert len(out) == 639
        stats = corpus_stats(out)
        for cat, total in targets.items():
            assert stats.original[cat] + stats.augmented[cat] == total

    def test_target_below_originals_rejected(self):
        tests = [make_test(f"t{i}", Category.TIME) for i in range(5)]
        with pytest.raises(DataError, match="below"):
            augment_corpus(tests, AugmentationConfig(seed=1), targets={Category.TIME: 3})

    def test_rejects_augmented_inputs(self):
        tests = [make_test("a"), make_test("a1", augmented_from="a")]
        with pytest.raises(DataError, match="originals only"):
            augment_corpus(tests, CONFIG)
