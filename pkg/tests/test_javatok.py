import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flakecause.errors import DataError
from flakecause.javatok import (
    StatementType,
    TokenKind,
    classify_statement,
    lex,
    load_statement_patterns,
    segment,
    segment_statements,
    tokenize,
)


class TestTokenize:
    def test_thread_sleep(self):
        kinds_texts = [(t.kind, t.text) for t in tokenize("Thread.sleep(1000);")]
        assert kinds_texts == [
            (TokenKind.IDENTIFIER, "Thread"),
            (TokenKind.PUNCT, "."),
            (TokenKind.IDENTIFIER, "sleep"),
            (TokenKind.PUNCT, "("),
            (TokenKind.NUMBER_LIT, "1000"),
            (TokenKind.PUNCT, ")"),
            (TokenKind.PUNCT, ";"),
        ]

    def test_bool_literal(self):
        tokens = tokenize("boolean ok = true;")
        assert (TokenKind.BOOL_LIT, "true") in [(t.kind, t.text) for t in tokens]
        assert (TokenKind.KEYWORD, "boolean") in [(t.kind, t.text) for t in tokens]

    def test_empty(self):
        assert tokenize("") == []

    def test_string_literal_single_token(self):
        tokens = tokenize('assertEquals("a, b; c", x);')
        strings = [t for t in tokens if t.kind is TokenKind.STRING_LIT]
        assert len(strings) == 1
        assert strings[0].text == '"a, b; c"'

    def test_number_shapes(self):
        for text in ["0x1F", "0b1010", "1_000_000L", "3.14f", ".5d", "1e10", "2E-3"]:
            tokens = tokenize(text)
            assert tokens[0].kind is TokenKind.NUMBER_LIT, text
            assert tokens[0].text == text

    def test_unterminated_string_ends_at_line_end(self):
        result = lex('String s = "oops\nint x;')
        assert result.diagnostics
        string_tok = next(t for t in result.tokens if t.kind is TokenKind.STRING_LIT)
        assert string_tok.text == '"oops'
        assert any(t.text == "int" for t in result.tokens)

    def test_multi_char_operators(self):
        tokens = tokenize("a >>= b; c <= d; e -> f; g::h")
        texts = [t.text for t in tokens if t.kind is TokenKind.OPERATOR]
        assert ">>=" in texts and "<=" in texts and "->" in texts
        assert any(t.text == "::" and t.kind is TokenKind.PUNCT for t in tokens)

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_spans_partition_non_whitespace(self, code):
        tokens = tokenize(code)
        pos = 0
        for tok in tokens:
            start, end = tok.span
            assert start >= pos
            assert code[start:end] == tok.text
            assert code[pos:start].strip() == ""
            pos = end
        assert code[pos:].strip() == ""

    @given(st.text(max_size=200))
    def test_deterministic(self, code):
        assert tokenize(code) == tokenize(code)


class TestSegmentStatements:
    def test_two_simple_statements(self):
        stmts = segment_statements("int a = 1; assertEquals(1, a);")
        assert [s.text for s in stmts] == ["int a = 1;", "assertEquals(1, a);"]

    def test_for_header_is_own_statement(self):
        stmts = segment_statements("for (int i = 0; i < n; i++) { sum += i; }")
        assert [s.text for s in stmts] == ["for (int i = 0; i < n; i++) {", "sum += i; }"]
        assert [s.depth for s in stmts] == [0, 1]

    def test_array_initializer_not_split(self):
        stmts = segment_statements("int[] a = {1, 2}; b();")
        assert [s.text for s in stmts] == ["int[] a = {1, 2};", "b();"]

    def test_try_catch_headers(self):
        stmts = segment_statements("try { a(); } catch (Exception e) { b(); }")
        assert [s.text for s in stmts] == ["try {", "a(); }", "catch (Exception e) {", "b(); }"]

    def test_anonymous_class_inside_call_stays_whole(self):
        code = "executor.submit(new Runnable() { public void run() { x(); } });"
        stmts = segment_statements(code)
        assert len(stmts) == 1
        assert stmts[0].text == code

    def test_unbalanced_braces_flagged(self):
        result = segment("if (x) { a();")
        assert result.diagnostics
        assert [s.text for s in result.statements] == ["if (x) {", "a();"]

    def test_every_non_whitespace_char_covered(self):
        code = "@Test public void t() { try { foo(); } finally { bar(); } }"
        stmts = segment_statements(code)
        covered = sorted(stmts, key=lambda s: s.span)
        pos = 0
        for s in covered:
            assert code[pos: s.span[0]].strip() == ""
            pos = s.span[1]
        assert code[pos:].strip() == ""

    def test_removal_stability(self):
        code = "int a = 1; if (a > 0) { b(); c(); } d();"
        stmts = segment_statements(code)
        for i in range(len(stmts)):
            start, end = stmts[i].span
            reduced = code[:start] + code[end:]
            new_texts = [s.text for s in segment_statements(reduced)]
            expected = [s.text for j, s in enumerate(stmts) if j != i]
            assert new_texts == expected, f"unstable after removing statement {i}"


# Realistic multi-threaded collection-asserting test in the style of the
# misclassified HBase example; the expected count of 12 was fixed once by a
# manual hand segmentation of this exact listing.
HBASE_STYLE_LISTING = """\
@Test public void testClusterStatusPublisher() throws Exception {
    final int NB_SERVERS = 3;
    List<ServerName> deadServers = new ArrayList<>();
    for (int i = 0; i < NB_SERVERS; i++) {
        deadServers.add(ServerName.valueOf("server" + i, 1234, i));
    }
    ClusterStatusPublisher publisher = new ClusterStatusPublisher();
    publisher.publish(deadServers);
    Thread.sleep(1000);
    Set<String> seen = new HashSet<>(listener.getDeadServers());
    assertEquals(NB_SERVERS, seen.size());
    for (ServerName sn : deadServers) {
        assertTrue(seen.contains(sn.getServerName()));
    }
}
"""


def test_hand_counted_listing_statement_count():
    stmts = segment_statements(HBASE_STYLE_LISTING)
    assert len(stmts) == 12


class TestClassifyStatement:
    def test_thread_sleep(self):
        tags = classify_statement("Thread.sleep(5000);")
        assert tags == {StatementType.THREADS, StatementType.WAITS, StatementType.CONSTANTS}

    def test_assert_with_literals(self):
        tags = classify_statement('assertEquals("a", list.get(0));')
        assert tags == {StatementType.ASSERTS, StatementType.CONSTANTS}

    def test_plain_declaration(self):
        assert classify_statement("int i = 0;") == {StatementType.CONSTANTS}

    def test_control_flow(self):
        assert StatementType.CONTROL_FLOW in classify_statement("if (ready) {")
        assert StatementType.CONTROL_FLOW in classify_statement("for (;;) {")

    def test_new_instance(self):
        assert StatementType.NEW_INSTANCES in classify_statement("Foo f = new Foo();")

    def test_time_related(self):
        assert StatementType.TIME_RELATED in classify_statement("long t = System.currentTimeMillis();")
        assert StatementType.TIME_RELATED in classify_statement("Date d = new Date();")
        assert StatementType.TIME_RELATED in classify_statement("TimeUnit.SECONDS.toMillis(5)")

    def test_external_api(self):
        assert StatementType.EXTERNAL_API_CALLS in classify_statement("HttpClient client = makeClient();")
        assert StatementType.EXTERNAL_API_CALLS in classify_statement("int port = server.getPort();")
        assert StatementType.EXTERNAL_API_CALLS in classify_statement("File f = tempFolder.newFile();")

    def test_empty_tags_possible(self):
        assert classify_statement("counter.increment();") == set()

    def test_await_is_wait(self):
        tags = classify_statement("latch.await();")
        assert StatementType.WAITS in tags

    def test_update_is_not_time_related(self):
        # anchored globs must not fire on identifiers merely containing "date"
        assert StatementType.TIME_RELATED not in classify_statement("cache.update(key);")
        assert StatementType.TIME_RELATED not in classify_statement("validateState();")


def test_statement_type_enum_has_8_labels():
    assert len(StatementType) == 8


def test_load_statement_patterns_overrides(tmp_path):
    config = tmp_path / "patterns.toml"
    config.write_text(
        """
[statement_types.Waits]
identifiers = ["pause*"]
"""
    )
    patterns = load_statement_patterns(config)
    tags = classify_statement("pauseBriefly();", patterns)
    assert StatementType.WAITS in tags
    assert StatementType.WAITS not in classify_statement("Thread.sleep(1);", patterns)
    # untouched types keep their defaults
    assert StatementType.ASSERTS in classify_statement("assertTrue(x);", patterns)


def test_load_statement_patterns_rejects_unknown_label(tmp_path):
    config = tmp_path / "patterns.toml"
    config.write_text("[statement_types.Banana]\nkeywords = ['x']\n")
    with pytest.raises(DataError, match="unknown statement type"):
        load_statement_patterns(config)


def test_load_statement_patterns_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read statement patterns"):
        load_statement_patterns(tmp_path / "absent.toml")
