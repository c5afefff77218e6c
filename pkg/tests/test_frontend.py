from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from solsearch.frontend import (
    FunctionUnit,
    SolidityParseError,
    TokenCaps,
    build_vocabulary,
    deduplicate,
    extract_functions,
    normalize_words,
    read_corpus,
    split_identifier,
    tokenize_code,
    write_corpus,
)

BURN = """
contract Token {
    // destroy tokens
    function burn(uint256 _value) onlyOwner public returns (bool success) {
        require(_balanceOf[_owner] >= _value);
        _balanceOf[_owner] -= _value;
        _totalSupply -= _value;
        Burn(_owner, _value);
        return true;
    }
}
"""


class TestExtractFunctions:
    def test_burn_with_line_comment_docstring(self):
        units = extract_functions(BURN, "token.sol")
        assert len(units) == 1
        unit = units[0]
        assert unit.kind == "function"
        assert unit.name == "burn"
        assert unit.docstring == "destroy tokens"

    def test_old_style_fallback(self):
        units = extract_functions("contract C { function() public payable { } }")
        assert len(units) == 1
        assert units[0].kind == "fallback"
        assert units[0].name == ""

    def test_new_style_fallback_and_receive(self):
        src = """
        contract C {
            fallback() external payable { }
            receive() external payable { }
        }
        """
        units = extract_functions(src)
        assert [u.kind for u in units] == ["fallback", "fallback"]

    def test_empty_file(self):
        assert extract_functions("") == []

    def test_unbalanced_braces_reports_offset(self):
        src = "contract C { function f() public { }"
        with pytest.raises(SolidityParseError) as exc:
            extract_functions(src)
        assert exc.value.offset == src.index("{")
        assert "offset" in str(exc.value)

    def test_extra_closing_brace(self):
        with pytest.raises(SolidityParseError):
            extract_functions("contract C { } }")

    def test_blank_line_breaks_docstring_association(self):
        src = """
        contract C {
            // stale comment

            function f() public { }
        }
        """
        units = extract_functions(src)
        assert units[0].docstring is None

    def test_block_comment_docstring(self):
        src = """
        contract C {
            /** transfers value
             *  to a recipient */
            function f() public { }
        }
        """
        units = extract_functions(src)
        assert units[0].docstring == "transfers value to a recipient"

    def test_bodyless_declarations_skipped(self):
        src = "interface I { function f() external; function g() external; }"
        assert extract_functions(src) == []

    def test_modifier_extraction(self):
        src = "contract C { modifier onlyOwner() { require(msg.sender == owner); _; } }"
        units = extract_functions(src)
        assert units[0].kind == "modifier"
        assert units[0].name == "onlyOwner"

    def test_spans_disjoint_and_ordered(self, vault_source, vault_units):
        spans = [u.span for u in vault_units]
        assert all(s[0] <= s[1] for s in spans)
        for before, after in zip(spans, spans[1:]):
            assert before[1] < after[0]

    def test_string_literal_braces_ignored(self):
        src = 'contract C { function f() public { emit Log("{{{"); } }'
        units = extract_functions(src)
        assert len(units) == 1


class TestTokenize:
    def test_camel_case_split(self):
        assert split_identifier("itemCount") == ["item", "count"]

    def test_snake_case_split(self):
        assert split_identifier("item_count") == ["item", "count"]

    def test_name_words_from_unit(self):
        unit = extract_functions(BURN)[0]
        bundle = tokenize_code(unit)
        assert bundle.name_words == ("burn",)

    def test_cap_enforcement_records_true_length(self):
        unit = FunctionUnit(
            id="u", kind="function", name="f",
            source="function f() public { alpha beta gamma; }",
            docstring=None, path="p", span=(1, 1),
        )
        bundle = tokenize_code(unit, TokenCaps(tokens=2))
        assert bundle.tokens == ("alpha", "beta")
        assert len(bundle.tokens) == 2

    def test_numbers_and_strings_dropped(self):
        unit = FunctionUnit(
            id="u", kind="function", name="f",
            source='function f() public { x = 123; y = "text"; }',
            docstring=None, path="p", span=(1, 1),
        )
        bundle = tokenize_code(unit)
        assert bundle.tokens == ("x", "y")

    def test_api_sequence_in_source_order(self):
        unit = extract_functions(BURN)[0]
        bundle = tokenize_code(unit)
        assert bundle.api_words == ("burn",)  # Burn(...) event invocation

    def test_api_includes_builtin_calls(self, withdraw_unit):
        bundle = tokenize_code(withdraw_unit)
        assert "transfer" in bundle.api_words
        # member accesses stay in the token channel only
        assert "sender" not in bundle.api_words
        assert "sender" in bundle.tokens

    def test_tokenize_deterministic(self, withdraw_unit):
        assert tokenize_code(withdraw_unit) == tokenize_code(withdraw_unit)

    @given(st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=126), max_size=30))
    def test_all_words_lowercase_alnum(self, raw):
        for word in normalize_words(raw):
            assert word.islower() or word.isdigit()
            assert all(c.islower() or c.isdigit() for c in word)

    @given(st.from_regex(r"[a-z]{1,10}", fullmatch=True))
    def test_idempotent_on_lowercase_words(self, word):
        assert split_identifier(word) == [word]

    @given(st.from_regex(r"[A-Za-z0-9_]{1,12}", fullmatch=True))
    def test_split_outputs_are_fixed_points(self, raw):
        for piece in split_identifier(raw):
            assert split_identifier(piece) == [piece]


class TestVocabulary:
    def test_min_count_threshold(self):
        vocab = build_vocabulary([["a", "a", "a", "b"]], min_count=2)
        assert vocab.words == ("<pad>", "<unk>", "a")
        assert vocab.get("a") == 2
        assert vocab.get("b") == vocab.UNK

    def test_empty_corpus(self):
        vocab = build_vocabulary([], min_count=2)
        assert len(vocab) == 2

    def test_lexicographic_tie_break(self):
        vocab = build_vocabulary([["y", "x", "y", "x"]], min_count=1)
        assert vocab.get("x") == 2
        assert vocab.get("y") == 3

    def test_frequency_before_ties(self):
        vocab = build_vocabulary([["z"] * 3 + ["a"] * 2], min_count=1)
        assert vocab.get("z") == 2
        assert vocab.get("a") == 3

    def test_docstrings_normalized(self):
        vocab = build_vocabulary(["itemCount itemCount"], min_count=2)
        assert vocab.get("count") == 2  # lexicographic tie-break at equal counts
        assert vocab.get("item") == 3

    def test_min_count_zero_rejected(self):
        with pytest.raises(ValueError):
            build_vocabulary([], min_count=0)


class TestDeduplicate:
    def _unit(self, source: str, uid: str) -> FunctionUnit:
        return FunctionUnit(
            id=uid, kind="function", name="f", source=source,
            docstring=None, path="p", span=(1, 1),
        )

    def test_exact_duplicate_collapsed(self):
        u1 = self._unit("function f() public { x = 1; }", "a")
        u2 = self._unit("function f() public { x = 1; }", "b")
        u3 = self._unit("function f() public { x = 2; }", "c")
        assert [u.id for u in deduplicate([u1, u2, u3])] == ["a", "c"]

    def test_identity(self):
        u = self._unit("function f() public { }", "a")
        assert deduplicate([u]) == [u]

    def test_comment_only_difference_collapsed(self):
        u1 = self._unit("function f() public { x = 1; // inc\n }", "a")
        u2 = self._unit("function f() public { x = 1; /* other */ }", "b")
        assert len(deduplicate([u1, u2])) == 1

    def test_whitespace_difference_collapsed(self):
        u1 = self._unit("function f() public {  x   = 1; }", "a")
        u2 = self._unit("function f() public { x = 1; }", "b")
        assert len(deduplicate([u1, u2])) == 1

    def test_idempotent(self, vault_units):
        once = deduplicate(list(vault_units))
        assert deduplicate(once) == once


class TestCorpusFile:
    def test_round_trip(self, tmp_path, vault_units):
        path = tmp_path / "corpus.jsonl"
        count = write_corpus(vault_units, path)
        assert count == len(vault_units)
        loaded = read_corpus(path)
        assert loaded == list(vault_units)

    def test_schema_fields(self, tmp_path, vault_units):
        path = tmp_path / "corpus.jsonl"
        write_corpus(vault_units, path)
        first = json.loads(path.read_text().splitlines()[0])
        assert set(first) == {"id", "kind", "name", "code", "docstring", "path", "span"}

    def test_bad_line_reports_position(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "a"\n')
        with pytest.raises(ValueError, match=":1:"):
            read_corpus(path)
