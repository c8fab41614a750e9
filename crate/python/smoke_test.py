"""Smoke test for the `cadastre` extension module.

Build and install it first:

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import json

import cadastre


def check_search():
    assert cadastre.normalize_text("  Cà  Rezzonico ") == "ca rezzonico"
    assert cadastre.edit_distance("kitten", "sitting") == 3
    vocab = ["casa", "appartamento"]
    assert cadastre.search("casa", vocab)[0] == "exact"
    tier, matches = cadastre.search("apartment", vocab)
    assert tier == "fuzzy" and [v for v, _ in matches] == ["appartamento"]
    tier, matches = cadastre.search("house", vocab)
    assert tier == "semantic" and sorted(v for v, _ in matches) == ["appartamento", "casa"]
    assert cadastre.fuzzy_match("house", vocab) == []


def check_parsers():
    assert cadastre.parse_boolean_verdict("Output: [[True]]") is True
    assert cadastre.parse_bracketed_answer("The answer is: [[42]]") == "42"
    refs = cadastre.parse_reference_list('Output: [("square", "landmark_type", 3)]')
    assert refs == [("square", "landmark_type", 3)]
    assert cadastre.extract_code_block("```python\nprint(1)\n```") == "print(1)"
    for bad, fn in [
        ("no marker", cadastre.parse_bracketed_answer),
        ("[[Maybe]]", cadastre.parse_boolean_verdict),
        ('[("x", "y", 9)]', cadastre.parse_reference_list),
        ("plain text", cadastre.extract_code_block),
    ]:
        try:
            fn(bad)
        except cadastre.ParseError:
            pass
        else:
            raise AssertionError(f"{fn.__name__} accepted {bad!r}")


def check_metrics():
    assert cadastre.unigram_overlap("the answer is 42 ducati", "42") == 1.0
    assert cadastre.classify(["a", "a", "a"], [5, 5, 5]) == ("ec3", "c33")
    assert cadastre.classify(["a", "a", "b"], [5, 5, 1]) == ("ec2", "c22")
    assert cadastre.classify(["1", "1.0000000001", None], [3, 3, None], "number") == ("ec2", "c22")
    assert cadastre.classify([None, None, None], [None, None, None]) == ("none", "none")


def check_sql():
    ds = cadastre.generate_fixture("catastici", seed=1, rows=200)
    assert len(ds) == 200 and ds.table_name == "catastici"
    assert ds.query("SELECT COUNT(*) FROM catastici") == [["200"]]
    try:
        ds.query("DELETE FROM catastici")
    except cadastre.SqlError:
        pass
    else:
        raise AssertionError("write query accepted")
    winner, groups = ds.majority_vote(
        ["SELECT 1", "SELECT 2", "SELECT 2 + 0", "SELECT nonsense"]
    )
    assert winner == 1 and groups == [[0], [1, 2], [3]]
    questions = json.loads(cadastre.bundled_browse_questions())
    queries = [q["gt_sql"] for q in questions for _ in range(4)]
    report = json.loads(ds.evaluate_browsing(queries))
    assert report["exact_match_rate"] == 1.0 and report["sql_errors"] == 0
    again = cadastre.Dataset.from_csv(ds.to_csv(), "catastici")
    assert again.row_count == 200


if __name__ == "__main__":
    for check in (check_search, check_parsers, check_metrics, check_sql):
        check()
        print(f"ok {check.__name__}")
