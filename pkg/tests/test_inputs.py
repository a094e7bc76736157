import random

import pytest
from hypothesis import given, settings, strategies as st

from bproc import StaticType, parse_expr
from bproc.errors import DomainMismatchError, InputsParseError, MissingOverrideError
from bproc.inputs import (BallDomain, EnumDomain, InputSpec, RangeDomain,
                          UnhandledDomain, facts_from_expr, infer_domains,
                          parse_inputs_file, render_domain, sample_domain,
                          write_inputs_file)


def domains_of(texts, input_vars):
    facts = []
    for text in texts:
        facts.extend(facts_from_expr(parse_expr(text), set(input_vars)))
    return infer_domains(set(input_vars), facts)


def test_equality_only_gives_enum():
    domains, _ = domains_of(['p = "yes"', 'p = "no"'], {"p"})
    assert domains["p"] == EnumDomain(("no", "yes"))


def test_cross_variable_comparison_is_unhandled():
    domains, _ = domains_of(["w > 0", "w < abs(v)"], {"w", "v"})
    assert isinstance(domains["w"], UnhandledDomain)
    assert any("abs(v)" in s for s in domains["w"].sources)
    # v only appears on the far side of w's comparison: no evidence at all
    assert domains["v"] == UnhandledDomain(())


def test_two_sided_comparisons_give_range():
    domains, _ = domains_of(["v > 11", "v <= 50"], {"v"})
    assert domains["v"] == RangeDomain(11, 50, lo_incl=False, hi_incl=True)


def test_single_constant_comparison_gives_ball():
    domains, _ = domains_of(["v <= 9"], {"v"})
    assert domains["v"] == BallDomain(9)
    domains, _ = domains_of(["v > 9", "v <= 9"], {"v"})
    assert domains["v"] == BallDomain(9)


def test_membership_facts():
    domains, _ = domains_of(["v in [1, 3, 5]"], {"v"})
    assert domains["v"] == EnumDomain((1, 3, 5))
    domains, _ = domains_of(["v in [11..50)"], {"v"})
    assert domains["v"] == RangeDomain(11, 50, True, False)


def test_disjoint_ranges_collapse_to_hull_with_diagnostic():
    domains, diags = domains_of(["v in [0..5]", "v in [10..20]"], {"v"})
    assert domains["v"] == RangeDomain(0, 20, True, True)
    assert any("convex hull" in d for d in diags)


def test_order_independence():
    texts = ["v > 11", "v <= 50", 'p = "a"', 'p = "b"', "w < abs(v)"]
    for shuffled in (texts, texts[::-1], texts[2:] + texts[:2]):
        domains, _ = domains_of(shuffled, {"v", "p", "w"})
        assert domains["v"] == RangeDomain(11, 50, False, True)
        assert domains["p"] == EnumDomain(("a", "b"))
        assert isinstance(domains["w"], UnhandledDomain)


# --- inputs file ----------------------------------------------------------------

SPECS = [
    InputSpec("pType", StaticType.STRING, EnumDomain(("no", "yes")), "yes"),
    InputSpec("pWeight", StaticType.DOUBLE, BallDomain(9), 12.5),
    InputSpec("amount", StaticType.INTEGER, RangeDomain(11, 50, False, True), 50),
    InputSpec("w", StaticType.DOUBLE, UnhandledDomain(("w < abs(v)", "w > 0")), 0.0),
]


def test_file_round_trip(tmp_path):
    path = tmp_path / "model.inputs"
    overrides = {"w": [1.5, 2.0, 30.0]}
    write_inputs_file(path, SPECS, overrides)
    parsed = parse_inputs_file(path)
    assert parsed.specs == SPECS
    assert parsed.overrides == overrides
    # a second round trip is byte-identical
    path2 = tmp_path / "again.inputs"
    write_inputs_file(path2, parsed.specs, parsed.overrides)
    assert path.read_text() == path2.read_text()


def test_domain_rendering():
    assert render_domain(EnumDomain(("a", "b"))) == 'ENUM("a","b")'
    assert render_domain(BallDomain(9)) == "BALL(9)"
    assert render_domain(RangeDomain(11, 50, False, True)) == "RANGE((11,50])"
    assert render_domain(UnhandledDomain(("w > 0",))) == "UNHANDLED(w > 0)"


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "model.inputs"
    path.write_text("# a comment\n\npType : String : ENUM(\"a\") : \"a\"\n")
    assert len(parse_inputs_file(path).specs) == 1


def test_edited_sample_outside_domain_rejected(tmp_path):
    path = tmp_path / "model.inputs"
    path.write_text("amount : Integer : RANGE((11,50]) : 60\n")
    with pytest.raises(DomainMismatchError):
        parse_inputs_file(path)


def test_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "model.inputs"
    path.write_text("# fine\nnot a valid line\n")
    with pytest.raises(InputsParseError) as exc_info:
        parse_inputs_file(path)
    assert exc_info.value.line_no == 2


# --- sampling --------------------------------------------------------------------

def test_enum_sampling_covers_support():
    rng = random.Random(0)
    domain = EnumDomain(("yes", "no"))
    seen = {sample_domain(domain, StaticType.STRING, rng) for _ in range(10_000)}
    assert seen == {"yes", "no"}


def test_integer_range_sampling_respects_open_ends():
    rng = random.Random(1)
    domain = RangeDomain(11, 50, False, True)
    draws = {sample_domain(domain, StaticType.INTEGER, rng) for _ in range(10_000)}
    assert min(draws) == 12
    assert max(draws) == 50


def test_ball_sampling_stays_in_interval():
    rng = random.Random(2)
    domain = BallDomain(9)
    draws = [sample_domain(domain, StaticType.DOUBLE, rng) for _ in range(10_000)]
    assert all(0.0 <= d <= 18.0 for d in draws)
    assert any(d == 9.0 for d in draws)  # center bias
    assert any(d > 17.0 for d in draws) and any(d < 1.0 for d in draws)


def test_unhandled_requires_overrides():
    rng = random.Random(3)
    with pytest.raises(MissingOverrideError):
        sample_domain(UnhandledDomain(()), StaticType.DOUBLE, rng, name="w")
    assert sample_domain(UnhandledDomain(()), StaticType.DOUBLE, rng,
                         overrides=[1.5], name="w") == 1.5


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_every_sample_validates_against_its_domain(seed):
    rng = random.Random(seed)
    domains = [
        (EnumDomain((1, 2, 9)), StaticType.INTEGER),
        (BallDomain(rng.randint(-20, 20)), StaticType.INTEGER),
        (BallDomain(float(rng.randint(-20, 20))), StaticType.DOUBLE),
        (RangeDomain(0, 10, rng.random() < 0.5, rng.random() < 0.5), StaticType.INTEGER),
        (RangeDomain(0.0, 10.0, False, False), StaticType.DOUBLE),
    ]
    for domain, static_type in domains:
        for _ in range(300):
            assert domain.contains(sample_domain(domain, static_type, rng))
