"""Sentence templates, the golden examples, and manifest IO."""

import hashlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qosrec.data import ServiceRecord, UserRecord
from qosrec.errors import IntegrityError
from qosrec.prompts import (
    SERVICE_TEMPLATE,
    TEMPLATE_HASH,
    USER_TEMPLATE,
    build_prompts,
    build_service_sentence,
    build_user_sentence,
    read_prompt_manifest,
    write_prompt_manifest,
)

GOLDEN_USER = (
    "web user, located in United States, in autonomous system "
    "AS5661 USF - UNIVERSITY OF SOUTH FLORIDA."
)
GOLDEN_SERVICE = (
    "web service, at url http://biomoby.org/services/wsdl/ualberta.ca/DrugBankByName, "
    "hosted by ualberta.ca, located in Canada, in autonomous system "
    "AS3359 University of Alberta."
)


def make_user(**overrides):
    base = dict(
        user_id=0,
        ip_address="1.2.3.4",
        country="United States",
        ip_number="16909060",
        autonomous_system="AS5661 USF - UNIVERSITY OF SOUTH FLORIDA",
        latitude=28.06,
        longitude=-82.41,
    )
    base.update(overrides)
    return UserRecord(**base)


def make_service(**overrides):
    base = dict(
        service_id=0,
        wsdl_address="http://biomoby.org/services/wsdl/ualberta.ca/DrugBankByName",
        provider="ualberta.ca",
        ip_address="129.128.99.44",
        country="Canada",
        ip_number="2172609324",
        autonomous_system="AS3359 University of Alberta",
        latitude=53.52,
        longitude=-113.53,
    )
    base.update(overrides)
    return ServiceRecord(**base)


def test_user_sentence_golden():
    assert build_user_sentence(make_user()).text == GOLDEN_USER


def test_service_sentence_golden():
    assert build_service_sentence(make_service()).text == GOLDEN_SERVICE


def test_sentences_carry_entity_identity():
    p = build_user_sentence(make_user(user_id=17))
    assert (p.entity_kind, p.entity_id) == ("user", 17)
    q = build_service_sentence(make_service(service_id=4))
    assert (q.entity_kind, q.entity_id) == ("service", 4)


def test_placeholder_text_is_interpolated_verbatim():
    p = build_user_sentence(make_user(country="null", autonomous_system="null"))
    assert p.text == "web user, located in null, in autonomous system null."


text_strategy = st.text(
    alphabet=st.characters(blacklist_characters="\t\n\r", blacklist_categories=("Cs",)),
    min_size=1,
    max_size=30,
)


@given(
    country=text_strategy,
    asys=text_strategy,
    lat=st.floats(min_value=-90, max_value=90),
    lon=st.floats(min_value=-180, max_value=180),
)
@settings(max_examples=60)
def test_numeric_attributes_never_in_user_sentences(country, asys, lat, lon):
    user = make_user(
        country=country,
        autonomous_system=asys,
        ip_address="203.0.113.77",
        ip_number="3405803341",
        latitude=lat,
        longitude=lon,
    )
    text = build_user_sentence(user).text
    assert text == f"web user, located in {country}, in autonomous system {asys}."
    assert "203.0.113.77" not in text
    assert "3405803341" not in text
    # guards against accidental inclusion of coordinates
    if abs(lat) > 1e-3:
        assert repr(lat) not in text.replace(country, "").replace(asys, "")


def test_templates_are_frozen():
    assert USER_TEMPLATE == "web user, located in {country}, in autonomous system {autonomous_system}."
    assert SERVICE_TEMPLATE == (
        "web service, at url {wsdl_address}, hosted by {provider}, "
        "located in {country}, in autonomous system {autonomous_system}."
    )
    expected = hashlib.sha256((USER_TEMPLATE + "\n" + SERVICE_TEMPLATE).encode("utf-8")).hexdigest()
    assert TEMPLATE_HASH == expected


def test_manifest_roundtrip(tmp_path):
    prompts = build_prompts([make_user(user_id=i) for i in range(3)],
                            [make_service(service_id=i) for i in range(2)])
    assert len(prompts) == 5
    path = tmp_path / "prompts.tsv"
    write_prompt_manifest(prompts, path)
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first == f"#qpm1\t{TEMPLATE_HASH}"
    got_hash, got = read_prompt_manifest(path)
    assert got_hash == TEMPLATE_HASH
    assert [(p.entity_kind, p.entity_id, p.text) for p in got] == [
        (p.entity_kind, p.entity_id, p.text) for p in prompts
    ]


def test_manifest_rejects_embedded_tabs(tmp_path):
    bad = build_user_sentence(make_user(country="has\ttab"))
    with pytest.raises(IntegrityError):
        write_prompt_manifest([bad], tmp_path / "p.tsv")


def test_manifest_write_is_deterministic(tmp_path):
    prompts = build_prompts([make_user()], [make_service()])
    write_prompt_manifest(prompts, tmp_path / "a.tsv")
    write_prompt_manifest(prompts, tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
