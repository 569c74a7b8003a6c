import json
import random
import threading

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from mockweb import MockSearch
from sanitext.corpus import (
    CountCache,
    LocalCountProvider,
    LocalIndex,
    PhraseQuery,
    ProviderError,
    WebCountProvider,
    WebEndpointConfig,
    canonical_query,
    count_local,
    count_web,
    extract_count,
)


class TestPhraseQuery:
    @pytest.mark.parametrize(
        "phrases,expected",
        [(("hiv", "azt"), '"azt" AND "hiv"'), (("virus",), '"virus"'), (("b", "a", "a"), '"a" AND "b"')],
    )
    def test_canonical_query(self, phrases, expected):
        assert canonical_query(PhraseQuery.of(*phrases)) == expected

    def test_set_semantics_and_normalization(self):
        assert PhraseQuery.of("A  B", "c") == PhraseQuery.of("c", "a b")

    @pytest.mark.parametrize("bad", [frozenset(), frozenset({""}), frozenset({"Upper"}), frozenset({"a  b"})])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            PhraseQuery(bad)

    @settings(max_examples=50)
    @given(st.lists(st.text(alphabet="abc xyz", min_size=1, max_size=6).filter(str.strip), min_size=1, max_size=5))
    def test_canonical_is_order_independent(self, phrases):
        shuffled = list(phrases)
        random.Random(0).shuffle(shuffled)
        assert canonical_query(PhraseQuery.of(*phrases)) == canonical_query(PhraseQuery.of(*shuffled))


class TestLocalIndex:
    @pytest.mark.parametrize(
        "phrases,expected",
        [(("hiv",), 2), (("hiv", "azt"), 2), (("nonexistentword",), 0), (("virus",), 4), (("drug",), 5)],
    )
    def test_f8_counts(self, f8_provider, brute, phrases, expected):
        assert count_local(PhraseQuery.of(*phrases), f8_provider.index) == expected
        assert brute.count(*phrases) == expected

    def test_all_f8_pairs_match_brute_force(self, f8_provider, brute):
        vocab = sorted(set().union(*brute.docs))
        for a in vocab:
            for b in vocab:
                assert f8_provider.count(PhraseQuery.of(a, b)) == brute.count(a, b)

    def test_multiword_phrase_must_be_contiguous(self):
        index = LocalIndex(["the big red dog", "red big dog", "big red"])
        assert index.count(["big red"]) == 2
        assert index.count(["red big"]) == 1
        assert index.count(["big red", "dog"]) == 1

    def test_tokenization_matches_phrase_normalization(self):
        index = LocalIndex(["Anti-Retroviral THERAPY, given."])
        assert index.count(["anti-retroviral therapy"]) == 1

    def test_from_directory_is_sorted(self, tmp_path):
        (tmp_path / "b.txt").write_text("beta")
        (tmp_path / "a.txt").write_text("alpha")
        assert LocalIndex.from_directory(tmp_path).names == ["a.txt", "b.txt"]

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.sets(st.sampled_from("abcdef"), max_size=6), min_size=1, max_size=12),
        st.sets(st.sampled_from("abcdefg"), min_size=1, max_size=4),
        st.sets(st.sampled_from("abcdefg"), max_size=3),
    )
    def test_anti_monotone_and_bounded(self, docs, q, extra):
        index = LocalIndex([" ".join(sorted(d)) for d in docs])
        small = index.count(sorted(q))
        assert small <= len(docs)
        assert index.count(sorted(q | extra)) <= small
        assert small == sum(1 for d in docs if q <= d)


class TestCountCache:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "c.tsv"
        with CountCache(path) as cache:
            cache.put('"hiv"', 2)
            cache.put('"azt" AND "hiv"', 2)
        again = CountCache(path)
        assert again.get('"hiv"') == 2 and again.get('"azt" AND "hiv"') == 2
        assert {e.key for e in again.entries()} == {'"hiv"', '"azt" AND "hiv"'}

    def test_last_write_wins(self, tmp_path):
        path = tmp_path / "c.tsv"
        with CountCache(path) as cache:
            cache.put("k", 1)
            cache.put("k", 7)
        assert path.read_text().count("\n") == 2
        assert CountCache(path).get("k") == 7

    def test_read_after_write_without_file(self):
        cache = CountCache()
        cache.put("k", 3)
        assert cache.get("k") == 3 and "k" in cache and len(cache) == 1

    def test_malformed_record(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("k\tnot-a-number\t2020\n")
        with pytest.raises(ValueError, match="malformed"):
            CountCache(path)

    def test_clear(self, tmp_path):
        path = tmp_path / "c.tsv"
        cache = CountCache(path)
        cache.put("k", 1)
        cache.clear()
        assert not path.exists() and cache.get("k") is None

    def test_concurrent_puts_serialize(self, tmp_path):
        path = tmp_path / "c.tsv"
        cache = CountCache(path)

        def writer(base):
            for i in range(200):
                cache.put(f"k{base}-{i}", i)

        threads = [threading.Thread(target=writer, args=(b,)) for b in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        cache.close()
        lines = path.read_text().splitlines()
        assert len(lines) == 1600 and all(len(line.split("\t")) == 3 for line in lines)
        assert len(CountCache(path)) == 1600

    def test_local_cache_deterministic_modulo_timestamps(self, tmp_path, f8_provider):
        def run(path):
            provider = LocalCountProvider(f8_provider.index, CountCache(path))
            for q in [("hiv",), ("hiv", "azt"), ("virus", "fever"), ("hiv",)]:
                provider.count(PhraseQuery.of(*q))
            provider.cache.close()
            return [line.rsplit("\t", 1)[0] for line in path.read_text().splitlines()]

        assert run(tmp_path / "a.tsv") == run(tmp_path / "b.tsv")


class TestExtractCount:
    def test_paths(self):
        assert extract_count({"a": {"b": [5, 9]}}, "a.b.1") == 9
        assert extract_count({"n": "1,234"}, "n") == 1234

    @pytest.mark.parametrize("body", [{}, {"n": -1}, {"n": True}, {"n": "many"}, {"n": 1.5}])
    def test_malformed(self, body):
        with pytest.raises(ProviderError):
            extract_count(body, "n")


class TestWebConfig:
    def test_requires_total_units(self, tmp_path):
        p = tmp_path / "w.json"
        p.write_text(json.dumps({"url_template": "http://x/?q={query}", "count_path": "n"}))
        with pytest.raises(ValueError, match="total_units"):
            WebEndpointConfig.from_file(p)

    def test_rejects_unknown_fields(self, tmp_path):
        p = tmp_path / "w.json"
        p.write_text(json.dumps({"url_template": "http://x/?q={query}", "count_path": "n", "total_units": 5, "k": 1}))
        with pytest.raises(ValueError, match="unknown"):
            WebEndpointConfig.from_file(p)

    def test_requires_placeholder(self):
        with pytest.raises(ValueError):
            WebEndpointConfig("http://x/", "n", 10)

    def test_missing_api_key_env(self, monkeypatch):
        monkeypatch.delenv("SANITEXT_TEST_KEY", raising=False)
        cfg = WebEndpointConfig("http://x/?q={query}&k={api_key}", "n", 10, api_key_env="SANITEXT_TEST_KEY")
        with pytest.raises(ProviderError, match="SANITEXT_TEST_KEY"):
            WebCountProvider(cfg, CountCache())


class TestWebProvider:
    def test_cache_hit_makes_no_request(self):
        with MockSearch({'"hiv"': 55_000_000}) as mock:
            cache = CountCache()
            cache.put('"hiv"', 12)
            provider = WebCountProvider(WebEndpointConfig(**mock.config()), cache)
            assert count_web(PhraseQuery.of("hiv"), provider) == 12
            assert mock.requests == [] and provider.requests_made == 0

    def test_cold_fetch_populates_cache(self, tmp_path):
        with MockSearch({'"hiv"': 55_000_000}) as mock:
            cache = CountCache(tmp_path / "c.tsv")
            provider = WebCountProvider(WebEndpointConfig(**mock.config()), cache)
            assert provider.count(PhraseQuery.of("hiv")) == 55_000_000
            assert provider.count(PhraseQuery.of("hiv")) == 55_000_000
            assert mock.requests == ['"hiv"']
            cache.close()
        assert CountCache(tmp_path / "c.tsv").get('"hiv"') == 55_000_000

    def test_server_error_exhausts_retries(self):
        with MockSearch(status=500) as mock:
            provider = WebCountProvider(WebEndpointConfig(**mock.config(max_retries=3)), CountCache())
            with pytest.raises(ProviderError, match="HTTP 500"):
                provider.count(PhraseQuery.of("hiv"))
            assert len(mock.requests) == 4
            assert len(provider.cache) == 0

    def test_rate_limit_backs_off_exponentially(self):
        sleeps = []
        with MockSearch({'"hiv"': 9}, throttle=2) as mock:
            cfg = WebEndpointConfig(**mock.config(max_retries=3, backoff_base=0.25))
            provider = WebCountProvider(cfg, CountCache(), sleep=sleeps.append)
            assert provider.count(PhraseQuery.of("hiv")) == 9
        assert sleeps == [0.25, 0.5]

    def test_malformed_body_is_an_error(self):
        with MockSearch(body=b"not json") as mock:
            provider = WebCountProvider(WebEndpointConfig(**mock.config()), CountCache())
            with pytest.raises(ProviderError, match="malformed"):
                provider.count(PhraseQuery.of("hiv"))

    def test_connection_failure(self):
        cfg = WebEndpointConfig("http://127.0.0.1:9/?q={query}", "n", 10, max_retries=1, backoff_base=0)
        session = requests.Session()
        provider = WebCountProvider(cfg, CountCache(), session=session)
        with pytest.raises(ProviderError):
            provider.count(PhraseQuery.of("hiv"))

    def test_api_key_substitution(self, monkeypatch):
        monkeypatch.setenv("SANITEXT_TEST_KEY", "s3cret")
        with MockSearch({'"a"': 1}) as mock:
            cfg = WebEndpointConfig(**mock.config(url_template=mock.url_template + "&key={api_key}",
                                                  api_key_env="SANITEXT_TEST_KEY"))
            provider = WebCountProvider(cfg, CountCache())
            assert provider._url('"a"').endswith("key=s3cret")
            assert provider.count(PhraseQuery.of("a")) == 1

    def test_prefetch_is_concurrent_but_ordered(self, tmp_path):
        keys = [PhraseQuery.of(f"w{i}") for i in range(30)]
        counts = {canonical_query(q): i for i, q in enumerate(keys)}
        with MockSearch(counts) as mock:
            cache = CountCache(tmp_path / "c.tsv")
            provider = WebCountProvider(WebEndpointConfig(**mock.config(workers=8)), cache)
            provider.prefetch(keys + keys[:5])
            cache.close()
            assert len(mock.requests) == 30
        written = [line.split("\t")[0] for line in (tmp_path / "c.tsv").read_text().splitlines()]
        assert written == [canonical_query(q) for q in keys]
        assert all(CountCache(tmp_path / "c.tsv").get(canonical_query(q)) == i for i, q in enumerate(keys))
