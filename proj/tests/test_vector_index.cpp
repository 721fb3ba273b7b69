#include "support/testkit.hpp"

#include "nmem/errors.hpp"
#include "nmem/vector_index.hpp"

#include <doctest.h>

#include <fstream>
#include <random>
#include <thread>

using namespace nmem;
using testkit::error_code_of;

namespace {

VectorRecord rec(const std::string& id, std::vector<double> v, Metadata md = {}, Namespace ns = Namespace::Episode) {
    return {id, ns, std::move(v), "payload of " + id, std::move(md)};
}

struct RandomStore {
    VectorIndex index{64};
    std::vector<std::pair<std::string, std::vector<double>>> plain;
};

RandomStore random_store(std::size_t n, std::uint64_t seed) {
    RandomStore s;
    const auto vs = testkit::random_unit_vectors(n, 64, seed);
    std::vector<VectorRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
        // Shuffled ids so insertion order and id order differ.
        const std::string id = "r" + std::to_string((i * 7919) % 100003);
        records.push_back(rec(id, vs[i], {{"parity", std::to_string(i % 2)}}));
        s.plain.emplace_back(id, vs[i]);
    }
    // A few exact duplicates under different ids force score ties.
    for (std::size_t i = 0; i < 5; ++i) {
        const std::string id = "dup" + std::to_string(9 - i);
        records.push_back(rec(id, vs[i], {{"parity", "x"}}));
        s.plain.emplace_back(id, vs[i]);
    }
    s.index.upsert(std::move(records));
    return s;
}

void check_same(const std::vector<SearchHit>& got, const std::vector<testkit::Ranked>& want) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].id == want[i].id);
        CHECK(got[i].score == want[i].score);
    }
}

} // namespace

TEST_CASE("upsert semantics") {
    VectorIndex idx(3);
    CHECK(idx.upsert({rec("a", {1, 0, 0}), rec("b", {0, 1, 0}), rec("c", {0, 0, 1})}) == 3);
    CHECK(idx.upsert({rec("b", {0, 0, 1})}) == 1);
    CHECK(idx.size(Namespace::Episode) == 3);
    CHECK(idx.fetch(Namespace::Episode, {"b"}).records[0].vector == std::vector<double>{0, 0, 1});
    CHECK(idx.upsert({}) == 0);
    CHECK(idx.size() == 3);
    CHECK(idx.upsert({rec("a", {1, 0, 0}, {}, Namespace::Thread)}) == 1);
    CHECK(idx.size(Namespace::Thread) == 1);
    CHECK(idx.size() == 4);
    CHECK(error_code_of([&] { idx.upsert({rec("d", std::vector<double>(2, 0.5))}); }) == ErrorCode::DimensionMismatch);

    VectorIndex wide(64);
    CHECK(error_code_of([&] { wide.upsert({rec("x", std::vector<double>(63, 0.1))}); }) ==
          ErrorCode::DimensionMismatch);
}

TEST_CASE("non-unit vectors are normalized on insert") {
    VectorIndex idx(2);
    idx.upsert({rec("a", {3, 4})});
    const auto v = idx.fetch(Namespace::Episode, {"a"}).records[0].vector;
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
}

TEST_CASE("search examples") {
    VectorIndex idx(3);
    idx.upsert({rec("b", {1, 0, 0}), rec("a", {1, 0, 0}), rec("c", {0, 1, 0})});
    const std::vector<double> q{1, 0, 0};
    const auto hits = idx.search(q, Namespace::Episode, 10);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].id == "a");
    CHECK(hits[1].id == "b");
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hits[2].id == "c");
    CHECK(hits[0].payload == "payload of a");
    CHECK(idx.search(q, Namespace::Episode, 1).size() == 1);
    CHECK(idx.search(q, Namespace::Thread, 5).empty());
    CHECK(error_code_of([&] { idx.search(std::vector<double>{1, 0}, Namespace::Episode, 1); }) ==
          ErrorCode::DimensionMismatch);
}

TEST_CASE("search equals a brute-force scan") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto store = random_store(300, seed);
        const auto queries = testkit::random_unit_vectors(20, 64, seed + 100);
        for (std::size_t qi = 0; qi < queries.size(); ++qi) {
            const std::size_t k = 1 + qi * 3;
            check_same(store.index.search(queries[qi], Namespace::Episode, k),
                       testkit::brute_force_ranking(store.plain, queries[qi], k));
        }
        // Querying with a duplicated vector puts the tied ids in ascending order.
        const auto hits = store.index.search(store.plain[0].second, Namespace::Episode, 2);
        CHECK(hits[0].score == hits[1].score);
        CHECK(hits[0].id < hits[1].id);
    }
}

TEST_CASE("filters are sound") {
    const auto store = random_store(200, 9);
    const auto q = testkit::random_unit_vectors(1, 64, 77)[0];
    const auto hits = store.index.search(q, Namespace::Episode, 50, match_all({{"parity", "1"}}));
    CHECK(hits.size() == 50);
    for (const auto& h : hits) CHECK(h.metadata.at("parity") == "1");
    CHECK(store.index.count(Namespace::Episode, match_all({{"parity", "x"}})) == 5);

    std::vector<std::pair<std::string, std::vector<double>>> odd;
    for (std::size_t i = 0; i < 200; ++i)
        if (i % 2 == 1) odd.push_back(store.plain[i]);
    check_same(hits, testkit::brute_force_ranking(odd, q, 50));
}

TEST_CASE("fetch") {
    VectorIndex idx(2);
    idx.upsert({rec("t1", {1, 0}, {}, Namespace::Thread), rec("t2", {0, 1}, {}, Namespace::Thread)});
    auto got = idx.fetch(Namespace::Thread, {"t2", "t1"});
    REQUIRE(got.records.size() == 2);
    CHECK(got.records[0].id == "t2");
    CHECK(got.missing.empty());
    CHECK_NOTHROW(got.require());

    got = idx.fetch(Namespace::Thread, {"t1", "nope"});
    CHECK(got.records.size() == 1);
    CHECK(got.missing == std::vector<std::string>{"nope"});
    try {
        got.require();
        FAIL("expected NotFound");
    } catch (const NotFoundError& e) {
        CHECK(e.code() == ErrorCode::NotFound);
        CHECK(e.missing() == std::vector<std::string>{"nope"});
    }
    CHECK(idx.fetch(Namespace::Thread, {}).records.empty());
    CHECK(idx.fetch(Namespace::Episode, {"t1"}).missing.size() == 1);
}

TEST_CASE("persistence round-trip") {
    const auto dir = testkit::scratch_dir("index");
    const auto store = random_store(100, 3);
    store.index.persist(dir / "idx.jsonl");

    std::ifstream in(dir / "idx.jsonl");
    std::string header;
    std::getline(in, header);
    const auto hj = nlohmann::json::parse(header);
    CHECK(hj.size() == 2);
    CHECK(hj.at("format_version") == 1);
    CHECK(hj.at("dimension") == 64);

    const auto loaded = VectorIndex::load(dir / "idx.jsonl");
    CHECK(loaded.size() == store.index.size());
    for (const auto& q : testkit::random_unit_vectors(5, 64, 1234)) {
        CHECK(loaded.search(q, Namespace::Episode, 10) == store.index.search(q, Namespace::Episode, 10));
    }
    CHECK(loaded.records(Namespace::Episode) == store.index.records(Namespace::Episode));
}

TEST_CASE("persistence edge cases") {
    const auto dir = testkit::scratch_dir("index-edge");
    VectorIndex empty(8);
    empty.persist(dir / "empty.jsonl");
    const auto back = VectorIndex::load(dir / "empty.jsonl");
    CHECK(back.size() == 0);
    CHECK(back.dimension() == 8);

    std::ofstream(dir / "v9.jsonl") << "{\"format_version\":9,\"dimension\":8}\n";
    CHECK(error_code_of([&] { VectorIndex::load(dir / "v9.jsonl"); }) == ErrorCode::FormatVersionMismatch);
    CHECK(error_code_of([&] { VectorIndex::load(dir / "missing.jsonl"); }) == ErrorCode::IoFailure);
    CHECK(error_code_of([&] { empty.persist(dir / "no" / "such" / "dir" / "x.jsonl"); }) == ErrorCode::IoFailure);
}

TEST_CASE("concurrent readers see a consistent store") {
    const auto store = random_store(300, 21);
    const auto queries = testkit::random_unit_vectors(8, 64, 5);
    std::vector<std::vector<SearchHit>> expected;
    for (const auto& q : queries) expected.push_back(store.index.search(q, Namespace::Episode, 10));
    std::atomic<int> mismatches{0};
    {
        std::vector<std::jthread> readers;
        for (int t = 0; t < 8; ++t) {
            readers.emplace_back([&, t] {
                for (int rep = 0; rep < 50; ++rep) {
                    const auto i = static_cast<std::size_t>((t + rep) % 8);
                    if (store.index.search(queries[i], Namespace::Episode, 10) != expected[i]) ++mismatches;
                }
            });
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("namespaces parse and print") {
    for (auto ns : kAllNamespaces) CHECK(parse_namespace(to_string(ns)) == ns);
    CHECK(error_code_of([] { parse_namespace("bogus"); }).has_value());
}
