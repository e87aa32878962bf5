#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>

#include "gckd/memory_bank.hpp"
#include "gckd/rng.hpp"

using namespace gckd;

namespace {

Matrix unit_row(double a, double b) {
    Matrix m(1, 2);
    const double n = std::sqrt(a * a + b * b);
    m.at(0, 0) = a / n;
    m.at(0, 1) = b / n;
    return m;
}

Matrix random_unit_rows(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto v = random_unit_vector(rng, d);
        std::copy(v.begin(), v.end(), m.row(i));
    }
    return m;
}

}  // namespace

TEST_CASE("FIFO eviction with capacity 2") {
    MemoryBank bank(2, Domain::Target, Modality::Text);
    bank.push_rows(unit_row(1, 0), 0);
    bank.push_rows(unit_row(0, 1), 1);
    bank.push_rows(unit_row(1, 1), 2);
    auto snap = bank.snapshot();
    REQUIRE(snap.rows == 2);
    CHECK(snap.at(0, 0) == doctest::Approx(0.0));  // oldest surviving = (0,1)
    CHECK(snap.at(0, 1) == doctest::Approx(1.0));
    CHECK(snap.at(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(bank.stamps() == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("push of exactly C rows fills the bank in order") {
    Rng rng(3);
    MemoryBank bank(4, Domain::Source, Modality::Image);
    auto rows = random_unit_rows(rng, 4, 5);
    bank.push_rows(rows, 7);
    CHECK(bank.snapshot() == rows);
}

TEST_CASE("push of C+1 rows evicts the first") {
    Rng rng(4);
    MemoryBank bank(4, Domain::Source, Modality::Image);
    auto rows = random_unit_rows(rng, 5, 3);
    bank.push_rows(rows, 0);
    auto snap = bank.snapshot();
    REQUIRE(snap.rows == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(snap.at(i, j) == rows.at(i + 1, j));
}

TEST_CASE("snapshots are isolated from later pushes") {
    MemoryBank bank(3, Domain::Target, Modality::Image);
    bank.push_rows(unit_row(1, 0), 0);
    auto snap = bank.snapshot();
    bank.push_rows(unit_row(0, 1), 1);
    REQUIRE(snap.rows == 1);
    CHECK(snap.at(0, 0) == 1.0);

    MemoryBank empty(3, Domain::Target, Modality::Image);
    auto es = empty.snapshot();
    CHECK(es.rows == 0);
}

TEST_CASE("tag mismatch is rejected") {
    MemoryBank bank(2, Domain::Source, Modality::Image);
    FeatureBatch fb;
    fb.features = unit_row(1, 0);
    fb.domain = Domain::Target;
    fb.modality = Modality::Image;
    fb.provenance = Provenance::Teacher;
    fb.role = FeatureRole::TeacherTargetImage;
    CHECK_THROWS_AS(bank.push_batch(fb, 0), UsageError);
    fb.domain = Domain::Source;
    fb.provenance = Provenance::Student;
    fb.role = FeatureRole::SourceImage;
    bank.push_batch(fb, 0);
    CHECK(bank.size() == 1);
}

TEST_CASE("non-unit rows are rejected") {
    MemoryBank bank(2, Domain::Source, Modality::Image);
    Matrix bad(1, 2);
    bad.at(0, 0) = 2.0;
    CHECK_THROWS_AS(bank.push_rows(bad, 0), UsageError);
}

TEST_CASE("random push sequences match a brute-force bounded queue") {
    Rng rng(99);
    std::uniform_int_distribution<std::size_t> batch_size(1, 7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t cap = 1 + static_cast<std::size_t>(rng() % 16);
        MemoryBank bank(cap, Domain::Target, Modality::Text);
        std::deque<std::pair<Vector, std::uint64_t>> brute;
        for (std::uint64_t it = 0; it < 30; ++it) {
            auto rows = random_unit_rows(rng, batch_size(rng), 4);
            bank.push_rows(rows, it);
            for (std::size_t r = 0; r < rows.rows; ++r) {
                brute.emplace_back(Vector(rows.row(r), rows.row(r) + 4), it);
                if (brute.size() > cap) brute.pop_front();
            }
        }
        auto snap = bank.snapshot();
        auto stamps = bank.stamps();
        REQUIRE(snap.rows == brute.size());
        for (std::size_t i = 0; i < brute.size(); ++i) {
            CHECK(stamps[i] == brute[i].second);
            for (std::size_t j = 0; j < 4; ++j)
                CHECK(snap.at(i, j) == brute[i].first[j]);
        }
    }
}
