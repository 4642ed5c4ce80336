#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "topokit/emission.hpp"

using namespace topokit;

namespace {

EmissionMatrix random_matrix(std::uint32_t T, std::uint32_t L, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(-8.0f, 0.5f);
    EmissionMatrix em(T, L, 40.0f, false);
    for (auto& s : em.scores) s = u(rng);
    return em;
}

}  // namespace

TEST_CASE("emission text round-trip is bit exact") {
    EmissionMatrix em = random_matrix(13, 5, 123);
    std::stringstream buf;
    write_emission_text(buf, em);
    EmissionMatrix back = read_emission_text(buf);
    CHECK(back.T == em.T);
    CHECK(back.L == em.L);
    CHECK(back.frame_shift_ms == em.frame_shift_ms);
    CHECK(back.normalized == em.normalized);
    CHECK(back.scores == em.scores);
}

TEST_CASE("emission binary round-trip is bit exact") {
    EmissionMatrix em = random_matrix(7, 9, 45);
    em.normalized = false;
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    write_emission_binary(buf, em);
    EmissionMatrix back = read_emission_binary(buf);
    CHECK(back.scores == em.scores);
    CHECK(back.frame_shift_ms == em.frame_shift_ms);
}

TEST_CASE("emission text<->binary round-trip is bit exact") {
    EmissionMatrix em = random_matrix(11, 4, 7);
    std::stringstream t1;
    write_emission_text(t1, em);
    EmissionMatrix a = read_emission_text(t1);
    std::stringstream b1(std::ios::in | std::ios::out | std::ios::binary);
    write_emission_binary(b1, a);
    EmissionMatrix b = read_emission_binary(b1);
    std::stringstream t2;
    write_emission_text(t2, b);
    EmissionMatrix c = read_emission_text(t2);
    CHECK(c.scores == em.scores);
}

TEST_CASE("emission reader rejects bad input") {
    std::istringstream bad_header("x y\n");
    CHECK_THROWS_AS(read_emission_text(bad_header), ParseError);

    std::istringstream truncated("3 2 10 0\n0.0 0.0\n0.0\n");
    CHECK_THROWS_AS(read_emission_text(truncated), ParseError);

    std::istringstream bad_magic("NOPE!");
    CHECK_THROWS_AS(read_emission_binary(bad_magic), ParseError);
}

TEST_CASE("emission validate flags non-normalized rows") {
    EmissionMatrix em(2, 2, 10.0f, true);
    em.at(0, 0) = -0.3f;
    em.at(0, 1) = -0.4f;  // exp sums to > 1
    em.at(1, 0) = 0.0f;
    em.at(1, 1) = -100.0f;
    CHECK_THROWS_AS(em.validate(), Error);
}
